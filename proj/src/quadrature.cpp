#include "liouville/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <queue>

namespace liouville {

const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int order) {
  static std::mutex mu;
  static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;

  // Newton iteration on Legendre polynomials, symmetric nodes.
  std::vector<double> x(static_cast<std::size_t>(order)), w(static_cast<std::size_t>(order));
  const int m = (order + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(M_PI * (i + 0.75) / (order + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < order; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
      }
      pp = order * (z * p0 - p1) / (z * z - 1.0);
      double dz = p0 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(order - 1 - i)] = z;
    double weight = 2.0 / ((1.0 - z * z) * pp * pp);
    w[static_cast<std::size_t>(i)] = weight;
    w[static_cast<std::size_t>(order - 1 - i)] = weight;
  }
  auto [pos, inserted] = cache.emplace(order, std::make_pair(std::move(x), std::move(w)));
  return pos->second;
}

double Box::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= hi[i] - lo[i];
  return v;
}

Box Box::cube(int dim, double lo_val, double hi_val) {
  Box b;
  b.lo = Eigen::VectorXd::Constant(dim, lo_val);
  b.hi = Eigen::VectorXd::Constant(dim, hi_val);
  return b;
}

double integrate_fixed(const Integrand& f, const Box& box, int order) {
  const auto& [x, w] = gauss_legendre(order);
  const int d = box.dim();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  std::vector<double> pt(static_cast<std::size_t>(d));
  double sum = 0.0;
  for (;;) {
    double weight = 1.0;
    for (int k = 0; k < d; ++k) {
      double half = 0.5 * (box.hi[k] - box.lo[k]);
      pt[static_cast<std::size_t>(k)] =
          box.lo[k] + half * (1.0 + x[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]);
      weight *= half * w[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    }
    sum += weight * f(pt);
    int k = 0;
    while (k < d) {
      if (++idx[static_cast<std::size_t>(k)] < order) break;
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == d) break;
  }
  return sum;
}

namespace {

long rule_cost(int order, int dim) {
  long c = 1;
  for (int i = 0; i < dim; ++i) c *= order;
  return c;
}

struct WorkItem {
  double error;
  double fine;
  Box box;
  long seq;  // deterministic tie-break
  bool operator<(const WorkItem& o) const {
    if (error != o.error) return error < o.error;
    return seq > o.seq;
  }
};

}  // namespace

double integrate_adaptive(const Integrand& f, const Box& box, const QuadratureOptions& opts,
                          const std::string& what) {
  const int d = box.dim();
  const long per_box = rule_cost(opts.coarse_order, d) + rule_cost(opts.fine_order, d);
  long evals = 0;
  long seq = 0;

  auto estimate = [&](const Box& b) {
    double coarse = integrate_fixed(f, b, opts.coarse_order);
    double fine = integrate_fixed(f, b, opts.fine_order);
    evals += per_box;
    return WorkItem{std::abs(fine - coarse), fine, b, seq++};
  };

  std::priority_queue<WorkItem> heap;
  heap.push(estimate(box));
  double total = heap.top().fine;
  double total_error = heap.top().error;

  while (true) {
    double target = std::max(opts.abs_tol, opts.rel_tol * std::abs(total));
    target = std::max(target, 1e-15 * (1.0 + std::abs(total)));  // machine floor
    if (total_error <= target) break;
    if (evals + 2 * per_box > opts.max_evals)
      throw NumericalError("quadrature did not converge: " + what);

    WorkItem worst = heap.top();
    heap.pop();
    total -= worst.fine;
    total_error -= worst.error;

    int split = 0;
    double widest = -1.0;
    for (int k = 0; k < d; ++k) {
      double wdt = worst.box.hi[k] - worst.box.lo[k];
      if (wdt > widest) {
        widest = wdt;
        split = k;
      }
    }
    double mid = 0.5 * (worst.box.lo[split] + worst.box.hi[split]);
    Box left = worst.box, right = worst.box;
    left.hi[split] = mid;
    right.lo[split] = mid;

    for (const Box& half : {left, right}) {
      WorkItem item = estimate(half);
      total += item.fine;
      total_error += item.error;
      heap.push(std::move(item));
    }
  }
  return total;
}

FrozenRule FrozenRule::tensor(const Box& box, int order) {
  FrozenRule r;
  const auto& [x, w] = gauss_legendre(order);
  const int d = box.dim();
  std::vector<int> idx(static_cast<std::size_t>(d), 0);
  for (;;) {
    Eigen::VectorXd pt(d);
    double weight = 1.0;
    for (int k = 0; k < d; ++k) {
      double half = 0.5 * (box.hi[k] - box.lo[k]);
      pt[k] = box.lo[k] + half * (1.0 + x[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])]);
      weight *= half * w[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];
    }
    r.nodes.push_back(std::move(pt));
    r.weights.push_back(weight);
    int k = 0;
    while (k < d) {
      if (++idx[static_cast<std::size_t>(k)] < order) break;
      idx[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == d) break;
  }
  return r;
}

FrozenRule FrozenRule::composite(const Box& box, int order, int cells) {
  FrozenRule out;
  const int d = box.dim();
  std::vector<int> cell(static_cast<std::size_t>(d), 0);
  for (;;) {
    Box sub;
    sub.lo.resize(d);
    sub.hi.resize(d);
    for (int k = 0; k < d; ++k) {
      double width = (box.hi[k] - box.lo[k]) / cells;
      sub.lo[k] = box.lo[k] + width * cell[static_cast<std::size_t>(k)];
      sub.hi[k] = sub.lo[k] + width;
    }
    FrozenRule piece = tensor(sub, order);
    out.nodes.insert(out.nodes.end(), piece.nodes.begin(), piece.nodes.end());
    out.weights.insert(out.weights.end(), piece.weights.begin(), piece.weights.end());
    int k = 0;
    while (k < d) {
      if (++cell[static_cast<std::size_t>(k)] < cells) break;
      cell[static_cast<std::size_t>(k)] = 0;
      ++k;
    }
    if (k == d) break;
  }
  return out;
}

double integrate_adaptive_1d(const std::function<double(double)>& f, double a, double b,
                             double rel_tol, double abs_tol, const std::string& what) {
  Integrand wrap = [&](std::span<const double> pt) { return f(pt[0]); };
  Box box;
  box.lo = Eigen::VectorXd::Constant(1, a);
  box.hi = Eigen::VectorXd::Constant(1, b);
  QuadratureOptions opts;
  opts.rel_tol = rel_tol;
  opts.abs_tol = abs_tol;
  opts.coarse_order = 7;
  opts.fine_order = 15;
  return integrate_adaptive(wrap, box, opts, what);
}

}  // namespace liouville
