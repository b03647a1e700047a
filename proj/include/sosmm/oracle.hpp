#pragma once

// Brute-force references: grid maximization at fixed theta, grid min-max,
// rejection sampling and grid quadrature.  Max/min searches use grids that
// include the box endpoints; quadrature uses cell centers.

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosmm/moments.hpp"
#include "sosmm/poly.hpp"
#include "sosmm/rng.hpp"
#include "sosmm/sets.hpp"

namespace sosmm::oracle {

inline constexpr double kMembershipTolerance = 1e-9;

/// n points from lo to hi inclusive (n >= 2), or the midpoint when n == 1.
inline std::vector<double> node_grid(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("grid resolution must be >= 1");
  if (n == 1) return {0.5 * (lo + hi)};
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
  return g;
}

/// Centers of n equal cells.
inline std::vector<double> cell_grid(double lo, double hi, int n) {
  if (n < 1) throw std::invalid_argument("grid resolution must be >= 1");
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = lo + (hi - lo) * (i + 0.5) / n;
  return g;
}

/// Tensor grid over a box, first coordinate varying slowest.
inline std::vector<std::vector<double>> tensor_grid(const Box& box, int n, bool cells) {
  std::vector<std::vector<double>> axes;
  for (std::size_t k = 0; k < box.dim(); ++k)
    axes.push_back(cells ? cell_grid(box.lower[k], box.upper[k], n) : node_grid(box.lower[k], box.upper[k], n));
  std::vector<std::vector<double>> pts{{}};
  for (const auto& ax : axes) {
    std::vector<std::vector<double>> next;
    next.reserve(pts.size() * ax.size());
    for (const auto& p : pts)
      for (double v : ax) {
        auto q = p;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    pts = std::move(next);
  }
  return pts;
}

/// Default per-axis resolution for a given dimension.
inline int default_resolution(std::size_t dim) { return dim <= 2 ? 101 : 21; }

struct GridMax {
  double value = -std::numeric_limits<double>::infinity();
  std::vector<double> argmax;  // over the alpha variables that were gridded
  double error_estimate = 0.0;
  std::size_t feasible_points = 0;
};

class EmptyGridError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline Polynomial derivative(const Polynomial& p, std::size_t var) {
  Polynomial d(p.space());
  for (const auto& [e, c] : p.terms()) {
    if (e[var] == 0) continue;
    ExponentVector ne = e;
    ne[var] -= 1;
    d.add_term(std::move(ne), c * e[var]);
  }
  return d;
}
}  // namespace detail

/// max over alpha in S of J(theta, alpha) on a grid over the bounds of the
/// alpha variables used by J or S.  Every such variable must be bounded.
inline GridMax grid_max(const Polynomial& J, std::span<const double> theta, const SemialgebraicSet& S,
                        const NamedBounds& alpha_bounds, int resolution) {
  const auto& sp = *J.space();
  if (theta.size() != sp.theta_count()) throw std::invalid_argument("grid_max: theta has wrong dimension");
  std::vector<bool> used(sp.size(), false);
  for (auto v : J.variables_used()) used[v] = true;
  for (auto v : S.variables_used()) used[v] = true;
  std::vector<std::size_t> vars;
  Box box;
  for (std::size_t i = sp.theta_count(); i < sp.size(); ++i) {
    if (!used[i]) continue;
    auto it = alpha_bounds.find(sp.name(i));
    if (it == alpha_bounds.end()) throw std::invalid_argument("grid_max: variable '" + sp.name(i) + "' is unbounded");
    vars.push_back(i);
    box.lower.push_back(it->second.first);
    box.upper.push_back(it->second.second);
  }
  std::vector<Polynomial> grads;
  for (auto v : vars) grads.push_back(detail::derivative(J, v));

  GridMax r;
  std::vector<double> x(sp.size(), 0.0);
  for (std::size_t k = 0; k < theta.size(); ++k) x[k] = theta[k];
  double lip = 0.0;
  for (const auto& a : tensor_grid(box, resolution, false)) {
    for (std::size_t k = 0; k < vars.size(); ++k) x[vars[k]] = a[k];
    if (!S.contains(x, kMembershipTolerance)) continue;
    ++r.feasible_points;
    const double v = J.evaluate(x);
    if (v > r.value) {
      r.value = v;
      r.argmax = a;
    }
    double l = 0.0;
    for (std::size_t k = 0; k < vars.size(); ++k)
      l += std::abs(grads[k].evaluate(x)) * 0.5 * (box.upper[k] - box.lower[k]) / std::max(1, resolution - 1);
    lip = std::max(lip, l);
  }
  if (r.feasible_points == 0) throw EmptyGridError("grid_max: no feasible inner grid point");
  r.error_estimate = lip;
  return r;
}

struct GridMinMax {
  std::vector<double> theta;
  double value = std::numeric_limits<double>::infinity();
  double error_estimate = 0.0;
  std::size_t feasible_outer = 0;
};

/// Generic outer grid search: `inner(theta)` returns the inner max (or nullopt
/// when infeasible), `member(theta)` filters the outer set.  Ties keep the
/// first grid point.
inline GridMinMax grid_minmax(const Box& theta_box, int outer_res,
                              const std::function<bool(std::span<const double>)>& member,
                              const std::function<std::optional<GridMax>(std::span<const double>)>& inner) {
  GridMinMax r;
  for (const auto& th : tensor_grid(theta_box, outer_res, false)) {
    if (!member(th)) continue;
    const auto v = inner(th);
    if (!v) continue;
    ++r.feasible_outer;
    if (v->value < r.value) {
      r.value = v->value;
      r.theta = th;
      r.error_estimate = v->error_estimate;
    }
  }
  if (r.feasible_outer == 0) throw EmptyGridError("grid_minmax: no feasible outer grid point");
  return r;
}

/// Polynomial version: M over the theta block of J's space (no lifting
/// variables), S over (theta, alpha) with bounded alpha.
inline GridMinMax grid_minmax(const Polynomial& J, const SemialgebraicSet& M, const SemialgebraicSet& S,
                              const Box& theta_box, const NamedBounds& alpha_bounds, int outer_res, int inner_res) {
  if (theta_box.dim() > 4) throw std::invalid_argument("grid_minmax refuses more than 4 outer dimensions");
  for (auto v : M.variables_used())
    if (!M.space()->is_theta(v)) throw std::invalid_argument("grid_minmax: outer set must involve theta only");
  auto member = [&](std::span<const double> th) {
    std::vector<double> x(M.space()->size(), 0.0);
    for (std::size_t k = 0; k < th.size(); ++k) x[k] = th[k];
    return M.contains(x, kMembershipTolerance);
  };
  auto inner = [&](std::span<const double> th) -> std::optional<GridMax> {
    try {
      return grid_max(J, th, S, alpha_bounds, inner_res);
    } catch (const EmptyGridError&) {
      return std::nullopt;
    }
  };
  return grid_minmax(theta_box, outer_res, member, inner);
}

struct SampleResult {
  std::vector<std::vector<double>> points;
  std::size_t proposals = 0;
  double acceptance_rate = 0.0;
};

/// Uniform proposals on `box` (all variables of the set's space), accepted
/// when every constraint holds within 1e-9.  Stops after `count` accepted
/// points or `budget` proposals.
inline SampleResult rejection_sample(const SemialgebraicSet& set, const Box& box, std::size_t count,
                                     std::uint64_t seed, std::size_t budget = 0) {
  if (box.dim() != set.space()->size()) throw std::invalid_argument("rejection_sample: box dimension mismatch");
  if (budget == 0) budget = std::max<std::size_t>(100 * count, 100000);
  CounterRng rng(seed);
  SampleResult r;
  std::vector<double> x(box.dim());
  while (r.points.size() < count && r.proposals < budget) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = rng.uniform(box.lower[k], box.upper[k]);
    ++r.proposals;
    if (set.contains(x, kMembershipTolerance)) r.points.push_back(x);
  }
  r.acceptance_rate = static_cast<double>(r.points.size()) / static_cast<double>(r.proposals);
  if (r.points.empty()) throw EmptyGridError("rejection_sample: no point accepted after " + std::to_string(r.proposals) + " proposals");
  return r;
}

/// Midpoint-rule integral of the uniform probability measure on `box`.
inline double quadrature_mean(const Box& box, int n, const std::function<double(std::span<const double>)>& f) {
  double s = 0.0;
  std::size_t cnt = 0;
  for (const auto& p : tensor_grid(box, n, true)) {
    s += f(p);
    ++cnt;
  }
  return s / static_cast<double>(cnt);
}

/// Midpoint-rule moment of monomial beta, evaluated axis by axis.
inline double quadrature_moment(const Box& box, const ExponentVector& beta, int n) {
  double m = 1.0;
  for (std::size_t k = 0; k < box.dim(); ++k) {
    double s = 0.0;
    for (double x : cell_grid(box.lower[k], box.upper[k], n)) s += std::pow(x, beta[k]);
    m *= s / n;
  }
  return m;
}

inline void write_points_csv(std::ostream& os, const std::vector<std::string>& names,
                             const std::vector<std::vector<double>>& points) {
  for (std::size_t i = 0; i < names.size(); ++i) os << (i ? "," : "") << names[i];
  os << '\n';
  os.precision(12);
  for (const auto& p : points) {
    for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
    os << '\n';
  }
}

}  // namespace sosmm::oracle
