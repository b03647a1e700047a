#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosmm/bounding_box.hpp"
#include "sosmm/hierarchy.hpp"
#include "sosmm/oracle.hpp"
#include "sosmm/rng.hpp"
#include "sosmm/value_approx.hpp"

namespace sosmm {

enum class ProblemKind { general_minmax, conditional_center, robust_projection };

inline const char* to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::general_minmax: return "general_minmax";
    case ProblemKind::conditional_center: return "conditional_center";
    case ProblemKind::robust_projection: return "robust_projection";
  }
  return "?";
}

inline ProblemKind parse_kind(const std::string& s) {
  for (auto k : {ProblemKind::general_minmax, ProblemKind::conditional_center, ProblemKind::robust_projection})
    if (s == to_string(k)) return k;
  throw std::invalid_argument("unknown problem kind '" + s + "'");
}

/// min over M of max over S of J.  M may use alpha names as lifting
/// variables (e.g. noise samples of a feasible parameter set); S and M are
/// otherwise unrelated.
struct EstimationProblem {
  ProblemKind kind = ProblemKind::general_minmax;
  SpacePtr space;
  Polynomial J;
  SemialgebraicSet M;
  SemialgebraicSet S;
  NamedBounds bounds;  // a-priori intervals, any variable
  std::optional<SparsityPattern> cliques;
  std::string notes;

  void validate() const {
    if (!space) throw std::invalid_argument("problem has no variable space");
    if (space->theta_count() == 0) throw std::invalid_argument("problem has no theta variables");
    if (!same_space(J.space(), space) || !same_space(M.space(), space) || !same_space(S.space(), space))
      throw std::invalid_argument("objective and sets must share the problem's variable space");
    for (const auto& [name, iv] : bounds) {
      space->index_of(name);
      if (!(iv.first < iv.second)) throw std::invalid_argument("a-priori interval for " + name + " is empty");
    }
    if (kind != ProblemKind::general_minmax && !S.independent_of_theta())
      throw std::invalid_argument(std::string(to_string(kind)) + ": inner set must not depend on theta");
  }
};

struct Dataset {
  std::string example;
  std::size_t N = 0;
  std::uint64_t seed = 0;
  std::vector<std::vector<double>> u;  // u[channel][t]
  std::vector<double> y;
  std::vector<double> input_bounds;  // per channel
  double output_bound = 0.0;
  double disturbance_bound = 0.0;
  double threshold = 0.0;
  double w_bound = 0.0;
  std::vector<double> theta_true;
  std::vector<int> subset;  // kept parameters, 1-based

  void validate() const {
    if (N == 0) throw std::invalid_argument("dataset horizon must be positive");
    if (y.size() != N) throw std::invalid_argument("output length differs from N");
    for (const auto& ch : u)
      if (ch.size() != N) throw std::invalid_argument("input length differs from N");
    for (double b : input_bounds)
      if (b < 0.0) throw std::invalid_argument("negative input noise bound");
    if (output_bound < 0.0 || disturbance_bound < 0.0) throw std::invalid_argument("negative noise bound");
  }
};

struct Instance {
  Dataset data;
  EstimationProblem problem;
  std::vector<double> generating_point;  // true parameters and noise, one value per variable
};

// ---------------------------------------------------------------- builders

/// J = sum_k (nu_k - theta_k)^2, S = D_nu.
inline EstimationProblem build_conditional_center(const SpacePtr& space, const std::vector<std::string>& nu_names,
                                                  const SemialgebraicSet& D_nu, const SemialgebraicSet& M,
                                                  NamedBounds bounds = {}) {
  if (nu_names.size() != space->theta_count())
    throw std::invalid_argument("conditional center: " + std::to_string(nu_names.size()) +
                                " feasible-parameter variables for " + std::to_string(space->theta_count()) +
                                " parameters");
  EstimationProblem p;
  p.kind = ProblemKind::conditional_center;
  p.space = space;
  p.J = Polynomial(space);
  for (std::size_t k = 0; k < nu_names.size(); ++k) {
    if (space->is_theta(space->index_of(nu_names[k])))
      throw std::invalid_argument("conditional center: " + nu_names[k] + " must be an alpha variable");
    p.J += (Polynomial::variable(space, nu_names[k]) - Polynomial::variable(space, k)).pow(2);
  }
  p.S = D_nu;
  p.M = M;
  p.bounds = std::move(bounds);
  p.validate();
  return p;
}

/// J = sum_t e_t^2, S = S_eps.
inline EstimationProblem build_robust_projection(const std::vector<Polynomial>& residuals,
                                                 const SemialgebraicSet& S_eps, const SemialgebraicSet& M,
                                                 NamedBounds bounds = {}) {
  if (residuals.empty()) throw std::invalid_argument("robust projection: no residuals");
  EstimationProblem p;
  p.kind = ProblemKind::robust_projection;
  p.space = S_eps.space();
  p.J = Polynomial(p.space);
  for (const auto& e : residuals) p.J += e * e;
  p.S = S_eps;
  p.M = M;
  p.bounds = std::move(bounds);
  p.validate();
  return p;
}

// ---------------------------------------------------------- quantized ARX

struct ArxOptions {
  std::vector<double> theta_true{0.6, 0.6};
  double d_bound = 0.1;
  double threshold = 1.0;
  double u_bound = 2.5;
  double w_bound = 10.0;  // a-priori |w(t)| <= w_bound, keeps every noise sample bounded
  std::optional<Box> theta_prior = Box({-2.0, -2.0}, {2.0, 2.0});
};

namespace detail {

inline std::string idx(const char* p, std::size_t t) { return p + std::to_string(t); }

// Range of e(t) = y(t) - w(t) implied by the bit and |w| <= W.
inline std::pair<double, double> arx_eps_range(double bit, double C, double W) {
  return bit > 0.5 ? std::pair{1.0 - W, 1.0 - C} : std::pair{-C, W};
}

}  // namespace detail

/// w(t) = th1 w(t-1) + th2 u(t) + d(t), y(t) = [w(t) >= C].  The set D over
/// (nu, d, e) is written for t = 2..N.
inline Instance simulate_quantized_arx(std::uint64_t seed, std::size_t N, const ArxOptions& opt = {}) {
  if (N < 2) throw std::invalid_argument("quantized ARX needs N >= 2");
  if (opt.theta_true.size() != 2) throw std::invalid_argument("quantized ARX has two parameters");
  Instance inst;
  auto& ds = inst.data;
  ds.example = "arx-binary";
  ds.N = N;
  ds.seed = seed;
  ds.theta_true = opt.theta_true;
  ds.disturbance_bound = opt.d_bound;
  ds.threshold = opt.threshold;
  ds.w_bound = opt.w_bound;
  ds.u.assign(1, std::vector<double>(N));
  ds.y.resize(N);
  std::vector<double> d(N), w(N);
  CounterRng rng(seed);
  double wprev = 0.0;
  for (std::size_t t = 0; t < N; ++t) {
    ds.u[0][t] = rng.uniform(-opt.u_bound, opt.u_bound);
    d[t] = rng.uniform(-opt.d_bound, opt.d_bound);
    w[t] = opt.theta_true[0] * wprev + opt.theta_true[1] * ds.u[0][t] + d[t];
    ds.y[t] = w[t] >= opt.threshold ? 1.0 : 0.0;
    wprev = w[t];
  }

  std::vector<std::string> alpha{"nu1", "nu2"};
  for (std::size_t t = 2; t <= N; ++t) alpha.push_back(detail::idx("d", t));
  for (std::size_t t = 1; t <= N; ++t) alpha.push_back(detail::idx("e", t));
  const auto sp = VariableSpace::make({"th1", "th2"}, alpha);

  NamedBounds bounds;
  for (std::size_t t = 2; t <= N; ++t) bounds[detail::idx("d", t)] = {-opt.d_bound, opt.d_bound};
  for (std::size_t t = 1; t <= N; ++t)
    bounds[detail::idx("e", t)] = detail::arx_eps_range(ds.y[t - 1], opt.threshold, opt.w_bound);
  if (opt.theta_prior)
    for (std::size_t k = 0; k < 2; ++k) {
      bounds["th" + std::to_string(k + 1)] = {opt.theta_prior->lower[k], opt.theta_prior->upper[k]};
      bounds["nu" + std::to_string(k + 1)] = {opt.theta_prior->lower[k], opt.theta_prior->upper[k]};
    }

  // D over (p1, p2, d, e) for a chosen pair of parameter names.
  auto make_D = [&](const std::string& p1, const std::string& p2) {
    SemialgebraicSet D(sp);
    const auto a = Polynomial::variable(sp, p1), b = Polynomial::variable(sp, p2);
    for (std::size_t t = 1; t <= N; ++t) {
      const auto e = Polynomial::variable(sp, detail::idx("e", t));
      D.add_inequality(ds.y[t - 1] > 0.5 ? (1.0 - opt.threshold) - e : e + opt.threshold);
    }
    for (std::size_t t = 2; t <= N; ++t) {
      const auto dt = Polynomial::variable(sp, detail::idx("d", t));
      const auto et = Polynomial::variable(sp, detail::idx("e", t));
      const auto ep = Polynomial::variable(sp, detail::idx("e", t - 1));
      D.add_equality(ds.y[t - 1] - a * (ds.y[t - 2] - ep) - b * ds.u[0][t - 1] - dt - et);
      D.add_inequality(interval_constraint(sp, detail::idx("d", t), -opt.d_bound, opt.d_bound));
    }
    for (std::size_t t = 1; t <= N; ++t) {
      const auto [lo, hi] = detail::arx_eps_range(ds.y[t - 1], opt.threshold, opt.w_bound);
      D.add_inequality(interval_constraint(sp, detail::idx("e", t), lo, hi));
    }
    if (opt.theta_prior)
      for (std::size_t k = 0; k < 2; ++k)
        D.add_inequality(
            interval_constraint(sp, k == 0 ? p1 : p2, opt.theta_prior->lower[k], opt.theta_prior->upper[k]));
    return D;
  };

  inst.problem = build_conditional_center(sp, {"nu1", "nu2"}, make_D("nu1", "nu2"), make_D("th1", "th2"), bounds);
  std::vector<std::vector<std::string>> cl;
  for (std::size_t t = 2; t <= N; ++t)
    cl.push_back({"th1", "th2", "nu1", "nu2", detail::idx("d", t), detail::idx("e", t - 1), detail::idx("e", t)});
  inst.problem.cliques = SparsityPattern::from_names(sp, cl);
  inst.problem.cliques->verify();
  inst.problem.notes = "quantized ARX, binary sensor, conditional Chebyshev center over the feasible set";
  ds.subset = {1, 2};

  inst.generating_point.assign(sp->size(), 0.0);
  inst.generating_point[0] = inst.generating_point[2] = opt.theta_true[0];
  inst.generating_point[1] = inst.generating_point[3] = opt.theta_true[1];
  for (std::size_t t = 2; t <= N; ++t) inst.generating_point[sp->index_of(detail::idx("d", t))] = d[t - 1];
  for (std::size_t t = 1; t <= N; ++t)
    inst.generating_point[sp->index_of(detail::idx("e", t))] = ds.y[t - 1] - w[t - 1];
  return inst;
}

/// Exact feasibility oracle for the quantized ARX set: the reachable w(t)
/// given theta is an interval, propagated forward.
class ArxMembership {
 public:
  explicit ArxMembership(const Dataset& ds, std::optional<Box> prior = std::nullopt)
      : ds_(ds), prior_(std::move(prior)) {}

  /// Feasible with the disturbance bound enlarged by `slack`.
  bool member(std::span<const double> th, double slack = 0.0) const {
    const double W = ds_.w_bound, C = ds_.threshold, db = ds_.disturbance_bound + slack;
    auto bit_range = [&](std::size_t t) {
      return ds_.y[t] > 0.5 ? std::pair{std::max(C, -W), W} : std::pair{-W, std::min(C, W)};
    };
    auto [lo, hi] = bit_range(0);
    for (std::size_t t = 1; t < ds_.N; ++t) {
      const double a = th[0] * lo, b = th[0] * hi;
      const double base = th[1] * ds_.u[0][t];
      double nlo = std::min(a, b) + base - db, nhi = std::max(a, b) + base + db;
      const auto [blo, bhi] = bit_range(t);
      nlo = std::max(nlo, blo);
      nhi = std::min(nhi, bhi);
      if (nlo > nhi) return false;
      lo = nlo;
      hi = nhi;
    }
    return true;
  }

  /// Smallest enlargement of the disturbance bound (plus distance outside the
  /// prior box) that makes theta feasible.
  double residual(std::span<const double> th) const {
    double out = 0.0;
    if (prior_)
      for (std::size_t k = 0; k < 2; ++k)
        out = std::max({out, prior_->lower[k] - th[k], th[k] - prior_->upper[k]});
    if (member(th)) return out;
    double lo = 0.0, hi = 1.0;
    while (!member(th, hi)) hi *= 2.0;
    for (int i = 0; i < 80 && hi - lo > 1e-12; ++i) {
      const double mid = 0.5 * (lo + hi);
      (member(th, mid) ? hi : lo) = mid;
    }
    return std::max(out, hi);
  }

  bool contains(std::span<const double> th) const { return residual(th) == 0.0; }

 private:
  Dataset ds_;
  std::optional<Box> prior_;
};

namespace detail {

// Andrew's monotone chain.
inline std::vector<std::vector<double>> convex_hull_2d(std::vector<std::vector<double>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::vector<double>> h(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lo = k + 1; i-- > 0;) {
    while (k >= lo && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

}  // namespace detail

/// Grid oracle for the Chebyshev center: feasible grid points stand in for
/// the feasible set; J~(theta) = max over feasible nu of |nu - theta|^2,
/// minimized over feasible theta (conditional) or the whole box.
inline oracle::GridMinMax arx_center_oracle(const ArxMembership& fps, const Box& box, int resolution,
                                            bool conditional = true) {
  std::vector<std::vector<double>> feas;
  for (const auto& p : oracle::tensor_grid(box, resolution, false))
    if (fps.contains(p)) feas.push_back(p);
  if (feas.empty()) throw oracle::EmptyGridError("no feasible grid point for the ARX parameter set");
  // The farthest feasible point is a vertex of their convex hull.
  const auto hull = detail::convex_hull_2d(feas);
  auto inner = [&](std::span<const double> th) {
    oracle::GridMax g;
    g.value = -std::numeric_limits<double>::infinity();
    for (const auto& nu : hull) {
      const double v = (nu[0] - th[0]) * (nu[0] - th[0]) + (nu[1] - th[1]) * (nu[1] - th[1]);
      if (v > g.value) {
        g.value = v;
        g.argmax = nu;
      }
    }
    g.feasible_points = feas.size();
    double h = 0.0;
    for (std::size_t k = 0; k < 2; ++k) h = std::max(h, box.upper[k] - box.lower[k]);
    h /= (resolution - 1);
    g.error_estimate = 2.0 * std::sqrt(g.value) * h + h * h;
    return g;
  };
  return oracle::grid_minmax(
      box, resolution, [&](std::span<const double> th) { return !conditional || fps.contains(th); }, inner);
}

// ----------------------------------------------------------- static MISO

struct MisoTerm {
  std::vector<int> params;  // 1-based parameter indices, multiplied
  int channel;              // 1-based input channel
};

/// c_1 = th1, c_2 = th1 th2, c_3 = th3, c_4 = th1^2, c_5 = th4 th5, c_6 = th5^2, c_7 = th4 th6.
inline std::vector<MisoTerm> miso_terms() {
  return {{{1}, 1}, {{1, 2}, 2}, {{3}, 3}, {{1, 1}, 4}, {{4, 5}, 5}, {{5, 5}, 6}, {{4, 6}, 7}};
}

/// Terms whose parameters are distinct and all in `subset`.
inline std::vector<MisoTerm> miso_kept_terms(const std::vector<int>& subset) {
  std::vector<MisoTerm> out;
  for (const auto& term : miso_terms()) {
    bool keep = true;
    for (std::size_t i = 0; i < term.params.size(); ++i) {
      keep = keep && std::find(subset.begin(), subset.end(), term.params[i]) != subset.end();
      for (std::size_t j = 0; j < i; ++j) keep = keep && term.params[j] != term.params[i];
    }
    if (keep) out.push_back(term);
  }
  return out;
}

struct MisoOptions {
  std::vector<double> theta_true{1.0, 0.6, -0.5, 0.3, 0.8, -0.5};
  double dx_bound = 0.2;
  double dy_bound = 0.25;
  std::vector<int> subset{1, 3};
  double theta_prior = 3.0;  // |theta_k| <= theta_prior
};

inline std::string miso_xi(int channel, std::size_t t) {
  return "xi" + std::to_string(channel) + "_" + std::to_string(t);
}

inline double miso_coefficient(const MisoTerm& term, const std::vector<int>& subset, std::span<const double> th) {
  double c = 1.0;
  for (int p : term.params) {
    const auto pos = std::find(subset.begin(), subset.end(), p) - subset.begin();
    c *= th[static_cast<std::size_t>(pos)];
  }
  return c;
}

/// y = sum_i c_i(theta) x_i + eta, u_i = x_i + xi_i, restricted to the kept
/// terms; the loss uses the regressors u - xi.
inline Instance simulate_miso_static(std::uint64_t seed, std::size_t N, const MisoOptions& opt = {}) {
  if (N < 2) throw std::invalid_argument("MISO example needs N >= 2");
  if (opt.theta_true.size() != 6) throw std::invalid_argument("MISO example has six parameters");
  if (opt.subset.empty()) throw std::invalid_argument("empty parameter subset");
  std::vector<int> subset = opt.subset;
  std::sort(subset.begin(), subset.end());
  for (std::size_t i = 0; i < subset.size(); ++i)
    if (subset[i] < 1 || subset[i] > 6 || (i && subset[i] == subset[i - 1]))
      throw std::invalid_argument("invalid parameter subset: entries must be distinct and in 1..6");
  const auto terms = miso_kept_terms(subset);
  if (terms.empty()) throw std::invalid_argument("parameter subset keeps no model term");

  Instance inst;
  auto& ds = inst.data;
  ds.example = "miso-static";
  ds.N = N;
  ds.seed = seed;
  ds.theta_true = opt.theta_true;
  ds.subset = subset;
  ds.input_bounds.assign(7, opt.dx_bound);
  ds.output_bound = opt.dy_bound;
  ds.u.assign(7, std::vector<double>(N));
  ds.y.resize(N);
  std::vector<double> th_sub;
  for (int p : subset) th_sub.push_back(opt.theta_true[static_cast<std::size_t>(p - 1)]);
  std::vector<std::vector<double>> xi(7, std::vector<double>(N));
  std::vector<double> eta(N);
  CounterRng rng(seed);
  for (std::size_t t = 0; t < N; ++t) {
    std::vector<double> x(7);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < 7; ++i) xi[i][t] = rng.uniform(-opt.dx_bound, opt.dx_bound);
    eta[t] = rng.uniform(-opt.dy_bound, opt.dy_bound);
    double w = 0.0;
    for (const auto& term : terms)
      w += miso_coefficient(term, subset, th_sub) * x[static_cast<std::size_t>(term.channel - 1)];
    for (std::size_t i = 0; i < 7; ++i) ds.u[i][t] = x[i] + xi[i][t];
    ds.y[t] = w + eta[t];
  }

  std::vector<std::string> theta_names, alpha;
  for (int p : subset) theta_names.push_back("th" + std::to_string(p));
  for (std::size_t t = 1; t <= N; ++t)
    for (const auto& term : terms) alpha.push_back(miso_xi(term.channel, t));
  for (std::size_t t = 1; t <= N; ++t) alpha.push_back(detail::idx("eta", t));
  const auto sp = VariableSpace::make(theta_names, alpha);

  auto coef = [&](const MisoTerm& term) {
    Polynomial c = Polynomial::constant(sp, 1.0);
    for (int p : term.params) c *= Polynomial::variable(sp, "th" + std::to_string(p));
    return c;
  };
  NamedBounds bounds;
  for (const auto& n : theta_names) bounds[n] = {-opt.theta_prior, opt.theta_prior};
  SemialgebraicSet S(sp), D(sp);
  // |v| <= b, or v = 0 for a noiseless channel.
  auto noise_range = [&](SemialgebraicSet& set, const std::string& name, double b) {
    if (b > 0.0) {
      set.add_inequality(interval_constraint(sp, name, -b, b));
      bounds[name] = {-b, b};
    } else {
      set.add_equality(Polynomial::variable(sp, name));
    }
  };
  std::vector<Polynomial> residuals;
  for (std::size_t t = 1; t <= N; ++t) {
    Polynomial model(sp);
    for (const auto& term : terms) {
      const auto name = miso_xi(term.channel, t);
      model += coef(term) * (ds.u[static_cast<std::size_t>(term.channel - 1)][t - 1] - Polynomial::variable(sp, name));
      noise_range(S, name, opt.dx_bound);
      noise_range(D, name, opt.dx_bound);
    }
    const auto eta_name = detail::idx("eta", t);
    residuals.push_back(ds.y[t - 1] - model);
    D.add_equality(ds.y[t - 1] - model - Polynomial::variable(sp, eta_name));
    noise_range(D, eta_name, opt.dy_bound);
  }
  for (const auto& n : theta_names) D.add_inequality(interval_constraint(sp, n, -opt.theta_prior, opt.theta_prior));
  inst.problem = build_robust_projection(residuals, S, D, bounds);

  std::vector<std::vector<std::string>> cl;
  for (std::size_t t = 1; t <= N; ++t) {
    std::vector<std::string> c = theta_names;
    for (const auto& term : terms) c.push_back(miso_xi(term.channel, t));
    c.push_back(detail::idx("eta", t));
    cl.push_back(c);
  }
  inst.problem.cliques = SparsityPattern::from_names(sp, cl);
  inst.problem.cliques->verify();
  inst.problem.notes = "static MISO model, errors in variables, worst-case l2 loss over the feasible set";

  inst.generating_point.assign(sp->size(), 0.0);
  for (std::size_t k = 0; k < th_sub.size(); ++k) inst.generating_point[k] = th_sub[k];
  for (std::size_t t = 1; t <= N; ++t) {
    for (const auto& term : terms)
      inst.generating_point[sp->index_of(miso_xi(term.channel, t))] = xi[static_cast<std::size_t>(term.channel - 1)][t - 1];
    inst.generating_point[sp->index_of(detail::idx("eta", t))] = eta[t - 1];
  }
  return inst;
}

/// Closed forms for the MISO example: the inner maximum of the loss and the
/// distance of theta from the feasible parameter set.
class MisoOracle {
 public:
  explicit MisoOracle(const Dataset& ds) : ds_(ds), terms_(miso_kept_terms(ds.subset)) {}

  /// max over |xi| <= dx of sum_t (r_t + sum_i c_i xi_i)^2 = sum_t (|r_t| + sum_i dx_i |c_i|)^2.
  double worst_case_loss(std::span<const double> th) const {
    double s = 0.0;
    for (std::size_t t = 0; t < ds_.N; ++t) {
      const auto [r, spread] = residual_and_spread(th, t);
      s += (std::abs(r) + spread) * (std::abs(r) + spread);
    }
    return s;
  }

  /// Loss at a given noise realization xi[channel][t].
  double loss(std::span<const double> th, const std::vector<std::vector<double>>& xi) const {
    double s = 0.0;
    for (std::size_t t = 0; t < ds_.N; ++t) {
      double e = ds_.y[t];
      for (const auto& term : terms_) {
        const auto ch = static_cast<std::size_t>(term.channel - 1);
        e -= miso_coefficient(term, ds_.subset, th) * (ds_.u[ch][t] - xi[ch][t]);
      }
      s += e * e;
    }
    return s;
  }

  /// max_t (|r_t| - dy - sum_i dx_i |c_i|)_+ ; zero iff theta is feasible.
  double residual(std::span<const double> th) const {
    double m = 0.0;
    for (std::size_t t = 0; t < ds_.N; ++t) {
      const auto [r, spread] = residual_and_spread(th, t);
      m = std::max(m, std::abs(r) - ds_.output_bound - spread);
    }
    return m;
  }

  const std::vector<MisoTerm>& terms() const { return terms_; }

 private:
  std::pair<double, double> residual_and_spread(std::span<const double> th, std::size_t t) const {
    double r = ds_.y[t], spread = 0.0;
    for (const auto& term : terms_) {
      const auto ch = static_cast<std::size_t>(term.channel - 1);
      const double c = miso_coefficient(term, ds_.subset, th);
      r -= c * ds_.u[ch][t];
      spread += ds_.input_bounds[ch] * std::abs(c);
    }
    return {r, spread};
  }

  Dataset ds_;
  std::vector<MisoTerm> terms_;
};

// -------------------------------------------------------------- pipeline

inline constexpr double kFeasibilityTolerance = 1e-6;

struct TwoStageSettings {
  std::vector<int> taus;          // empty: the smallest admissible tau
  int order = 0;                  // first stage-two order; 0 = minimal
  int max_order = 0;              // last stage-two order; 0 = order
  int box_order = 0;              // relaxation order for the outer box; 0 = minimal
  bool sparse = true;             // use the problem's cliques when present
  int escalate = 2;               // extra stage-two orders tried while the point leaves M (max_order unset)
  std::optional<Box> theta_box;   // skip the outer-box stage
  sdp::Settings solver;
};

struct TauRun {
  int tau = 0;
  ValueFunctionApprox approx;
  HierarchyResult hierarchy;
  std::vector<double> theta;  // stage-two estimate
  double value = 0.0;         // J~*_tau(theta)
  double residual = 0.0;      // violation of M at the recovered point
  double stage1_seconds = 0.0;
  double stage2_seconds = 0.0;
};

struct TwoStageResult {
  std::vector<double> estimate;
  double outer_value = 0.0;
  Box theta_box;
  std::vector<OrderResult> box_solves;
  double box_seconds = 0.0;
  std::vector<TauRun> runs;
  RunningBest best;
  std::size_t best_run = 0;
  double feasibility_residual = 0.0;
  std::vector<std::string> warnings;
  bool sparse = false;

  const ValueFunctionApprox& value_function() const { return runs.at(best_run).approx; }
  const HierarchyResult& hierarchy() const { return runs.at(best_run).hierarchy; }
  bool degraded() const {
    for (const auto& r : runs)
      if (r.approx.status != sdp::Status::optimal) return true;
    const auto& h = hierarchy();
    for (const auto& o : h.orders)
      if (o.status != sdp::Status::optimal) return true;
    return h.extraction_failed;
  }
};

namespace detail {

inline SpacePtr theta_and_used(const VariableSpace& space, const SemialgebraicSet& M) {
  return theta_plus(space, M.variables_used());
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Outer box of the theta-projection of M.
inline OuterBoxResult problem_outer_box(const EstimationProblem& p, int order, const sdp::Settings& solver = {},
                                        bool sparse = true, double padding = -1.0) {
  const auto sub = detail::theta_and_used(*p.space, p.M);
  const auto M = p.M.remap(sub);
  MomentOptions mo;
  mo.solver = solver;
  for (const auto& [name, iv] : p.bounds)
    if (std::find(sub->names().begin(), sub->names().end(), name) != sub->names().end()) mo.bounds[name] = iv;
  if (sparse && p.cliques) mo.pattern = p.cliques->restrict_to(sub);
  if (order <= 0) order = std::max(1, (M.max_degree() + 1) / 2);
  return outer_box_detailed(M, order, padding, mo);
}

/// min of `f` (theta only) over M, lifted into theta + the variables M uses.
inline HierarchyResult minimize_over_outer_set(const Polynomial& f, const EstimationProblem& p, const Box& theta_box,
                                               int t_min, int t_max, const sdp::Settings& solver, bool sparse) {
  const auto sub = detail::theta_and_used(*p.space, p.M);
  MomentOptions mo;
  mo.solver = solver;
  const auto& names = sub->names();
  for (const auto& [name, iv] : p.bounds)
    if (std::find(names.begin(), names.end(), name) != names.end()) mo.bounds[name] = iv;
  for (std::size_t k = 0; k < sub->theta_count(); ++k) mo.bounds[names[k]] = {theta_box.lower[k], theta_box.upper[k]};
  if (sparse && p.cliques) mo.pattern = p.cliques->restrict_to(sub);
  return solve_hierarchy(f.remap(sub), p.M.remap(sub), t_min, t_max, mo);
}

/// min of `f` over the box alone (the unconditional problem).
inline HierarchyResult minimize_over_box(const Polynomial& f, const Box& box, int t_min, int t_max,
                                         const sdp::Settings& solver = {}) {
  const auto& sp = f.space();
  MomentOptions mo;
  mo.solver = solver;
  for (std::size_t k = 0; k < sp->theta_count(); ++k) mo.bounds[sp->name(k)] = {box.lower[k], box.upper[k]};
  return solve_hierarchy(f, SemialgebraicSet::entire(sp), t_min, t_max, mo);
}

inline TwoStageResult solve_two_stage(const EstimationProblem& p, const TwoStageSettings& set = {}) {
  p.validate();
  TwoStageResult res;
  res.sparse = set.sparse && p.cliques.has_value();

  auto t0 = std::chrono::steady_clock::now();
  if (set.theta_box) {
    res.theta_box = *set.theta_box;
  } else {
    try {
      auto ob = problem_outer_box(p, set.box_order, set.solver, res.sparse);
      res.theta_box = ob.box;
      res.box_solves = ob.lower_solves;
      res.box_solves.insert(res.box_solves.end(), ob.upper_solves.begin(), ob.upper_solves.end());
    } catch (const std::exception& e) {
      throw std::runtime_error(std::string("outer box stage: ") + e.what());
    }
  }
  res.box_seconds = detail::seconds_since(t0);

  std::vector<int> taus = set.taus;
  if (taus.empty()) taus.push_back((p.J.degree() + 1) / 2);
  std::sort(taus.begin(), taus.end());

  ValueApproxOptions vo;
  vo.solver = set.solver;
  for (const auto& [name, iv] : p.bounds)
    if (!p.space->is_theta(p.space->index_of(name))) vo.alpha_bounds[name] = iv;
  if (res.sparse) vo.pattern = p.cliques;

  std::vector<double> values;
  for (int tau : taus) {
    TauRun run;
    run.tau = tau;
    t0 = std::chrono::steady_clock::now();
    try {
      run.approx = approximate_value_function(p.J, p.S, res.theta_box, tau, vo);
    } catch (const std::exception& e) {
      throw std::runtime_error("value function stage (tau = " + std::to_string(tau) + "): " + e.what());
    }
    run.stage1_seconds = detail::seconds_since(t0);
    if (run.approx.status != sdp::Status::optimal)
      res.warnings.push_back("tau " + std::to_string(tau) + ": value function solve ended with status " +
                             sdp::to_string(run.approx.status));

    t0 = std::chrono::steady_clock::now();
    const int tmin = std::max(set.order, std::max(1, (run.approx.polynomial.degree() + 1) / 2));
    int tmax = std::max(tmin, set.max_order);
    const int tcap = set.max_order > 0 ? tmax : tmax + set.escalate;
    auto violation = [](const HierarchyResult& h) {
      return h.minimizer_violations.empty() ? std::numeric_limits<double>::infinity() : h.minimizer_violations.front();
    };
    for (;;) {
      try {
        run.hierarchy =
            minimize_over_outer_set(run.approx.polynomial, p, res.theta_box, tmin, tmax, set.solver, res.sparse);
      } catch (const std::exception& e) {
        throw std::runtime_error("outer minimization stage (tau = " + std::to_string(tau) + "): " + e.what());
      }
      if (violation(run.hierarchy) <= kFeasibilityTolerance || tmax >= tcap) break;
      ++tmax;
    }
    run.stage2_seconds = detail::seconds_since(t0);
    for (const auto& w : run.hierarchy.warnings) res.warnings.push_back("tau " + std::to_string(tau) + ": " + w);
    const auto& x = run.hierarchy.point();
    run.theta.assign(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(p.space->theta_count()));
    run.value = run.approx(run.theta);
    run.residual = violation(run.hierarchy);
    values.push_back(run.value);
    res.runs.push_back(std::move(run));
  }
  // Runs whose point leaves M do not bound the min-max value.
  std::vector<double> admissible = values;
  bool any = false;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (res.runs[k].residual <= kFeasibilityTolerance) {
      any = true;
    } else {
      admissible[k] = std::numeric_limits<double>::infinity();
      res.warnings.push_back("tau " + std::to_string(res.runs[k].tau) + ": estimate outside the outer set, " +
                             "excluded from the running best");
    }
  }
  res.best = running_best(any ? admissible : values);
  res.best_run = res.best.argmin.back();
  const auto& b = res.runs[res.best_run];
  res.estimate = b.theta;
  res.outer_value = b.value;
  res.feasibility_residual = b.residual;
  return res;
}

}  // namespace sosmm
