#pragma once

// Stage two: moment relaxations (Q_t) for min f(x) s.t. x in K, written in
// their SOS form
//
//   max gamma  s.t.  f - gamma = sigma_0 + sum_j sigma_j g_j + sum_i q_i h_i
//
// so that the dual multipliers of the coefficient rows are (minus) the
// moments z and the dual slack blocks are the moment / localizing matrices.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosmm/assembly.hpp"
#include "sosmm/poly.hpp"
#include "sosmm/rng.hpp"
#include "sosmm/scaling.hpp"
#include "sosmm/sdp.hpp"
#include "sosmm/sets.hpp"
#include "sosmm/sparsity.hpp"

namespace sosmm {

struct MomentOptions {
  std::optional<SparsityPattern> pattern;  // over the space of f; dense if absent
  NamedBounds bounds;                      // explicit interval constraints + scaling
  sdp::Settings solver;
  double rank_tolerance = 1e-6;
  double rank_gap = 100.0;
  bool polish = true;
  std::uint64_t extraction_seed = 7;
  bool reduce_by_equalities = true;  // drop Gram monomials divisible by equality leading terms
};

struct MomentBuild {
  SpacePtr space;
  AffineMap map;
  double f_scale = 1.0;
  int t = 0;
  int relaxation_gap = 1;  // max(1, max_j ceil(deg g_j / 2)) in scaled constraints
  SparsityPattern pattern;
  std::vector<int> moment_block;  // sigma_0 block index per clique
  SemialgebraicSet scaled_set;    // normalized constraints incl. intervals, scaled coordinates
  int gamma_index = 0;
  IdentityAssembler assembler{nullptr};
  sdp::Problem problem;
};

inline int minimal_order(const Polynomial& f, const SemialgebraicSet& K) {
  int t = std::max(1, (f.degree() + 1) / 2);
  for (const auto& g : K.inequalities()) t = std::max(t, (g.degree() + 1) / 2);
  for (const auto& h : K.equalities()) t = std::max(t, (h.degree() + 1) / 2);
  return t;
}

inline MomentBuild build_moment_relaxation(const Polynomial& f, const SemialgebraicSet& K, int t,
                                           const MomentOptions& opt = {}) {
  if (!same_space(f.space(), K.space())) throw std::invalid_argument("objective and set must share a variable space");
  if (t < minimal_order(f, K))
    throw std::invalid_argument("relaxation order t = " + std::to_string(t) + " is below the minimal order " +
                                std::to_string(minimal_order(f, K)));
  MomentBuild b;
  b.space = f.space();
  b.t = t;
  const auto& sp = *b.space;
  b.map = AffineMap::from_bounds(sp, nullptr, opt.bounds);

  Polynomial fs = b.map.to_scaled(f);
  b.f_scale = normalize_in_place(fs);

  b.scaled_set = SemialgebraicSet(b.space);
  std::vector<bool> replicate;
  for (const auto& g0 : K.inequalities()) {
    Polynomial g = b.map.to_scaled(g0);
    if (g.is_zero()) continue;
    normalize_in_place(g);
    b.scaled_set.add_inequality(std::move(g));
    replicate.push_back(false);
  }
  for (std::size_t i = 0; i < sp.size(); ++i)
    if (opt.bounds.count(sp.name(i))) {
      const auto u = Polynomial::variable(b.space, i);
      b.scaled_set.add_inequality(1.0 - u * u);
      replicate.push_back(true);
    }
  for (const auto& h0 : K.equalities()) {
    Polynomial h = b.map.to_scaled(h0);
    if (h.is_zero()) continue;
    normalize_in_place(h);
    b.scaled_set.add_equality(std::move(h));
  }

  b.pattern = opt.pattern ? opt.pattern->restrict_to(b.space) : SparsityPattern::dense(b.space);
  require_term_coverage(fs, b.pattern, "objective");

  IdentityAssembler& a = b.assembler = IdentityAssembler(b.space);
  b.gamma_index = a.add_free_monomial(ExponentVector(sp.size()), 1.0, -1.0);
  const auto one = Polynomial::constant(b.space, 1.0);
  const auto& cl = b.pattern.cliques();

  std::vector<std::size_t> host;
  std::vector<std::vector<Polynomial>> hosted(cl.size());
  for (const auto& h : b.scaled_set.equalities()) {
    const auto cover = b.pattern.covering(h.variables_used());
    if (cover.empty()) throw CoverageError("constraint " + h.to_string() + " is not covered by any clique");
    host.push_back(cover[0]);
    hosted[cover[0]].push_back(h);
  }
  std::vector<std::vector<ExponentVector>> lms(cl.size());
  if (opt.reduce_by_equalities)
    for (std::size_t c = 0; c < cl.size(); ++c) lms[c] = equality_leading_monomials(hosted[c]);
  auto basis = [&](std::size_t c, int d) { return drop_multiples(monomial_basis_on(sp.size(), cl[c], d), lms[c]); };

  for (std::size_t c = 0; c < cl.size(); ++c)
    b.moment_block.push_back(a.add_gram("moment[" + std::to_string(c + 1) + "]", one, basis(c, t), 1.0));

  b.relaxation_gap = 1;
  const auto& ineq = b.scaled_set.inequalities();
  for (std::size_t j = 0; j < ineq.size(); ++j) {
    const auto& g = ineq[j];
    const int r = (g.degree() + 1) / 2;
    b.relaxation_gap = std::max(b.relaxation_gap, r);
    const auto cover = b.pattern.covering(g.variables_used());
    if (cover.empty()) throw CoverageError("constraint " + g.to_string() + " is not covered by any clique");
    const std::size_t n = replicate[j] ? cover.size() : 1;
    for (std::size_t k = 0; k < n; ++k)
      a.add_gram("localizing_" + std::to_string(j + 1) + "[" + std::to_string(cover[k] + 1) + "]", g,
                 basis(cover[k], t - r), 1.0);
  }
  for (std::size_t i = 0; i < b.scaled_set.equalities().size(); ++i) {
    const auto& h = b.scaled_set.equalities()[i];
    b.relaxation_gap = std::max(b.relaxation_gap, (h.degree() + 1) / 2);
    a.add_free_polynomial("equality_" + std::to_string(i + 1), h,
                          monomial_basis_on(sp.size(), cl[host[i]], 2 * t - h.degree()), 1.0);
  }
  a.set_target(fs);
  b.problem = a.finish();
  return b;
}

struct RankInfo {
  int rank = 0;
  bool clear_gap = true;
};

/// Count of eigenvalues above tol * max; when there is no clear gap
/// (ratio > gap) at that position, the largest clear gap above it is used.
inline RankInfo numerical_rank(const Eigen::MatrixXd& m, double tol, double gap) {
  const auto n = m.rows();
  if (n == 0) return {0, true};
  Eigen::VectorXd s = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs();
  std::sort(s.data(), s.data() + n, std::greater<double>());
  if (!(s(0) > 0.0)) return {0, true};
  int r = 0;
  while (r < n && s(r) > tol * s(0)) ++r;
  if (r == n) return {r, true};
  auto ratio = [&](int k) { return s(k - 1) / std::max(s(k), 1e-300); };
  if (ratio(r) > gap) return {r, true};
  for (int k = r - 1; k >= 1; --k)
    if (ratio(k) > gap) return {k, true};
  return {r, false};
}

struct OrderResult {
  int t = 0;
  double lower_bound = 0.0;
  sdp::Status status = sdp::Status::numerical_failure;
  sdp::Residuals residuals;
  int iterations = 0;
  double seconds = 0.0;
  std::size_t rows = 0;
  std::vector<int> ranks;      // rank of M_t per clique
  std::vector<int> ranks_low;  // rank of M_{t-d} per clique
  bool flat = false;
};

struct HierarchyResult {
  SpacePtr space;
  std::vector<OrderResult> orders;
  std::optional<int> flat_at;
  std::vector<std::vector<double>> minimizers;  // original coordinates, sorted by objective
  std::vector<double> minimizer_values;
  std::vector<double> minimizer_violations;
  std::vector<double> first_order_point;
  bool extraction_failed = false;
  std::vector<std::string> warnings;

  std::vector<double> lower_bounds() const {
    std::vector<double> v;
    for (const auto& o : orders) v.push_back(o.lower_bound);
    return v;
  }
  /// Best point found: first minimizer, else the first-order point.
  const std::vector<double>& point() const { return minimizers.empty() ? first_order_point : minimizers.front(); }
};

namespace detail {

inline Polynomial diff(const Polynomial& p, std::size_t var) {
  Polynomial d(p.space());
  for (const auto& [e, c] : p.terms()) {
    if (e[var] == 0) continue;
    ExponentVector ne = e;
    ne[var] -= 1;
    d.add_term(std::move(ne), c * e[var]);
  }
  return d;
}

/// Gauss-Newton (minimum-norm, lightly damped) descent on the violation of
/// the constraints of `set`, in whatever coordinates the set is written.
inline std::vector<double> polish(const SemialgebraicSet& set, std::vector<double> x, int max_iter = 60) {
  const auto n = x.size();
  std::vector<Polynomial> cons;
  std::vector<bool> is_eq;
  for (const auto& g : set.inequalities()) {
    cons.push_back(g);
    is_eq.push_back(false);
  }
  for (const auto& h : set.equalities()) {
    cons.push_back(h);
    is_eq.push_back(true);
  }
  std::vector<std::vector<Polynomial>> grad(cons.size());
  for (std::size_t i = 0; i < cons.size(); ++i)
    for (std::size_t v = 0; v < n; ++v) grad[i].push_back(diff(cons[i], v));

  for (int it = 0; it < max_iter; ++it) {
    std::vector<std::size_t> act;
    std::vector<double> res;
    for (std::size_t i = 0; i < cons.size(); ++i) {
      const double v = cons[i].evaluate(x);
      if (is_eq[i]) {
        act.push_back(i);
        res.push_back(v);
      } else if (v < 1e-13) {  // aim slightly inside
        act.push_back(i);
        res.push_back(v - 1e-12);
      }
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < act.size(); ++k)
      worst = std::max(worst, is_eq[act[k]] ? std::abs(res[k]) : -res[k]);
    if (act.empty() || worst <= 1e-13) break;
    Eigen::MatrixXd Jm(static_cast<Eigen::Index>(act.size()), static_cast<Eigen::Index>(n));
    Eigen::VectorXd r(static_cast<Eigen::Index>(act.size()));
    for (std::size_t k = 0; k < act.size(); ++k) {
      r(static_cast<Eigen::Index>(k)) = res[k];
      for (std::size_t v = 0; v < n; ++v)
        Jm(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(v)) = grad[act[k]][v].evaluate(x);
    }
    Eigen::MatrixXd JJ = Jm * Jm.transpose();
    JJ.diagonal().array() += 1e-12 * (1.0 + JJ.diagonal().maxCoeff());
    const Eigen::VectorXd dx = -Jm.transpose() * JJ.ldlt().solve(r);
    for (std::size_t v = 0; v < n; ++v) x[v] += dx(static_cast<Eigen::Index>(v));
  }
  return x;
}

/// Column-echelon extraction of r atoms from a flat moment matrix.
/// `basis` indexes the rows of `m`; returns points in the same coordinates.
inline std::optional<std::vector<std::vector<double>>> extract_atoms(const Eigen::MatrixXd& m,
                                                                     const std::vector<ExponentVector>& basis,
                                                                     const std::vector<std::size_t>& vars, int rank,
                                                                     std::uint64_t seed) {
  const auto n = m.rows();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::MatrixXd V(n, rank);
  for (int k = 0; k < rank; ++k) {
    const auto col = n - 1 - k;
    V.col(k) = es.eigenvectors().col(col) * std::sqrt(std::max(0.0, es.eigenvalues()(col)));
  }
  // Greedy pivot rows in basis (graded-lex) order.
  std::vector<Eigen::Index> piv;
  Eigen::MatrixXd Q(rank, 0);
  const double vmax = V.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < n && static_cast<int>(piv.size()) < rank; ++i) {
    Eigen::VectorXd row = V.row(i).transpose();
    Eigen::VectorXd resid = row - Q * (Q.transpose() * row);
    if (resid.norm() > 1e-6 * std::max(1.0, vmax)) {
      piv.push_back(i);
      Q.conservativeResize(rank, Q.cols() + 1);
      Q.col(Q.cols() - 1) = resid.normalized();
    }
  }
  if (static_cast<int>(piv.size()) < rank) return std::nullopt;
  Eigen::MatrixXd P(rank, rank);
  for (int k = 0; k < rank; ++k) P.row(k) = V.row(piv[static_cast<std::size_t>(k)]);
  const Eigen::MatrixXd U = V * P.inverse();  // U(piv, :) = I

  auto row_of = [&](const ExponentVector& e) -> Eigen::Index {
    for (std::size_t i = 0; i < basis.size(); ++i)
      if (basis[i] == e) return static_cast<Eigen::Index>(i);
    return -1;
  };
  std::vector<Eigen::MatrixXd> N;
  for (auto v : vars) {
    Eigen::MatrixXd Ni(rank, rank);
    for (int k = 0; k < rank; ++k) {
      ExponentVector e = basis[static_cast<std::size_t>(piv[static_cast<std::size_t>(k)])];
      e[v] += 1;
      const auto r = row_of(e);
      if (r < 0) return std::nullopt;
      Ni.row(k) = U.row(r);
    }
    N.push_back(std::move(Ni));
  }
  CounterRng rng(seed);
  Eigen::MatrixXd comb = Eigen::MatrixXd::Zero(rank, rank);
  double wsum = 0.0;
  std::vector<double> w(vars.size());
  for (auto& x : w) wsum += (x = rng.uniform(0.1, 1.0));
  for (std::size_t i = 0; i < vars.size(); ++i) comb += (w[i] / wsum) * N[i];
  Eigen::RealSchur<Eigen::MatrixXd> schur(comb);
  if (schur.info() != Eigen::Success) return std::nullopt;
  const Eigen::MatrixXd Qs = schur.matrixU();
  std::vector<std::vector<double>> pts;
  for (int j = 0; j < rank; ++j) {
    std::vector<double> p(vars.size());
    for (std::size_t i = 0; i < vars.size(); ++i) p[i] = Qs.col(j).dot(N[i] * Qs.col(j));
    pts.push_back(std::move(p));
  }
  return pts;
}

}  // namespace detail

/// One order of the hierarchy plus rank analysis and candidate points.
struct OrderSolve {
  OrderResult info;
  std::vector<double> moments_first;  // first-order moments, scaled coordinates
  std::vector<std::vector<double>> atoms;  // scaled coordinates (flat, dense or rank-one)
  bool extraction_attempted = false;
  bool extraction_ok = false;
};

inline OrderSolve solve_order(const Polynomial& f, const SemialgebraicSet& K, int t, const MomentOptions& opt,
                              MomentBuild* keep = nullptr) {
  const auto t0 = std::chrono::steady_clock::now();
  MomentBuild b = build_moment_relaxation(f, K, t, opt);
  const auto sol = sdp::solve(b.problem, opt.solver);
  OrderSolve out;
  auto& info = out.info;
  info.t = t;
  info.status = sol.status;
  info.residuals = sol.residuals;
  info.iterations = sol.iterations;
  info.rows = b.problem.constraints.size();
  info.lower_bound = -sol.primal_objective * b.f_scale;

  const auto& sp = *b.space;
  const std::size_t n = sp.size();
  auto z = [&](const ExponentVector& e) {
    return b.assembler.has_row(e) ? -sol.dual_multipliers(b.assembler.row_index(e)) : 0.0;
  };
  out.moments_first.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.moments_first[i] = z(ExponentVector::unit(n, i));

  // Rank analysis per clique: M_t against its leading M_{t-d} block.
  const int d = b.relaxation_gap;
  bool all_flat = true;
  bool all_rank_one = true;
  std::vector<Eigen::MatrixXd> mats;
  for (std::size_t c = 0; c < b.pattern.size(); ++c) {
    const auto& blk = sol.dual_slacks[static_cast<std::size_t>(b.moment_block[c])];
    Eigen::MatrixXd mt = 0.5 * (blk + blk.transpose());
    const auto& mb = b.assembler.grams()[static_cast<std::size_t>(b.moment_block[c])].basis;
    const auto low = static_cast<Eigen::Index>(
        std::count_if(mb.begin(), mb.end(), [&](const ExponentVector& e) { return e.degree() <= t - d; }));
    const auto r_hi = numerical_rank(mt, opt.rank_tolerance, opt.rank_gap);
    const auto r_lo = numerical_rank(mt.topLeftCorner(low, low), opt.rank_tolerance, opt.rank_gap);
    info.ranks.push_back(r_hi.rank);
    info.ranks_low.push_back(r_lo.rank);
    const bool flat = r_hi.clear_gap && r_lo.clear_gap && r_hi.rank == r_lo.rank && t - d >= 0;
    all_flat = all_flat && flat;
    all_rank_one = all_rank_one && flat && r_hi.rank == 1;
    mats.push_back(std::move(mt));
  }
  info.flat = all_flat && sol.status == sdp::Status::optimal;
  if (info.flat) {
    out.extraction_attempted = true;
    if (all_rank_one) {
      out.atoms.push_back(out.moments_first);
      out.extraction_ok = true;
    } else if (b.pattern.size() == 1) {
      std::vector<std::size_t> vars(n);
      for (std::size_t i = 0; i < n; ++i) vars[i] = i;
      const auto& basis = b.assembler.grams()[static_cast<std::size_t>(b.moment_block[0])].basis;
      auto pts = detail::extract_atoms(mats[0], basis, vars, info.ranks[0], opt.extraction_seed);
      if (pts) {
        out.atoms = std::move(*pts);
        out.extraction_ok = true;
      }
    }
  }
  info.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (keep) *keep = std::move(b);
  return out;
}

/// Orders t_min..t_max with early stop at the first flat order.
inline HierarchyResult solve_hierarchy(const Polynomial& f, const SemialgebraicSet& K, int t_min, int t_max,
                                       const MomentOptions& opt = {}) {
  if (t_min < minimal_order(f, K)) t_min = minimal_order(f, K);
  if (t_max < t_min) t_max = t_min;
  HierarchyResult res;
  res.space = f.space();
  OrderSolve last;
  MomentBuild build;
  for (int t = t_min; t <= t_max; ++t) {
    last = solve_order(f, K, t, opt, &build);
    res.orders.push_back(last.info);
    if (last.info.status != sdp::Status::optimal)
      res.warnings.push_back("order " + std::to_string(t) + ": solver status " + sdp::to_string(last.info.status));
    if (last.info.flat) {
      res.flat_at = t;
      break;
    }
  }
  const auto& map = build.map;
  const auto& scaled = build.scaled_set;
  res.first_order_point = map.to_original(last.moments_first);

  std::vector<std::vector<double>> cands = last.atoms;
  if (!last.extraction_ok) {
    if (last.extraction_attempted) {
      res.extraction_failed = true;
      res.warnings.push_back("flat moment matrix but atom extraction failed; using first-order moments");
    } else {
      res.warnings.push_back("rank test not passed up to order " + std::to_string(res.orders.back().t) +
                             "; using first-order moments");
    }
    cands = {last.moments_first};
  }
  struct Cand {
    std::vector<double> x;
    double value, violation;
  };
  std::vector<Cand> pts;
  for (auto& u : cands) {
    if (opt.polish && scaled.violation(u) > 1e-12) u = detail::polish(scaled, u);
    auto x = map.to_original(u);
    pts.push_back({x, f.evaluate(x), K.violation(x)});
  }
  std::stable_sort(pts.begin(), pts.end(), [](const Cand& a, const Cand& b) { return a.value < b.value; });
  for (const auto& p : pts) {
    res.minimizers.push_back(p.x);
    res.minimizer_values.push_back(p.value);
    res.minimizer_violations.push_back(p.violation);
  }
  if (!pts.empty() && pts.front().violation > 1e-6) {
    res.extraction_failed = true;
    res.warnings.push_back("recovered point violates the constraints by " + std::to_string(pts.front().violation));
  }
  return res;
}

struct RunningBest {
  std::vector<double> values;  // J^_tau = min_{k <= tau} J*_k
  std::vector<std::size_t> argmin;  // index k(tau) into the sweep
};

inline RunningBest running_best(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("running_best: empty sweep");
  RunningBest r;
  std::size_t best = 0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (values[k] < values[best]) best = k;
    r.values.push_back(values[best]);
    r.argmin.push_back(best);
  }
  return r;
}

inline void write_bounds_csv(std::ostream& os, const HierarchyResult& h) {
  os << "order,lower_bound,status,rows,iterations,rank,rank_low,flat,seconds\n";
  os.precision(12);
  for (const auto& o : h.orders) {
    int r = 0, rl = 0;
    for (auto x : o.ranks) r = std::max(r, x);
    for (auto x : o.ranks_low) rl = std::max(rl, x);
    os << o.t << ',' << o.lower_bound << ',' << sdp::to_string(o.status) << ',' << o.rows << ',' << o.iterations << ','
       << r << ',' << rl << ',' << (o.flat ? 1 : 0) << ',' << o.seconds << '\n';
  }
}

}  // namespace sosmm
