#pragma once

// Stage one: a polynomial J~*_tau(theta) of degree 2 tau lying above the
// inner value function max_{alpha in S} J(theta, alpha) on the box R_theta,
// obtained from an SOS program whose objective is the integral of the
// polynomial against the uniform measure on R_theta.

#include <chrono>
#include <cmath>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosmm/assembly.hpp"
#include "sosmm/moments.hpp"
#include "sosmm/poly.hpp"
#include "sosmm/scaling.hpp"
#include "sosmm/sdp.hpp"
#include "sosmm/sets.hpp"
#include "sosmm/sparsity.hpp"

namespace sosmm {

/// Space holding the theta block of `space` and the listed non-theta variables.
inline SpacePtr theta_plus(const VariableSpace& space, const std::vector<std::size_t>& vars) {
  std::vector<std::string> alpha;
  for (auto v : vars)
    if (!space.is_theta(v)) alpha.push_back(space.name(v));
  return VariableSpace::make(space.theta_names(), std::move(alpha));
}

inline int default_tau(const Polynomial& J) { return (J.degree() + 1) / 2 + 1; }

struct ValueApproxOptions {
  std::optional<SparsityPattern> pattern;  // cliques over the space of J; dense if absent
  NamedBounds alpha_bounds;                // used for scaling and as explicit interval constraints
  sdp::Settings solver;
  bool reduce_by_equalities = true;  // drop Gram monomials divisible by equality leading terms
};

struct ValueFunctionApprox {
  int tau = 0;
  Polynomial polynomial;  // over the theta-only space, original coordinates
  double objective_value = 0.0;
  Box box;
  std::vector<std::string> block_labels;
  std::vector<Eigen::MatrixXd> gram;  // certificate in scaled, normalized coordinates
  Eigen::VectorXd free_values;
  double certificate_residual = 0.0;
  double value_scale = 1.0;  // factor dividing J before assembly
  sdp::Status status = sdp::Status::numerical_failure;
  sdp::Residuals residuals;
  int iterations = 0;
  double seconds = 0.0;
  std::size_t rows = 0;
  std::size_t blocks = 0;
  std::size_t cliques = 1;

  double operator()(std::span<const double> theta) const { return polynomial.evaluate(theta); }
};

struct ValueApproxBuild {
  SpacePtr space;  // theta + the alpha variables used by J and S
  AffineMap map;
  double value_scale = 1.0;
  Polynomial scaled_J;  // J(shift + scale u) / value_scale
  std::vector<ExponentVector> theta_basis;
  std::vector<int> lambda_index;
  IdentityAssembler assembler{nullptr};
  sdp::Problem problem;
  std::size_t cliques = 1;
};

namespace detail {

inline std::vector<std::size_t> union_vars(const Polynomial& J, const SemialgebraicSet& S) {
  std::vector<bool> used(J.nvars(), false);
  for (auto v : J.variables_used()) used[v] = true;
  for (auto v : S.variables_used()) used[v] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < used.size(); ++i)
    if (used[i]) out.push_back(i);
  return out;
}

inline std::vector<ExponentVector> clique_basis(const VariableSpace& space, const Clique& c, int degree) {
  return monomial_basis_on(space.size(), c, degree);
}

}  // namespace detail

/// Assembles the stage-one SDP.  With a pattern, multipliers are restricted
/// to cliques; without one, a single clique holds every variable.
inline ValueApproxBuild build_value_approx(const Polynomial& J, const SemialgebraicSet& S, const Box& box, int tau,
                                           const ValueApproxOptions& opt = {}) {
  const auto& full = *J.space();
  if (!same_space(J.space(), S.space())) throw std::invalid_argument("J and S must share a variable space");
  if (box.dim() != full.theta_count()) throw std::invalid_argument("box dimension does not match the theta block");
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (2 * tau < J.degree())
    throw std::invalid_argument("tau too small: 2*tau = " + std::to_string(2 * tau) + " < deg J = " +
                                std::to_string(J.degree()));
  for (const auto& g : S.inequalities())
    if (2 * tau < g.degree()) throw std::invalid_argument("tau too small for inequality " + g.to_string());
  for (const auto& h : S.equalities())
    if (2 * tau < h.degree()) throw std::invalid_argument("tau too small for equality " + h.to_string());

  ValueApproxBuild b;
  b.space = theta_plus(full, detail::union_vars(J, S));
  const auto& sp = *b.space;
  const std::size_t ell = sp.theta_count();
  b.map = AffineMap::from_bounds(sp, &box, opt.alpha_bounds);

  b.scaled_J = b.map.to_scaled(J.remap(b.space));
  b.value_scale = normalize_in_place(b.scaled_J);

  // Constraints in scaled coordinates, normalized.  Interval constraints
  // 1 - u^2 >= 0 are added for every bounded alpha variable.
  struct Ineq {
    Polynomial g;
    std::string label;
    bool replicate;
  };
  std::vector<Ineq> ineqs;
  std::vector<std::pair<Polynomial, std::string>> eqs;
  for (std::size_t k = 0; k < S.inequalities().size(); ++k) {
    Polynomial g = b.map.to_scaled(S.inequalities()[k].remap(b.space));
    if (g.is_zero()) continue;
    normalize_in_place(g);
    ineqs.push_back({std::move(g), "sigma_" + std::to_string(k + 1), false});
  }
  for (std::size_t i = ell; i < sp.size(); ++i)
    if (opt.alpha_bounds.count(sp.name(i))) {
      const auto u = Polynomial::variable(b.space, i);
      ineqs.push_back({1.0 - u * u, "bound_" + sp.name(i), true});
    }
  for (std::size_t k = 0; k < S.equalities().size(); ++k) {
    Polynomial h = b.map.to_scaled(S.equalities()[k].remap(b.space));
    if (h.is_zero()) continue;
    normalize_in_place(h);
    eqs.emplace_back(std::move(h), "eq_" + std::to_string(k + 1));
  }

  SparsityPattern pat = opt.pattern ? opt.pattern->restrict_to(b.space) : SparsityPattern::dense(b.space);
  for (const auto& c : pat.cliques())
    for (std::size_t t = 0; t < ell; ++t)
      if (!std::binary_search(c.begin(), c.end(), t))
        throw CoverageError("every clique must contain all theta variables (missing " + sp.name(t) + ")");
  require_term_coverage(b.scaled_J, pat, "objective");
  b.cliques = pat.size();

  IdentityAssembler& a = b.assembler = IdentityAssembler(b.space);

  // lambda_beta: free, objective gamma_beta of the uniform measure on [-1,1]^ell.
  b.theta_basis = monomial_basis(sp, 2 * tau, BasisBlock::theta_only);
  const Box unit = Box::cube(ell, -1.0, 1.0);
  for (const auto& e : b.theta_basis) {
    ExponentVector beta(ell);
    for (std::size_t k = 0; k < ell; ++k) beta[k] = e[k];
    b.lambda_index.push_back(a.add_free_monomial(e, 1.0, box_moment(unit, beta)));
  }

  std::vector<std::size_t> host;
  std::vector<std::vector<Polynomial>> hosted(pat.size());
  for (const auto& [h, label] : eqs) {
    const auto cover = pat.covering(h.variables_used());
    if (cover.empty()) throw CoverageError("constraint " + label + " (" + h.to_string() + ") is not covered by any clique");
    host.push_back(cover[0]);
    hosted[cover[0]].push_back(h);
  }
  std::vector<std::vector<ExponentVector>> lms(pat.size());
  if (opt.reduce_by_equalities)
    for (std::size_t c = 0; c < pat.size(); ++c) lms[c] = equality_leading_monomials(hosted[c]);
  auto basis = [&](std::size_t c, int d) { return drop_multiples(detail::clique_basis(sp, pat.cliques()[c], d), lms[c]); };

  const auto one = Polynomial::constant(b.space, 1.0);
  for (std::size_t c = 0; c < pat.size(); ++c) a.add_gram("sigma_0[" + std::to_string(c + 1) + "]", one, basis(c, tau), -1.0);

  auto add_localizer = [&](const Polynomial& g, const std::string& label, bool replicate) {
    const auto cover = pat.covering(g.variables_used());
    if (cover.empty()) throw CoverageError("constraint " + label + " (" + g.to_string() + ") is not covered by any clique");
    const int d = tau - (g.degree() + 1) / 2;
    if (d < 0) throw std::invalid_argument("tau too small for constraint " + label);
    const std::size_t n = replicate ? cover.size() : 1;
    for (std::size_t k = 0; k < n; ++k) {
      const std::string l = pat.size() > 1 ? label + "[" + std::to_string(cover[k] + 1) + "]" : label;
      a.add_gram(l, g, basis(cover[k], d), -1.0);
    }
  };
  for (const auto& q : ineqs) add_localizer(q.g, q.label, q.replicate);
  for (std::size_t k = 0; k < ell; ++k) {
    const auto u = Polynomial::variable(b.space, k);
    add_localizer(1.0 - u * u, "psi_" + std::to_string(k + 1), true);
  }
  for (std::size_t k = 0; k < eqs.size(); ++k) {
    const auto& [h, label] = eqs[k];
    a.add_free_polynomial(label, h, detail::clique_basis(sp, pat.cliques()[host[k]], 2 * tau - h.degree()), -1.0);
  }
  a.set_target(b.scaled_J);
  b.problem = a.finish();
  return b;
}

/// Solves the stage-one SDP and maps the polynomial back to original theta.
inline ValueFunctionApprox approximate_value_function(const Polynomial& J, const SemialgebraicSet& S, const Box& box,
                                                      int tau, const ValueApproxOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  ValueApproxBuild b = build_value_approx(J, S, box, tau, opt);
  const auto sol = sdp::solve(b.problem, opt.solver);

  ValueFunctionApprox r;
  r.tau = tau;
  r.box = box;
  r.status = sol.status;
  r.residuals = sol.residuals;
  r.iterations = sol.iterations;
  r.rows = b.problem.constraints.size();
  r.blocks = b.problem.block_sizes.size();
  r.cliques = b.cliques;
  r.value_scale = b.value_scale;
  r.gram = sol.primal_blocks;
  r.free_values = sol.free_values;
  for (const auto& g : b.assembler.grams()) r.block_labels.push_back(g.label);

  // Polynomial in scaled theta, then back to original coordinates.
  const std::size_t ell = b.space->theta_count();
  const auto theta_space = VariableSpace::make(b.space->theta_names());
  Polynomial scaled(theta_space);
  double obj = 0.0;
  const Box unit = Box::cube(ell, -1.0, 1.0);
  for (std::size_t i = 0; i < b.theta_basis.size(); ++i) {
    const double lam = sol.free_values.size() ? sol.free_values(b.lambda_index[i]) : 0.0;
    ExponentVector beta(ell);
    for (std::size_t k = 0; k < ell; ++k) beta[k] = b.theta_basis[i][k];
    scaled.add_term(beta, lam);
    obj += lam * box_moment(unit, beta);
  }
  AffineMap tmap = AffineMap::identity(ell);
  for (std::size_t k = 0; k < ell; ++k) {
    tmap.shift[k] = box.center(k);
    tmap.scale[k] = box.half_width(k);
  }
  r.polynomial = tmap.from_scaled(scaled) * b.value_scale;
  r.objective_value = obj * b.value_scale;

  // Certificate identity: lambda part minus Gram/multiplier part equals J.
  if (sol.free_values.size()) {
    Polynomial lhs = reconstruct_identity(b.assembler, sol.primal_blocks, sol.free_values);
    for (std::size_t i = 0; i < b.theta_basis.size(); ++i)
      lhs.add_term(b.theta_basis[i], sol.free_values(b.lambda_index[i]));
    r.certificate_residual = coefficient_distance(lhs, b.scaled_J) * b.value_scale;
  }
  if (r.status == sdp::Status::optimal && r.certificate_residual > 1e-6 * (1.0 + b.value_scale))
    r.status = sdp::Status::numerical_failure;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

/// Grid estimate of the L1(R_theta, uniform) distance between the
/// approximation and sampled values of the true value function.
inline double l1_gap(const ValueFunctionApprox& approx, const std::vector<std::vector<double>>& points,
                     const std::vector<double>& oracle_values) {
  if (points.size() != oracle_values.size()) throw std::invalid_argument("l1_gap: size mismatch");
  if (points.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < points.size(); ++i) s += std::abs(approx(points[i]) - oracle_values[i]);
  return s / static_cast<double>(points.size());
}

/// CSV surface: theta columns, approximation, oracle (blank when absent).
inline void write_surface_csv(std::ostream& os, const std::vector<std::string>& theta_names,
                              const std::vector<std::vector<double>>& points, const std::vector<double>& approx,
                              const std::vector<double>* oracle = nullptr) {
  for (const auto& n : theta_names) os << n << ',';
  os << "approx,oracle\n";
  os.precision(10);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (double v : points[i]) os << v << ',';
    os << approx[i] << ',';
    if (oracle && i < oracle->size() && std::isfinite((*oracle)[i])) os << (*oracle)[i];
    os << '\n';
  }
}

}  // namespace sosmm
