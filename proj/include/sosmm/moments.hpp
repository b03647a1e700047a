#pragma once

// Moments of the uniform probability measure on a box, the Riesz functional
// and moment / localizing matrices built from a moment sequence.

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sosmm/poly.hpp"

namespace sosmm {

struct Box {
  std::vector<double> lower;
  std::vector<double> upper;

  Box() = default;
  Box(std::vector<double> lo, std::vector<double> hi) : lower(std::move(lo)), upper(std::move(hi)) { validate(); }

  static Box cube(std::size_t n, double lo, double hi) {
    return Box(std::vector<double>(n, lo), std::vector<double>(n, hi));
  }

  std::size_t dim() const { return lower.size(); }
  double center(std::size_t k) const { return 0.5 * (lower[k] + upper[k]); }
  double half_width(std::size_t k) const { return 0.5 * (upper[k] - lower[k]); }
  double volume() const {
    double v = 1.0;
    for (std::size_t k = 0; k < dim(); ++k) v *= upper[k] - lower[k];
    return v;
  }
  bool contains(std::span<const double> x, double slack = 0.0) const {
    for (std::size_t k = 0; k < dim(); ++k)
      if (x[k] < lower[k] - slack || x[k] > upper[k] + slack) return false;
    return true;
  }

  void validate() const {
    if (lower.size() != upper.size()) throw std::invalid_argument("box bounds have different lengths");
    for (std::size_t k = 0; k < lower.size(); ++k)
      if (!(lower[k] < upper[k]))
        throw std::invalid_argument("box edge " + std::to_string(k) + " is empty or degenerate");
  }
};

/// Closed-form moment of the uniform probability measure on `box`:
/// prod_k (u^{b+1} - l^{b+1}) / ((b+1)(u - l)).
inline double box_moment(const Box& box, const ExponentVector& beta) {
  if (beta.size() != box.dim()) throw std::invalid_argument("box_moment: dimension mismatch");
  double m = 1.0;
  for (std::size_t k = 0; k < box.dim(); ++k) {
    const int b = beta[k];
    if (b == 0) continue;
    const double l = box.lower[k], u = box.upper[k];
    m *= (std::pow(u, b + 1) - std::pow(l, b + 1)) / ((b + 1) * (u - l));
  }
  return m;
}

/// A truncated moment sequence indexed by monomials of a variable subset.
class MomentSequence {
 public:
  MomentSequence(SpacePtr space, std::vector<std::size_t> vars, int order)
      : space_(std::move(space)), vars_(std::move(vars)), order_(order) {}

  const SpacePtr& space() const { return space_; }
  const std::vector<std::size_t>& vars() const { return vars_; }
  int order() const { return order_; }
  std::size_t size() const { return values_.size(); }

  void set(const ExponentVector& e, double v) { values_[e] = v; }

  double at(const ExponentVector& e) const {
    auto it = values_.find(e);
    if (it == values_.end()) {
      if (e.degree() > order_) throw std::out_of_range("moment degree exceeds sequence order");
      throw std::out_of_range("monomial is outside the support of this moment sequence");
    }
    return it->second;
  }
  bool contains(const ExponentVector& e) const { return values_.count(e) > 0; }

  /// Basis of the sequence's variables up to degree d (graded-lex).
  std::vector<ExponentVector> basis(int d) const { return monomial_basis_on(space_->size(), vars_, d); }

 private:
  SpacePtr space_;
  std::vector<std::size_t> vars_;
  int order_;
  std::unordered_map<ExponentVector, double, ExponentHash> values_;
};

/// Moments gamma_beta of the uniform measure on `box` for every theta-monomial
/// of degree <= order.  The box spans the theta block of `space`.
inline MomentSequence moment_vector(const Box& box, int order, const SpacePtr& space) {
  if (order < 0) throw std::invalid_argument("moment order must be >= 0");
  if (box.dim() != space->theta_count()) throw std::invalid_argument("moment_vector: box does not match theta block");
  std::vector<std::size_t> vars(space->theta_count());
  std::iota(vars.begin(), vars.end(), std::size_t{0});
  MomentSequence z(space, vars, order);
  for (const auto& e : monomial_basis(*space, order, BasisBlock::theta_only)) {
    ExponentVector beta(box.dim());
    for (std::size_t k = 0; k < box.dim(); ++k) beta[k] = e[k];
    z.set(e, box_moment(box, beta));
  }
  return z;
}

inline MomentSequence moment_vector(const Box& box, int order) {
  std::vector<std::string> names;
  for (std::size_t k = 0; k < box.dim(); ++k) names.push_back("t" + std::to_string(k + 1));
  return moment_vector(box, order, VariableSpace::make(std::move(names)));
}

/// L_z(p) = sum_k p_k z_k.
inline double riesz(const MomentSequence& z, const Polynomial& p) {
  if (!same_space(z.space(), p.space())) throw std::invalid_argument("riesz: space mismatch");
  if (p.degree() > z.order()) throw std::invalid_argument("riesz: polynomial degree exceeds moment order");
  double s = 0.0;
  for (const auto& [e, c] : p.terms()) s += c * z.at(e);
  return s;
}

/// M_tau(z): rows/columns indexed by the degree-tau basis, entry z_{b+n}.
inline Eigen::MatrixXd moment_matrix(const MomentSequence& z, int tau) {
  if (2 * tau > z.order()) throw std::invalid_argument("moment_matrix: order exceeds sequence");
  const auto basis = z.basis(tau);
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) m(i, j) = m(j, i) = z.at(basis[i] + basis[j]);
  return m;
}

/// M_order(d z): entry L_z(d * x^{b+n}).
inline Eigen::MatrixXd localizing_matrix(const MomentSequence& z, const Polynomial& d, int order) {
  if (!same_space(z.space(), d.space())) throw std::invalid_argument("localizing_matrix: space mismatch");
  if (2 * order + d.degree() > z.order())
    throw std::invalid_argument("localizing_matrix: order exceeds sequence");
  const auto basis = z.basis(order);
  const auto n = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      double s = 0.0;
      const auto bn = basis[i] + basis[j];
      for (const auto& [e, c] : d.terms()) s += c * z.at(e + bn);
      m(i, j) = m(j, i) = s;
    }
  return m;
}

}  // namespace sosmm
