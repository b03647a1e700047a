#pragma once

// Basic semialgebraic sets {x : g_j(x) >= 0, h_i(x) = 0}.

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosmm/moments.hpp"
#include "sosmm/poly.hpp"

namespace sosmm {

class SemialgebraicSet {
 public:
  SemialgebraicSet() = default;
  explicit SemialgebraicSet(SpacePtr space) : space_(std::move(space)) {}
  SemialgebraicSet(SpacePtr space, std::vector<Polynomial> ineq, std::vector<Polynomial> eq)
      : space_(std::move(space)), ineq_(std::move(ineq)), eq_(std::move(eq)) {
    for (const auto& p : ineq_) check(p);
    for (const auto& p : eq_) check(p);
  }

  /// The whole space: no constraints at all.
  static SemialgebraicSet entire(SpacePtr space) { return SemialgebraicSet(std::move(space)); }

  const SpacePtr& space() const { return space_; }
  const std::vector<Polynomial>& inequalities() const { return ineq_; }
  const std::vector<Polynomial>& equalities() const { return eq_; }
  bool is_entire_space() const { return ineq_.empty() && eq_.empty(); }
  std::size_t constraint_count() const { return ineq_.size() + eq_.size(); }

  void add_inequality(Polynomial g) {
    check(g);
    ineq_.push_back(std::move(g));
  }
  void add_equality(Polynomial h) {
    check(h);
    eq_.push_back(std::move(h));
  }

  int max_degree() const {
    int d = 0;
    for (const auto& p : ineq_) d = std::max(d, p.degree());
    for (const auto& p : eq_) d = std::max(d, p.degree());
    return d;
  }

  std::vector<std::size_t> variables_used() const {
    std::vector<bool> used(space_ ? space_->size() : 0, false);
    auto mark = [&](const Polynomial& p) {
      for (auto v : p.variables_used()) used[v] = true;
    };
    for (const auto& p : ineq_) mark(p);
    for (const auto& p : eq_) mark(p);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < used.size(); ++i)
      if (used[i]) out.push_back(i);
    return out;
  }

  /// max(max_j -g_j(x), max_i |h_i(x)|, 0).
  double violation(std::span<const double> x) const {
    double v = 0.0;
    for (const auto& g : ineq_) v = std::max(v, -g.evaluate(x));
    for (const auto& h : eq_) v = std::max(v, std::abs(h.evaluate(x)));
    return v;
  }
  bool contains(std::span<const double> x, double tol = 1e-9) const { return violation(x) <= tol; }

  /// True if no constraint has a term involving a theta variable.
  bool independent_of_theta() const {
    for (const auto& p : ineq_)
      if (p.depends_on_theta()) return false;
    for (const auto& p : eq_)
      if (p.depends_on_theta()) return false;
    return true;
  }

  SemialgebraicSet remap(const SpacePtr& target) const {
    SemialgebraicSet r(target);
    for (const auto& p : ineq_) r.ineq_.push_back(p.remap(target));
    for (const auto& p : eq_) r.eq_.push_back(p.remap(target));
    return r;
  }

  SemialgebraicSet affine_substitute(std::span<const double> shift, std::span<const double> scale) const {
    SemialgebraicSet r(space_);
    for (const auto& p : ineq_) r.ineq_.push_back(p.affine_substitute(shift, scale));
    for (const auto& p : eq_) r.eq_.push_back(p.affine_substitute(shift, scale));
    return r;
  }

  /// Intersection with another description over the same space.
  SemialgebraicSet intersect(const SemialgebraicSet& o) const {
    if (!same_space(space_, o.space_)) throw std::invalid_argument("intersect: space mismatch");
    SemialgebraicSet r = *this;
    r.ineq_.insert(r.ineq_.end(), o.ineq_.begin(), o.ineq_.end());
    r.eq_.insert(r.eq_.end(), o.eq_.begin(), o.eq_.end());
    return r;
  }

 private:
  void check(const Polynomial& p) const {
    if (!space_) throw std::invalid_argument("semialgebraic set has no variable space");
    if (!same_space(space_, p.space())) throw std::invalid_argument("constraint lives in a different variable space");
  }

  SpacePtr space_;
  std::vector<Polynomial> ineq_;
  std::vector<Polynomial> eq_;
};

/// (hi - x)(x - lo) >= 0 for variable `var`.
inline Polynomial interval_constraint(const SpacePtr& space, std::size_t var, double lo, double hi) {
  const auto x = Polynomial::variable(space, var);
  return (hi - x) * (x - lo);
}

inline Polynomial interval_constraint(const SpacePtr& space, const std::string& var, double lo, double hi) {
  return interval_constraint(space, space->index_of(var), lo, hi);
}

/// A-priori bounds per variable name; variables without an entry are unbounded.
using NamedBounds = std::map<std::string, std::pair<double, double>>;

}  // namespace sosmm
