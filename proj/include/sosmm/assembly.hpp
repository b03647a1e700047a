#pragma once

// Coefficient-matching assembly of polynomial identities
//
//   sum_j s_j w_j(x) (b_j' G_j b_j) + sum_q s_q w_q(x) (c_q' b_q) + sum_k c_k x^{e_k} = target(x)
//
// into an sdp::Problem: one equality row per monomial, one PSD block per Gram
// matrix G_j, one free variable per coefficient c.  Both stages use it.

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "sosmm/poly.hpp"
#include "sosmm/sdp.hpp"

namespace sosmm {

struct GramBlock {
  std::string label;
  Polynomial weight;
  std::vector<ExponentVector> basis;
  double sign = 1.0;
};

struct FreePolynomial {
  std::string label;
  Polynomial weight;
  std::vector<ExponentVector> basis;
  double sign = 1.0;
  int first_free = 0;  // index of the coefficient of basis[0]
};

class IdentityAssembler {
 public:
  explicit IdentityAssembler(SpacePtr space) : space_(std::move(space)) {}

  /// Adds a PSD block; returns its block index.
  int add_gram(std::string label, const Polynomial& weight, std::vector<ExponentVector> basis, double sign) {
    if (basis.empty()) throw std::invalid_argument("gram block '" + label + "' has an empty basis");
    const int blk = static_cast<int>(grams_.size());
    const auto n = basis.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        const ExponentVector bij = basis[i] + basis[j];
        for (const auto& [e, c] : weight.terms())
          block_terms_.push_back({row(bij + e), blk, static_cast<int>(i), static_cast<int>(j), sign * c});
      }
    grams_.push_back({std::move(label), weight, std::move(basis), sign});
    return blk;
  }

  /// Adds a free multiplier polynomial weight * sum_k c_k basis_k; returns its record index.
  int add_free_polynomial(std::string label, const Polynomial& weight, std::vector<ExponentVector> basis,
                          double sign, double objective = 0.0) {
    FreePolynomial fp{std::move(label), weight, std::move(basis), sign, free_count_};
    for (const auto& b : fp.basis) {
      const int k = free_count_++;
      free_obj_.push_back(objective);
      for (const auto& [e, c] : weight.terms()) free_terms_.push_back({row(b + e), k, sign * c});
    }
    frees_.push_back(std::move(fp));
    return static_cast<int>(frees_.size()) - 1;
  }

  /// Adds one free scalar multiplying a single monomial; returns its free index.
  int add_free_monomial(const ExponentVector& e, double coef, double objective) {
    const int k = free_count_++;
    free_obj_.push_back(objective);
    free_terms_.push_back({row(e), k, coef});
    return k;
  }

  void set_target(const Polynomial& target) {
    if (!same_space(space_, target.space())) throw std::invalid_argument("identity target space mismatch");
    target_ = target;
    for (const auto& [e, c] : target.terms()) row(e);
  }

  /// Builds the SDP.  Rows are the touched monomials in graded-lex order.
  sdp::Problem finish() {
    index_rows();
    sdp::Problem p;
    for (const auto& g : grams_) p.block_sizes.push_back(static_cast<int>(g.basis.size()));
    p.free_count = free_count_;
    p.objective_free = free_obj_;
    p.constraints.resize(monomials_.size());
    for (const auto& t : block_terms_)
      p.constraints[static_cast<std::size_t>(order_[static_cast<std::size_t>(t.row)])].entries.push_back(
          {t.block, t.r, t.c, t.value});
    for (const auto& t : free_terms_)
      p.constraints[static_cast<std::size_t>(order_[static_cast<std::size_t>(t.row)])].free_terms.emplace_back(t.k,
                                                                                                               t.value);
    if (target_.space())
      for (const auto& [e, c] : target_.terms()) p.constraints[static_cast<std::size_t>(row_index(e))].rhs = c;
    for (std::size_t i = 0; i < p.constraints.size(); ++i) {
      const auto& con = p.constraints[i];
      if (con.entries.empty() && con.free_terms.empty())
        throw std::invalid_argument("monomial " + Polynomial::monomial(space_, monomials_[i]).to_string() +
                                    " of the target cannot be matched by any multiplier");
    }
    return p;
  }

  /// Row of monomial e in the finished problem.
  int row_index(const ExponentVector& e) const {
    auto it = row_of_.find(e);
    if (it == row_of_.end()) throw std::out_of_range("monomial has no row");
    return order_[static_cast<std::size_t>(it->second)];
  }
  bool has_row(const ExponentVector& e) const { return row_of_.count(e) > 0; }

  /// Monomials in row order (valid after finish()).
  const std::vector<ExponentVector>& monomials() const { return monomials_; }
  const std::vector<GramBlock>& grams() const { return grams_; }
  const std::vector<FreePolynomial>& free_polynomials() const { return frees_; }
  const SpacePtr& space() const { return space_; }
  int free_count() const { return free_count_; }

 private:
  struct BlockTerm {
    int row, block, r, c;
    double value;
  };
  struct FreeTerm {
    int row, k;
    double value;
  };

  int row(const ExponentVector& e) {
    auto [it, inserted] = row_of_.try_emplace(e, static_cast<int>(row_of_.size()));
    return it->second;
  }

  void index_rows() {
    std::map<ExponentVector, int, GradedLexLess> sorted;
    for (const auto& [e, id] : row_of_) sorted.emplace(e, id);
    order_.assign(row_of_.size(), -1);
    monomials_.clear();
    int next = 0;
    for (const auto& [e, id] : sorted) {
      order_[static_cast<std::size_t>(id)] = next++;
      monomials_.push_back(e);
    }
  }

  SpacePtr space_;
  std::unordered_map<ExponentVector, int, ExponentHash> row_of_;  // monomial -> insertion id
  std::vector<int> order_;                                        // insertion id -> final row
  std::vector<ExponentVector> monomials_;
  std::vector<BlockTerm> block_terms_;
  std::vector<FreeTerm> free_terms_;
  std::vector<GramBlock> grams_;
  std::vector<FreePolynomial> frees_;
  std::vector<double> free_obj_;
  int free_count_ = 0;
  Polynomial target_;
};

/// Leading monomials (graded-lex maximum) of the equalities after linear
/// row reduction, so that dependent equalities do not share one.
inline std::vector<ExponentVector> equality_leading_monomials(const std::vector<Polynomial>& hs) {
  std::vector<Polynomial> rows;
  std::vector<ExponentVector> lms;
  for (const auto& h : hs) {
    Polynomial r = h;
    double scale = 0.0;
    for (const auto& [e, c] : r.terms()) scale = std::max(scale, std::abs(c));
    while (true) {
      Polynomial clean(r.space());
      for (const auto& [e, c] : r.terms())
        if (std::abs(c) > 1e-12 * scale) clean.add_term(e, c);
      r = std::move(clean);
      if (r.is_zero()) break;
      const auto lm = r.terms().rbegin()->first;
      std::size_t k = 0;
      while (k < lms.size() && lms[k] != lm) ++k;
      if (k == lms.size()) {
        rows.push_back(r);
        lms.push_back(lm);
        break;
      }
      r -= (r.coefficient(lm) / rows[k].coefficient(lm)) * rows[k];
    }
  }
  return lms;
}

/// Removes basis monomials divisible by any of `lms`.  Modulo the equalities
/// such monomials reduce to the remaining ones, and keeping them makes every
/// feasible moment matrix singular.
inline std::vector<ExponentVector> drop_multiples(std::vector<ExponentVector> basis,
                                                  const std::vector<ExponentVector>& lms) {
  auto divisible = [&](const ExponentVector& b) {
    for (const auto& m : lms) {
      bool div = true;
      for (std::size_t i = 0; i < b.size() && div; ++i) div = b[i] >= m[i];
      if (div) return true;
    }
    return false;
  };
  std::erase_if(basis, divisible);
  return basis;
}

/// Reconstructs sum_j s_j w_j (b' G b) + sum_q s_q w_q (c' b) from a solution.
inline Polynomial reconstruct_identity(const IdentityAssembler& a, const std::vector<Eigen::MatrixXd>& grams,
                                       const Eigen::VectorXd& free_values) {
  Polynomial r(a.space());
  for (std::size_t j = 0; j < a.grams().size(); ++j) {
    const auto& g = a.grams()[j];
    Polynomial q(a.space());
    const auto n = g.basis.size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = i; k < n; ++k) {
        const double v = grams[j](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
        q.add_term(g.basis[i] + g.basis[k], (i == k ? 1.0 : 2.0) * v);
      }
    r += g.sign * (g.weight * q);
  }
  for (const auto& fp : a.free_polynomials()) {
    Polynomial q(a.space());
    for (std::size_t i = 0; i < fp.basis.size(); ++i) q.add_term(fp.basis[i], free_values(fp.first_free + static_cast<int>(i)));
    r += fp.sign * (fp.weight * q);
  }
  return r;
}

}  // namespace sosmm
