#pragma once

// Clique patterns for correlatively sparse relaxations: running-intersection
// check, restriction to sub-spaces and constraint-to-clique assignment.

#include <algorithm>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosmm/poly.hpp"

namespace sosmm {

using Clique = std::vector<std::size_t>;  // sorted variable indices

struct RipCheck {
  bool valid = true;
  std::optional<std::size_t> violating_index;  // 0-based position of the first offending clique
};

namespace detail {
inline bool is_subset(const Clique& a, const Clique& b) { return std::includes(b.begin(), b.end(), a.begin(), a.end()); }
inline Clique sorted_unique(Clique c) {
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}
}  // namespace detail

/// I_{k+1} cap (I_1 cup ... cup I_k) must lie inside a single earlier I_s.
inline RipCheck verify_rip(const std::vector<Clique>& cliques) {
  if (cliques.empty()) throw std::invalid_argument("verify_rip: empty clique list");
  std::vector<Clique> sorted;
  for (const auto& c : cliques) sorted.push_back(detail::sorted_unique(c));
  Clique seen = sorted[0];
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    Clique inter;
    std::set_intersection(sorted[k].begin(), sorted[k].end(), seen.begin(), seen.end(), std::back_inserter(inter));
    bool ok = false;
    for (std::size_t s = 0; s < k && !ok; ++s) ok = detail::is_subset(inter, sorted[s]);
    if (!ok) return {false, k};
    Clique merged;
    std::set_union(seen.begin(), seen.end(), sorted[k].begin(), sorted[k].end(), std::back_inserter(merged));
    seen = std::move(merged);
  }
  return {true, std::nullopt};
}

class SparsityPattern {
 public:
  SparsityPattern() = default;
  SparsityPattern(SpacePtr space, std::vector<Clique> cliques) : space_(std::move(space)) {
    for (auto& c : cliques) {
      c = detail::sorted_unique(std::move(c));
      for (auto v : c)
        if (v >= space_->size()) throw std::invalid_argument("clique refers to a variable outside the space");
    }
    cliques_ = std::move(cliques);
  }

  static SparsityPattern from_names(SpacePtr space, const std::vector<std::vector<std::string>>& names) {
    std::vector<Clique> cs;
    for (const auto& group : names) {
      Clique c;
      for (const auto& n : group) c.push_back(space->index_of(n));
      cs.push_back(std::move(c));
    }
    return SparsityPattern(std::move(space), std::move(cs));
  }

  /// One clique holding every variable (the dense relaxation).
  static SparsityPattern dense(SpacePtr space) {
    Clique all(space->size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return SparsityPattern(std::move(space), {all});
  }

  const SpacePtr& space() const { return space_; }
  const std::vector<Clique>& cliques() const { return cliques_; }
  std::size_t size() const { return cliques_.size(); }
  bool rip_valid() const { return rip_valid_; }

  /// Runs verify_rip and checks that the cliques cover every variable.
  RipCheck verify() {
    auto r = verify_rip(cliques_);
    std::vector<bool> covered(space_->size(), false);
    for (const auto& c : cliques_)
      for (auto v : c) covered[v] = true;
    const bool covers = std::all_of(covered.begin(), covered.end(), [](bool b) { return b; });
    rip_valid_ = r.valid && covers;
    return r;
  }

  std::vector<std::vector<std::string>> names() const {
    std::vector<std::vector<std::string>> out;
    for (const auto& c : cliques_) {
      std::vector<std::string> g;
      for (auto v : c) g.push_back(space_->name(v));
      out.push_back(std::move(g));
    }
    return out;
  }

  /// Restricts every clique to the variables of `target` (matched by name),
  /// dropping cliques that become empty or duplicate an earlier one.
  SparsityPattern restrict_to(const SpacePtr& target) const {
    std::vector<Clique> out;
    for (const auto& c : cliques_) {
      Clique r;
      for (auto v : c) {
        const auto& names = target->names();
        auto it = std::find(names.begin(), names.end(), space_->name(v));
        if (it != names.end()) r.push_back(static_cast<std::size_t>(it - names.begin()));
      }
      r = detail::sorted_unique(std::move(r));
      if (r.empty() || std::find(out.begin(), out.end(), r) != out.end()) continue;
      out.push_back(std::move(r));
    }
    SparsityPattern p(target, std::move(out));
    p.rip_valid_ = rip_valid_;
    return p;
  }

  /// Indices of the cliques containing all of `vars`.
  std::vector<std::size_t> covering(const std::vector<std::size_t>& vars) const {
    Clique need = detail::sorted_unique(vars);
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < cliques_.size(); ++k)
      if (detail::is_subset(need, cliques_[k])) out.push_back(k);
    return out;
  }

 private:
  SpacePtr space_;
  std::vector<Clique> cliques_;
  bool rip_valid_ = false;
};

/// Thrown when an objective term or constraint is not inside any clique.
class CoverageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Checks that every term of `p` is supported inside some clique.
inline void require_term_coverage(const Polynomial& p, const SparsityPattern& pat, const std::string& what) {
  for (const auto& [e, c] : p.terms()) {
    if (pat.covering(e.support()).empty())
      throw CoverageError(what + " term " + Polynomial::monomial(p.space(), e, c).to_string() +
                          " is not covered by any clique");
  }
}

}  // namespace sosmm
