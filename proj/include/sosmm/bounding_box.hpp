#pragma once

// Axis-aligned outer box of (the theta projection of) a semialgebraic set:
// lower_k = inf Q_t of theta_k, upper_k = -inf Q_t of -theta_k.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "sosmm/hierarchy.hpp"
#include "sosmm/moments.hpp"
#include "sosmm/sets.hpp"

namespace sosmm {

struct OuterBoxResult {
  Box box;
  std::vector<OrderResult> lower_solves;
  std::vector<OrderResult> upper_solves;
};

class UnboundedCoordinateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// `padding` < 0 selects the default 1e-3 * edge length.
inline OuterBoxResult outer_box_detailed(const SemialgebraicSet& M, int t, double padding = -1.0,
                                         const MomentOptions& opt = {}) {
  const auto& sp = M.space();
  const std::size_t ell = sp->theta_count();
  if (ell == 0) throw std::invalid_argument("outer_box: no theta variables");
  OuterBoxResult r;
  const double huge = 1e8;
  for (std::size_t k = 0; k < ell; ++k) {
    const auto x = Polynomial::variable(sp, k);
    const auto lo = solve_order(x, M, t, opt);
    const auto hi = solve_order(-1.0 * x, M, t, opt);
    r.lower_solves.push_back(lo.info);
    r.upper_solves.push_back(hi.info);
    for (const auto* s : {&lo, &hi})
      if (s->info.status != sdp::Status::optimal)
        throw std::runtime_error("outer_box: relaxation for " + sp->name(k) + " ended with status " +
                                 sdp::to_string(s->info.status));
    const double l = lo.info.lower_bound, u = -hi.info.lower_bound;
    if (!std::isfinite(l) || !std::isfinite(u) || std::abs(l) > huge || std::abs(u) > huge)
      throw UnboundedCoordinateError("outer_box: coordinate " + sp->name(k) + " appears unbounded");
    if (u < l - 1e-6) throw std::runtime_error("outer_box: empty set (bounds cross on " + sp->name(k) + ")");
    const double pad = padding < 0.0 ? 1e-3 * std::max(u - l, 1e-9) : padding;
    r.box.lower.push_back(l - pad);
    r.box.upper.push_back(std::max(u, l) + pad);
  }
  if (padding == 0.0)
    for (std::size_t k = 0; k < ell; ++k)
      if (!(r.box.lower[k] < r.box.upper[k])) r.box.upper[k] = r.box.lower[k] + 1e-12;
  return r;
}

inline Box outer_box(const SemialgebraicSet& M, int t, double padding = -1.0, const MomentOptions& opt = {}) {
  return outer_box_detailed(M, t, padding, opt).box;
}

}  // namespace sosmm
