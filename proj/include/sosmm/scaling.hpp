#pragma once

// Per-variable affine maps x = shift + scale * u taking bounded variables to
// [-1, 1], plus polynomial normalization.

#include <span>
#include <stdexcept>
#include <vector>

#include "sosmm/moments.hpp"
#include "sosmm/poly.hpp"
#include "sosmm/sets.hpp"

namespace sosmm {

struct AffineMap {
  std::vector<double> shift;
  std::vector<double> scale;

  static AffineMap identity(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)}; }

  /// Theta variables from `box`, other variables from `bounds` (by name),
  /// everything else left unscaled.
  static AffineMap from_bounds(const VariableSpace& space, const Box* box, const NamedBounds& bounds) {
    AffineMap m = identity(space.size());
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (box && space.is_theta(i)) {
        m.shift[i] = box->center(i);
        m.scale[i] = box->half_width(i);
        continue;
      }
      auto it = bounds.find(space.name(i));
      if (it == bounds.end()) continue;
      m.shift[i] = 0.5 * (it->second.first + it->second.second);
      m.scale[i] = 0.5 * (it->second.second - it->second.first);
    }
    return m;
  }

  /// p(x) -> p(shift + scale * u)
  Polynomial to_scaled(const Polynomial& p) const { return p.affine_substitute(shift, scale); }

  /// q(u) -> q((x - shift) / scale)
  Polynomial from_scaled(const Polynomial& q) const {
    std::vector<double> s(shift.size()), c(shift.size());
    for (std::size_t i = 0; i < shift.size(); ++i) {
      c[i] = 1.0 / scale[i];
      s[i] = -shift[i] / scale[i];
    }
    return q.affine_substitute(s, c);
  }

  std::vector<double> to_original(std::span<const double> u) const {
    std::vector<double> x(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) x[i] = shift[i] + scale[i] * u[i];
    return x;
  }
  std::vector<double> to_unit(std::span<const double> x) const {
    std::vector<double> u(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) u[i] = (x[i] - shift[i]) / scale[i];
    return u;
  }
};

/// Divides p by its largest absolute coefficient; returns the factor used
/// (1 for the zero polynomial).
inline double normalize_in_place(Polynomial& p) {
  const double m = p.max_abs_coefficient();
  if (m == 0.0) return 1.0;
  p *= 1.0 / m;
  return m;
}

}  // namespace sosmm
