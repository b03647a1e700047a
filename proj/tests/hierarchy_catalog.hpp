#pragma once

#include <limits>
#include <string>
#include <vector>

#include "sosmm/oracle.hpp"
#include "sosmm/sets.hpp"

namespace sosmm::testing {

struct CatalogProblem {
  std::string name;
  Polynomial f;
  SemialgebraicSet K;
  double grid_min;  // min of f over a 401-node grid of K; >= true minimum
};

inline double grid_min(const Polynomial& f, const SemialgebraicSet& K, const Box& box) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& p : oracle::tensor_grid(box, 401, false))
    if (K.contains(p, oracle::kMembershipTolerance)) m = std::min(m, f.evaluate(p));
  return m;
}

inline std::vector<CatalogProblem> hierarchy_catalog() {
  std::vector<CatalogProblem> out;
  {
    const auto sp = VariableSpace::make({"t"});
    const auto t = Polynomial::variable(sp, 0);
    SemialgebraicSet K(sp, {4.0 - t * t}, {});
    const auto f = (t * t - 1.0).pow(2) + 0.2 * t;
    out.push_back({"tilted double well", f, K, grid_min(f, K, Box::cube(1, -2.0, 2.0))});
  }
  const auto sp = VariableSpace::make({"x", "y"});
  const auto x = Polynomial::variable(sp, 0), y = Polynomial::variable(sp, 1);
  const Box unit = Box::cube(2, -1.0, 1.0);
  {
    SemialgebraicSet K(sp, {1.0 - x * x, 1.0 - y * y}, {});
    const auto f = x.pow(4) + y.pow(4) - x * x * y * y;
    out.push_back({"quartic on square", f, K, grid_min(f, K, unit)});
  }
  {
    SemialgebraicSet K(sp, {1.0 - x * x - y * y}, {});
    const auto f = -1.0 * x - y;
    out.push_back({"linear on disk", f, K, grid_min(f, K, unit)});
  }
  {
    SemialgebraicSet K(sp, {1.0 - x * x, 1.0 - y * y}, {});
    const auto f = x.pow(3) - x * y + y * y;
    out.push_back({"cubic on square", f, K, grid_min(f, K, unit)});
  }
  {
    SemialgebraicSet K(sp, {1.0 - x * x, 1.0 - y * y, x * x + y * y - 0.25}, {});
    const auto f = (x - 0.2).pow(2) + (y + 0.1).pow(2) - x * y;
    out.push_back({"annulus", f, K, grid_min(f, K, unit)});
  }
  return out;
}

}  // namespace sosmm::testing
