#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sosmm/oracle.hpp"
#include "sosmm/rng.hpp"
#include "sosmm/value_approx.hpp"

namespace sosmm {
namespace {

struct Toy {
  SpacePtr sp = VariableSpace::make({"t"}, {"a"});
  Polynomial t = Polynomial::variable(sp, 0);
  Polynomial a = Polynomial::variable(sp, 1);
  Polynomial J = (t - a).pow(2);
  SemialgebraicSet S{sp, {1.0 - a * a}, {}};
  Box box = Box::cube(1, -1.0, 1.0);
};

// Analytic inner value: max_{|a| <= 1} (t - a)^2 = (1 + |t|)^2.
double toy_value(double t) { return (1.0 + std::abs(t)) * (1.0 + std::abs(t)); }

TEST(BuildValueApprox, ToyStructureAtTauOne) {
  Toy toy;
  const auto b = build_value_approx(toy.J, toy.S, toy.box, 1);
  EXPECT_EQ(b.problem.free_count, 3);
  ASSERT_EQ(b.problem.block_sizes, (std::vector<int>{3, 1, 1}));
  EXPECT_EQ(b.assembler.grams()[0].basis.size(), 3u);
  // All (t, a) monomials of degree <= 2.
  EXPECT_EQ(b.problem.constraints.size(), 6u);
}

TEST(BuildValueApprox, TauTooSmallThrows) {
  Toy toy;
  EXPECT_THROW(build_value_approx(toy.J.pow(2), toy.S, toy.box, 1), std::invalid_argument);
}

TEST(ApproximateValueFunction, ConstantObjective) {
  Toy toy;
  const auto r = approximate_value_function(Polynomial::constant(toy.sp, 2.5), toy.S, toy.box, 2);
  ASSERT_EQ(r.status, sdp::Status::optimal);
  EXPECT_NEAR(r.objective_value, 2.5, 1e-6);
  EXPECT_NEAR(r.polynomial.coefficient(ExponentVector{0}), 2.5, 1e-5);
  for (const auto& [e, c] : r.polynomial.terms())
    if (e.degree() > 0) EXPECT_NEAR(c, 0.0, 1e-5);
}

TEST(ApproximateValueFunction, ToyUpperBoundAtTauThree) {
  Toy toy;
  const auto r = approximate_value_function(toy.J, toy.S, toy.box, 3);
  ASSERT_EQ(r.status, sdp::Status::optimal);
  double excess = 0.0;
  for (double th : oracle::node_grid(-1.0, 1.0, 101)) {
    const double v = r(std::vector<double>{th});
    EXPECT_GE(v, toy_value(th) - 1e-5) << "theta " << th;
    excess += v - toy_value(th);
  }
  EXPECT_LE(excess / 101.0, 0.15);
  EXPECT_GE(r.objective_value, 7.0 / 3.0 - 1e-7);
  EXPECT_LE(r.certificate_residual, 1e-6 * (1.0 + r.value_scale));
  EXPECT_LE(r.polynomial.degree(), 6);
}

TEST(ApproximateValueFunction, L1GapShrinksFromTauOneToThree) {
  Toy toy;
  std::vector<std::vector<double>> pts;
  std::vector<double> truth;
  for (double th : oracle::cell_grid(-1.0, 1.0, 101)) {
    pts.push_back({th});
    truth.push_back(oracle::grid_max(toy.J, pts.back(), toy.S, {{"a", {-1.0, 1.0}}}, 201).value);
  }
  const auto r1 = approximate_value_function(toy.J, toy.S, toy.box, 1);
  const auto r3 = approximate_value_function(toy.J, toy.S, toy.box, 3);
  EXPECT_LT(l1_gap(r3, pts, truth), l1_gap(r1, pts, truth));
}

TEST(ApproximateValueFunction, SampledUpperBoundAndCertificate) {
  Toy toy;
  const auto sp = VariableSpace::make({"t1", "t2"}, {"a1", "a2"});
  const auto t1 = Polynomial::variable(sp, 0), t2 = Polynomial::variable(sp, 1);
  const auto a1 = Polynomial::variable(sp, 2), a2 = Polynomial::variable(sp, 3);
  const auto J = (t1 - a1).pow(2) + (t2 - a2).pow(2) + t1 * a2;
  SemialgebraicSet S(sp, {1.0 - a1 * a1 - a2 * a2}, {});
  const Box box({-1.0, 0.0}, {1.0, 2.0});
  const auto r = approximate_value_function(J, S, box, 2);
  ASSERT_EQ(r.status, sdp::Status::optimal);
  EXPECT_LE(r.certificate_residual, 1e-6 * (1.0 + r.value_scale));
  CounterRng rng(31);
  int checked = 0;
  while (checked < 1000) {
    const std::vector<double> x{rng.uniform(-1.0, 1.0), rng.uniform(0.0, 2.0), rng.uniform(-1.0, 1.0),
                                rng.uniform(-1.0, 1.0)};
    if (!S.contains(x)) continue;
    ++checked;
    const double j = J.evaluate(x);
    EXPECT_GE(r(std::vector<double>{x[0], x[1]}), j - 1e-5 * (1.0 + std::abs(j)));
  }
}

TEST(ApproximateValueFunction, EqualityOnlySet) {
  Toy toy;
  const auto J = toy.t * toy.a + toy.a * toy.a;
  SemialgebraicSet S(toy.sp, {}, {toy.a - toy.t});
  const auto r = approximate_value_function(J, S, toy.box, 2);
  ASSERT_EQ(r.status, sdp::Status::optimal);
  for (double th : oracle::node_grid(-1.0, 1.0, 41)) EXPECT_GE(r(std::vector<double>{th}), 2.0 * th * th - 1e-5);
}

TEST(ApproximateValueFunction, SinglePointInnerSet) {
  Toy toy;
  SemialgebraicSet S(toy.sp, {}, {toy.a});
  const auto r = approximate_value_function(toy.J, S, toy.box, 2);
  ASSERT_EQ(r.status, sdp::Status::optimal);
  for (double th : oracle::node_grid(-1.0, 1.0, 41)) EXPECT_GE(r(std::vector<double>{th}), th * th - 1e-5);
}

TEST(ApproximateValueFunction, ThetaOnlyObjectiveIsTight) {
  Toy toy;
  const auto J = toy.t.pow(4) - toy.t * toy.t + 0.5 * toy.t;
  const Box box({-0.5}, {1.5});
  const auto r = approximate_value_function(J, toy.S, box, 2);
  ASSERT_EQ(r.status, sdp::Status::optimal);
  const double integral = oracle::quadrature_mean(box, 20000, [&](std::span<const double> th) {
    return J.evaluate(std::vector<double>{th[0], 0.0});
  });
  EXPECT_GE(r.objective_value, integral - 1e-6);
  EXPECT_LE(r.objective_value - integral, 1e-6);
}

TEST(ApproximateValueFunction, SingleCliquePatternIsIdenticalToDense) {
  Toy toy;
  ValueApproxOptions opt;
  opt.pattern = SparsityPattern::dense(toy.sp);
  const auto dense = build_value_approx(toy.J, toy.S, toy.box, 2);
  const auto sparse = build_value_approx(toy.J, toy.S, toy.box, 2, opt);
  std::ostringstream a, b;
  sdp::write_triplets(a, dense.problem);
  sdp::write_triplets(b, sparse.problem);
  EXPECT_EQ(a.str(), b.str());
}

TEST(ApproximateValueFunction, SparseCliquesMatchDenseOnSeparableProblem) {
  // J = (t - a1)^2 + (t - a2)^2 with independent boxes on a1, a2.
  const auto sp = VariableSpace::make({"t"}, {"a1", "a2"});
  const auto t = Polynomial::variable(sp, 0), a1 = Polynomial::variable(sp, 1), a2 = Polynomial::variable(sp, 2);
  const auto J = (t - a1).pow(2) + (t - a2).pow(2);
  SemialgebraicSet S(sp, {1.0 - a1 * a1, 1.0 - a2 * a2}, {});
  const Box box = Box::cube(1, -1.0, 1.0);
  ValueApproxOptions opt;
  opt.pattern = SparsityPattern::from_names(sp, {{"t", "a1"}, {"t", "a2"}});
  const auto dense = approximate_value_function(J, S, box, 2);
  const auto sparse = approximate_value_function(J, S, box, 2, opt);
  ASSERT_EQ(dense.status, sdp::Status::optimal);
  ASSERT_EQ(sparse.status, sdp::Status::optimal);
  EXPECT_EQ(sparse.cliques, 2u);
  EXPECT_GE(sparse.objective_value, dense.objective_value - 1e-6);
  EXPECT_NEAR(sparse.objective_value, dense.objective_value, 1e-4);

  opt.pattern = SparsityPattern::from_names(sp, {{"t", "a1"}, {"t", "a2"}});
  const auto Jx = J + a1 * a2;
  EXPECT_THROW(build_value_approx(Jx, S, box, 2, opt), CoverageError);
}

TEST(L1Gap, IdentityAndShift) {
  Toy toy;
  const auto r = approximate_value_function(toy.J, toy.S, toy.box, 2);
  std::vector<std::vector<double>> pts;
  std::vector<double> same, shifted;
  for (double th : oracle::cell_grid(-1.0, 1.0, 51)) {
    pts.push_back({th});
    same.push_back(r(pts.back()));
    shifted.push_back(r(pts.back()) - 0.25);
  }
  EXPECT_DOUBLE_EQ(l1_gap(r, pts, same), 0.0);
  EXPECT_NEAR(l1_gap(r, pts, shifted), 0.25, 1e-12);
}

TEST(SurfaceCsv, HeaderAndRows) {
  std::ostringstream os;
  std::vector<double> oracle_vals{1.5};
  write_surface_csv(os, {"t"}, {{0.5}}, {2.0}, &oracle_vals);
  EXPECT_EQ(os.str(), "t,approx,oracle\n0.5,2,1.5\n");
}

}  // namespace
}  // namespace sosmm
