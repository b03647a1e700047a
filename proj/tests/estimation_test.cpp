#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>

#include "sosmm/estimation.hpp"

namespace sosmm {
namespace {

double theta_coefficient_mass(const SemialgebraicSet& S) {
  double m = 0.0;
  const auto& sp = *S.space();
  auto scan = [&](const Polynomial& p) {
    for (const auto& [e, c] : p.terms())
      for (std::size_t k = 0; k < sp.theta_count(); ++k)
        if (e[k] > 0) m += std::abs(c);
  };
  for (const auto& g : S.inequalities()) scan(g);
  for (const auto& h : S.equalities()) scan(h);
  return m;
}

// ------------------------------------------------------------ generators

TEST(QuantizedArx, GeneratingPointSatisfiesBothCopies) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto inst = simulate_quantized_arx(seed, 20);
    const auto& p = inst.problem;
    EXPECT_LE(p.M.violation(inst.generating_point), 1e-10) << "seed " << seed;
    EXPECT_LE(p.S.violation(inst.generating_point), 1e-10) << "seed " << seed;
    EXPECT_EQ(theta_coefficient_mass(p.S), 0.0);
    EXPECT_TRUE(p.cliques->rip_valid());
    ArxMembership fps(inst.data, Box({-2.0, -2.0}, {2.0, 2.0}));
    EXPECT_TRUE(fps.contains(inst.data.theta_true));
  }
}

TEST(QuantizedArx, HighThresholdGivesOneSidedBitConstraints) {
  ArxOptions opt;
  opt.threshold = 100.0;
  const auto inst = simulate_quantized_arx(4, 12, opt);
  for (double y : inst.data.y) EXPECT_EQ(y, 0.0);
  const auto& sp = inst.problem.space;
  // The first N inequalities are the bit constraints e_t + C >= 0.
  for (std::size_t t = 1; t <= 12; ++t) {
    const auto& g = inst.problem.S.inequalities()[t - 1];
    EXPECT_EQ(g, Polynomial::variable(sp, "e" + std::to_string(t)) + 100.0);
  }
}

TEST(QuantizedArx, RejectsShortHorizon) { EXPECT_THROW(simulate_quantized_arx(1, 1), std::invalid_argument); }

TEST(QuantizedArx, RejectionSampleContainsTruthNeighbourhood) {
  const auto inst = simulate_quantized_arx(1, 20);
  ArxMembership fps(inst.data, Box({-2.0, -2.0}, {2.0, 2.0}));
  CounterRng rng(5);
  std::vector<std::vector<double>> hits;
  for (int i = 0; i < 20000; ++i) {
    std::vector<double> th{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
    if (fps.contains(th)) hits.push_back(th);
  }
  ASSERT_FALSE(hits.empty());
  double nearest = 1e9;
  for (const auto& h : hits) nearest = std::min(nearest, std::hypot(h[0] - 0.6, h[1] - 0.6));
  EXPECT_LT(nearest, 0.1);
}

TEST(MisoStatic, GeneratingPointAndCliques) {
  for (auto subset : {std::vector<int>{1}, std::vector<int>{1, 3}, std::vector<int>{1, 2, 3}}) {
    MisoOptions mo;
    mo.subset = subset;
    const auto inst = simulate_miso_static(2, 10, mo);
    const auto& p = inst.problem;
    EXPECT_LE(p.M.violation(inst.generating_point), 1e-10);
    EXPECT_LE(p.S.violation(inst.generating_point), 1e-10);
    EXPECT_EQ(theta_coefficient_mass(p.S), 0.0);
    ASSERT_TRUE(p.cliques.has_value());
    EXPECT_TRUE(p.cliques->rip_valid());
    std::vector<double> th(inst.generating_point.begin(), inst.generating_point.begin() + subset.size());
    EXPECT_EQ(MisoOracle(inst.data).residual(th), 0.0);
  }
}

TEST(MisoStatic, FullModelCliquesSatisfyRip) {
  MisoOptions mo;
  mo.subset = {1, 2, 3, 4, 5, 6};
  const auto inst = simulate_miso_static(1, 5, mo);
  EXPECT_TRUE(verify_rip(inst.problem.cliques->cliques()).valid);
  EXPECT_TRUE(inst.problem.cliques->rip_valid());
}

TEST(MisoStatic, InvalidSubsetsThrow) {
  MisoOptions mo;
  mo.subset = {7};
  EXPECT_THROW(simulate_miso_static(1, 5, mo), std::invalid_argument);
  mo.subset = {2};  // th2 only appears with th1
  EXPECT_THROW(simulate_miso_static(1, 5, mo), std::invalid_argument);
  mo.subset = {1, 1};
  EXPECT_THROW(simulate_miso_static(1, 5, mo), std::invalid_argument);
}

TEST(MisoStatic, NoiselessLeastSquaresRecoversTruth) {
  MisoOptions mo;
  mo.subset = {1, 2, 3};
  mo.dx_bound = 0.0;
  mo.dy_bound = 0.0;
  const auto inst = simulate_miso_static(3, 12, mo);
  const auto& ds = inst.data;
  // y = c1 u1 + c2 u2 + c3 u3 with c = (th1, th1 th2, th3).
  Eigen::MatrixXd A(12, 3);
  Eigen::VectorXd y(12);
  for (std::size_t t = 0; t < 12; ++t) {
    for (int k = 0; k < 3; ++k) A(static_cast<Eigen::Index>(t), k) = ds.u[static_cast<std::size_t>(k)][t];
    y(static_cast<Eigen::Index>(t)) = ds.y[t];
  }
  const Eigen::VectorXd c = A.colPivHouseholderQr().solve(y);
  EXPECT_NEAR(c(0), 1.0, 1e-8);
  EXPECT_NEAR(c(1) / c(0), 0.6, 1e-8);
  EXPECT_NEAR(c(2), -0.5, 1e-8);
  EXPECT_LE(inst.problem.M.violation(inst.generating_point), 1e-12);
}

TEST(Generators, AreDeterministicPerSeed) {
  const auto a = simulate_quantized_arx(9, 15), b = simulate_quantized_arx(9, 15);
  EXPECT_EQ(a.data.y, b.data.y);
  EXPECT_EQ(a.data.u, b.data.u);
  const auto c = simulate_miso_static(9, 6), d = simulate_miso_static(9, 6);
  EXPECT_EQ(c.data.u, d.data.u);
  EXPECT_EQ(c.data.y, d.data.y);
  EXPECT_NE(simulate_miso_static(10, 6).data.y, c.data.y);
}

// -------------------------------------------------------------- builders

TEST(BuildConditionalCenter, DimensionMismatchThrows) {
  const auto sp = VariableSpace::make({"t1", "t2"}, {"n1"});
  SemialgebraicSet D(sp);
  EXPECT_THROW(build_conditional_center(sp, {"n1"}, D, D), std::invalid_argument);
}

TEST(BuildConditionalCenter, IntervalCenter) {
  const auto sp = VariableSpace::make({"t"}, {"nu"});
  const auto nu = Polynomial::variable(sp, "nu");
  const auto p = build_conditional_center(sp, {"nu"}, SemialgebraicSet(sp, {nu * (1.0 - nu)}, {}),
                                          SemialgebraicSet::entire(sp), {{"nu", {0.0, 1.0}}});
  EXPECT_EQ(theta_coefficient_mass(p.S), 0.0);
  TwoStageSettings s;
  s.taus = {1, 2, 3};
  s.theta_box = Box({-1.0}, {2.0});
  const auto r = solve_two_stage(p, s);
  EXPECT_NEAR(r.estimate[0], 0.5, 1e-3);
  EXPECT_GE(r.outer_value, 0.25 - 1e-6);
  // Ĵ decreases towards 0.25 along the sweep.
  EXPECT_LT(r.runs[2].value, r.runs[0].value);
}

TEST(BuildConditionalCenter, SinglePointSet) {
  const auto sp = VariableSpace::make({"t"}, {"nu"});
  const auto t = Polynomial::variable(sp, "t"), nu = Polynomial::variable(sp, "nu");
  const auto inside = build_conditional_center(sp, {"nu"}, SemialgebraicSet(sp, {}, {nu - 0.3}),
                                               SemialgebraicSet(sp, {1.0 - t * t}, {}), {{"nu", {-1.0, 1.0}}});
  const auto r = solve_two_stage(inside);
  EXPECT_NEAR(r.estimate[0], 0.3, 1e-4);
  EXPECT_NEAR(r.outer_value, 0.0, 1e-5);
  // Point outside M = [0, 1]: projection onto M.
  const auto outside = build_conditional_center(sp, {"nu"}, SemialgebraicSet(sp, {}, {nu - 1.7}),
                                                SemialgebraicSet(sp, {t * (1.0 - t)}, {}), {{"nu", {-2.0, 2.0}}});
  const auto q = solve_two_stage(outside);
  EXPECT_NEAR(q.estimate[0], 1.0, 1e-4);
  EXPECT_NEAR(q.outer_value, 0.49, 1e-4);
}

TEST(BuildConditionalCenter, QuarticShellCenterIsFeasible) {
  const auto sp = VariableSpace::make({"t"}, {"nu"});
  const auto t = Polynomial::variable(sp, "t"), nu = Polynomial::variable(sp, "nu");
  const SemialgebraicSet D(sp, {0.01 - (nu * nu - 1.0).pow(2)}, {});
  const SemialgebraicSet M(sp, {0.01 - (t * t - 1.0).pow(2)}, {});
  const auto p = build_conditional_center(sp, {"nu"}, D, M, {{"nu", {-1.1, 1.1}}});
  TwoStageSettings s;
  s.taus = {2, 3};
  const auto r = solve_two_stage(p, s);
  EXPECT_LE(r.feasibility_residual, 1e-6);
  EXPECT_LE(M.violation(std::vector<double>{r.estimate[0], 0.0}), 1e-6);
  const auto g = oracle::grid_minmax(p.J, p.M, p.S, r.theta_box, {{"nu", {-1.1, 1.1}}}, 1001, 1001);
  // The set is symmetric, so the grid minimizers come in +- pairs.
  EXPECT_NEAR(std::abs(r.estimate[0]), std::abs(g.theta[0]), 0.05);
  // The unconditional center 0 is not in M.
  EXPECT_GT(M.violation(std::vector<double>{0.0, 0.0}), 1e-3);
}

TEST(BuildRobustProjection, DegeneratesToLeastSquares) {
  const auto sp = VariableSpace::make({"t"}, {"xi"});
  const auto t = Polynomial::variable(sp, "t"), xi = Polynomial::variable(sp, "xi");
  const auto p = build_robust_projection({1.0 - t * (1.0 - xi)}, SemialgebraicSet(sp, {}, {xi}),
                                         SemialgebraicSet(sp, {t * (2.0 - t)}, {}), {{"xi", {-1.0, 1.0}}});
  EXPECT_EQ(p.kind, ProblemKind::robust_projection);
  TwoStageSettings s;
  s.taus = {2};
  const auto r = solve_two_stage(p, s);
  EXPECT_NEAR(r.estimate[0], 1.0, 1e-4);
  EXPECT_NEAR(r.outer_value, 0.0, 1e-6);
}

TEST(BuildRobustProjection, InputNoiseShiftsTowardsOracle) {
  // Inner max (|1 - t| + 0.5 |t|)^2, grid argmin t = 1.  The best degree-2tau
  // polynomial upper bound (an LP over a 4001-point grid) has its minimum at
  // 0.8775 for tau = 3, which is where the two-stage estimate must land.
  const auto sp = VariableSpace::make({"t"}, {"xi"});
  const auto t = Polynomial::variable(sp, "t"), xi = Polynomial::variable(sp, "xi");
  const auto p = build_robust_projection({1.0 - t * (1.0 - xi)}, SemialgebraicSet(sp, {interval_constraint(sp, "xi", -0.5, 0.5)}, {}),
                                         SemialgebraicSet(sp, {t * (2.0 - t)}, {}), {{"xi", {-0.5, 0.5}}});
  TwoStageSettings s;
  s.taus = {2, 3};
  const auto r = solve_two_stage(p, s);
  const auto g = oracle::grid_minmax(p.J, p.M, p.S, Box({0.0}, {2.0}), {{"xi", {-0.5, 0.5}}}, 2001, 101);
  EXPECT_NEAR(g.theta[0], 1.0, 1e-9);
  EXPECT_NEAR(r.estimate[0], 0.8775, 2e-3);
  EXPECT_LT(std::abs(r.runs[1].theta[0] - g.theta[0]), std::abs(r.runs[0].theta[0] - g.theta[0]));
  const double inner = std::pow(std::abs(1.0 - r.estimate[0]) + 0.5 * std::abs(r.estimate[0]), 2);
  EXPECT_GE(r.outer_value, inner - 1e-4);
}

// -------------------------------------------------------------- pipeline

struct ToyMinMax {
  SpacePtr sp = VariableSpace::make({"t"}, {"a"});
  Polynomial t = Polynomial::variable(sp, "t"), a = Polynomial::variable(sp, "a");
  EstimationProblem p;
  ToyMinMax() {
    p.space = sp;
    p.J = (t - a).pow(2);
    p.S = SemialgebraicSet(sp, {1.0 - a * a}, {});
    p.M = SemialgebraicSet(sp, {1.0 - t * t}, {});
    p.bounds = {{"a", {-1.0, 1.0}}};
  }
};

TEST(SolveTwoStage, ToyMinMaxAgainstOracles) {
  ToyMinMax toy;
  TwoStageSettings s;
  s.taus = {1, 2, 3};
  s.order = 2;
  s.theta_box = Box({-1.0}, {1.0});
  const auto r = solve_two_stage(toy.p, s);
  const auto g = oracle::grid_minmax(toy.p.J, toy.p.M, toy.p.S, Box({-1.0}, {1.0}), toy.p.bounds, 101, 101);
  EXPECT_NEAR(g.value, 1.0, 2e-3);
  EXPECT_NEAR(r.estimate[0], g.theta[0], 0.05);
  // Best degree-2tau upper bounds of (1 + |t|)^2 from a grid LP: 1.5772,
  // 1.4045, 1.2931 at t = 0.
  EXPECT_NEAR(r.runs[0].value, 1.5772, 2e-3);
  EXPECT_NEAR(r.runs[1].value, 1.4045, 2e-3);
  EXPECT_NEAR(r.runs[2].value, 1.2931, 2e-3);
  EXPECT_EQ(r.best.values.size(), 3u);
  EXPECT_FALSE(r.degraded());
}

TEST(SolveTwoStage, UpperBoundChain) {
  ToyMinMax toy;
  for (auto taus : {std::vector<int>{1}, std::vector<int>{2, 3}}) {
    TwoStageSettings s;
    s.taus = taus;
    const auto r = solve_two_stage(toy.p, s);
    const auto inner = oracle::grid_max(toy.p.J, r.estimate, toy.p.S, toy.p.bounds, 2001);
    EXPECT_GE(r.outer_value, inner.value - 1e-4);
    for (std::size_t k = 1; k < r.best.values.size(); ++k) EXPECT_LE(r.best.values[k], r.best.values[k - 1]);
  }
}

TEST(SolveTwoStage, OuterBoxStageRunsWhenNoBoxGiven) {
  ToyMinMax toy;
  const auto r = solve_two_stage(toy.p);
  EXPECT_NEAR(r.theta_box.lower[0], -1.0, 5e-3);
  EXPECT_NEAR(r.theta_box.upper[0], 1.0, 5e-3);
  EXPECT_EQ(r.box_solves.size(), 2u);
}

TEST(SolveTwoStage, UnboundedOuterSetIsAttributed) {
  ToyMinMax toy;
  toy.p.M = SemialgebraicSet(toy.sp, {toy.t}, {});
  try {
    solve_two_stage(toy.p);
    FAIL() << "expected a stage error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("outer box stage"), std::string::npos);
  }
}

TEST(SolveTwoStage, MisoSubsetEstimateIsFeasibleAndBounded) {
  MisoOptions mo;
  mo.subset = {1};
  const auto inst = simulate_miso_static(1, 6, mo);
  TwoStageSettings s;
  const auto r = solve_two_stage(inst.problem, s);
  MisoOracle orc(inst.data);
  EXPECT_LE(orc.residual(r.estimate), 1e-6);
  EXPECT_LE(orc.worst_case_loss(r.estimate), r.outer_value + 1e-3);
  // Grid reference for the conditional problem on the feasible interval.
  double best = 1e300;
  for (double th : oracle::node_grid(r.theta_box.lower[0], r.theta_box.upper[0], 4001))
    if (orc.residual(std::vector<double>{th}) == 0.0) best = std::min(best, orc.worst_case_loss(std::vector<double>{th}));
  EXPECT_GE(r.outer_value, best - 1e-6);
  EXPECT_LE(orc.worst_case_loss(r.estimate), best + 0.1 * (1.0 + best));
}

}  // namespace
}  // namespace sosmm
