#include <gtest/gtest.h>

#include <sstream>

#include "sdp_cases.hpp"
#include "sosmm/sdp.hpp"

namespace sosmm::sdp {
namespace {

TEST(SdpSolve, AnalyticSuiteReachesOptimum) {
  for (const auto& c : testing::analytic_suite()) {
    SCOPED_TRACE(c.name);
    const auto sol = solve(c.problem);
    EXPECT_EQ(sol.status, Status::optimal);
    EXPECT_LE(sol.residuals.relative_gap, kOptimalTolerance);
    EXPECT_LE(sol.residuals.primal_feas, kOptimalTolerance);
    EXPECT_LE(sol.residuals.dual_feas, kOptimalTolerance);
    EXPECT_NEAR(sol.primal_objective, c.optimum, 1e-6 * (1.0 + std::abs(c.optimum)));
    EXPECT_LE(sol.iterations, 100);
  }
}

TEST(SdpSolve, TwoByTwoRecoversX) {
  const auto sol = solve(testing::two_by_two_case().problem);
  ASSERT_EQ(sol.status, Status::optimal);
  EXPECT_NEAR(sol.primal_blocks[0](0, 0), 1.0, 1e-6);
  EXPECT_NEAR(sol.primal_blocks[0](1, 1), 1.0, 1e-6);
  EXPECT_NEAR(sol.primal_blocks[0](0, 1), 1.0, 1e-6);
}

TEST(SdpSolve, WeakDualityOnEveryCase) {
  for (const auto& c : testing::analytic_suite()) {
    const auto sol = solve(c.problem);
    const double scale = 1.0 + std::abs(sol.primal_objective) + std::abs(sol.dual_objective);
    EXPECT_LE(sol.dual_objective, sol.primal_objective + 1e-6 * scale) << c.name;
  }
}

TEST(SdpSolve, DeterministicAcrossRuns) {
  const auto c = testing::constructed_case(11, {4, 3}, 8, 2);
  const auto a = solve(c.problem);
  const auto b = solve(c.problem);
  EXPECT_EQ(a.status, b.status);
  EXPECT_EQ(a.iterations, b.iterations);
  EXPECT_EQ(a.primal_objective, b.primal_objective);
  EXPECT_EQ(a.dual_objective, b.dual_objective);
}

TEST(SdpSolve, InfeasibleProblemIsFlagged) {
  // x >= 0 (1x1 block) with x = -1.
  Problem p;
  p.block_sizes = {1};
  p.objective_entries = {{0, 0, 0, 1.0}};
  p.constraints.push_back({{{0, 0, 0, 1.0}}, {}, -1.0});
  const auto sol = solve(p);
  EXPECT_NE(sol.status, Status::optimal);
}

TEST(SdpSolve, UnboundedProblemIsFlagged) {
  // min -x over x >= 0 with no constraints binding x: x - s = 0, s >= 0 free growth.
  Problem p;
  p.block_sizes = {1, 1};
  p.objective_entries = {{0, 0, 0, -1.0}};
  p.constraints.push_back({{{0, 0, 0, 1.0}, {1, 0, 0, -1.0}}, {}, 0.0});
  const auto sol = solve(p);
  EXPECT_NE(sol.status, Status::optimal);
}

TEST(SdpProblem, RejectsMalformedInput) {
  Problem p;
  p.block_sizes = {2};
  p.constraints.push_back({{{0, 2, 0, 1.0}}, {}, 0.0});
  EXPECT_THROW(p.validate(), std::invalid_argument);
  Problem q;
  EXPECT_THROW(q.validate(), std::invalid_argument);
}

TEST(SdpTriplets, DumpParsesBackToSameSolution) {
  const auto c = testing::constructed_case(3, {5}, 8, 2);
  std::stringstream ss;
  write_triplets(ss, c.problem);
  const Problem back = read_triplets(ss);
  EXPECT_EQ(back.block_sizes, c.problem.block_sizes);
  EXPECT_EQ(back.constraints.size(), c.problem.constraints.size());
  const auto a = solve(c.problem);
  const auto b = solve(back);
  EXPECT_EQ(a.primal_objective, b.primal_objective);
}

}  // namespace
}  // namespace sosmm::sdp
