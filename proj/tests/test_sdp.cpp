#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <sstream>

#include "faultest/errors.hpp"
#include "faultest/lmi.hpp"
#include "faultest/sdp.hpp"
#include "test_support.hpp"

using namespace faultest;

namespace {

/// min t  s.t.  t I - A >= 0
SdpProblem lambda_max_problem(const Mat& A) {
  SdpProblem p;
  p.num_vars = 1;
  p.c = Vec::Ones(1);
  p.blocks.push_back({"tI-A", -A, {Mat::Identity(A.rows(), A.cols())}});
  return p;
}

SdpProblem two_by_two(bool add_lower_bound) {
  // [[-1, x], [x, -1]] <= 0,  1 - x >= 0,  1 + x >= 0
  SdpProblem p;
  p.num_vars = 1;
  p.c = Vec::Zero(1);
  p.blocks.push_back({"neg", Mat::Identity(2, 2), {(Mat(2, 2) << 0, -1, -1, 0).finished()}});
  p.blocks.push_back({"x<=1", Mat::Ones(1, 1), {-Mat::Ones(1, 1)}});
  p.blocks.push_back({"x>=-1", Mat::Ones(1, 1), {Mat::Ones(1, 1)}});
  if (add_lower_bound) p.blocks.push_back({"x>=2", Mat::Constant(1, 1, -2), {Mat::Ones(1, 1)}});
  return p;
}

}  // namespace

TEST(Sdp, LambdaMaxOfDiagonal) {
  const auto sol = solve(lambda_max_problem((Mat(2, 2) << 1, 0, 0, 2).finished()));
  ASSERT_EQ(sol.status, SdpStatus::Optimal);
  EXPECT_NEAR(sol.x(0), 2.0, 1e-6);
}

TEST(Sdp, LambdaMaxMatchesEigenvalueOracle) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat A = fixtures::random_symmetric(4, rng);
    const auto sol = solve(lambda_max_problem(A));
    ASSERT_EQ(sol.status, SdpStatus::Optimal);
    EXPECT_NEAR(sol.x(0), Eigen::SelfAdjointEigenSolver<Mat>(A).eigenvalues().maxCoeff(), 1e-6);
  }
}

TEST(Sdp, TwoByTwoFeasibility) {
  EXPECT_EQ(solve(two_by_two(false)).status, SdpStatus::Optimal);
  EXPECT_EQ(solve(two_by_two(true)).status, SdpStatus::Infeasible);
}

TEST(Sdp, UnboundedObjective) {
  SdpProblem p;
  p.num_vars = 1;
  p.c = Vec::Ones(1);
  p.blocks.push_back({"x<=1", Mat::Ones(1, 1), {-Mat::Ones(1, 1)}});
  EXPECT_EQ(solve(p).status, SdpStatus::Unbounded);
}

TEST(Sdp, OptimalSolutionsPassIndependentConeCheck) {
  std::mt19937_64 rng(7);
  for (int n : {3, 6}) {
    const auto p = lambda_max_problem(fixtures::random_symmetric(n, rng));
    const auto sol = solve(p);
    ASSERT_EQ(sol.status, SdpStatus::Optimal);
    for (const auto& b : p.blocks) EXPECT_GE(min_eig(b.evaluate(sol.x)), -SolverOptions{}.tol_feas);
    ASSERT_EQ(sol.block_min_eigs.size(), p.blocks.size());
  }
}

TEST(Sdp, WeakDuality) {
  std::mt19937_64 rng(9);
  const SolverOptions opt;
  for (int trial = 0; trial < 5; ++trial) {
    const auto sol = solve(lambda_max_problem(fixtures::random_symmetric(5, rng)));
    ASSERT_EQ(sol.status, SdpStatus::Optimal);
    EXPECT_LE(sol.dual_objective, sol.objective + 10 * opt.tol_gap * (1 + std::abs(sol.objective)));
  }
}

TEST(Sdp, ObjectiveScalingLeavesArgminUnchanged) {
  SynthesisParams p;
  p.mode = SynthesisMode::Tradeoff;
  p.a = 10;
  p.b = 10;
  p.sigma_max = 0.5;
  SdpProblem prob = assemble_synthesis_problem(fixtures::benchmark_aug(), p).to_sdp();
  const auto s1 = solve(prob);
  prob.c *= 7.0;
  const auto s2 = solve(prob);
  ASSERT_EQ(s1.status, SdpStatus::Optimal);
  ASSERT_EQ(s2.status, SdpStatus::Optimal);
  EXPECT_NEAR(s2.objective, 7.0 * s1.objective, 1e-5 * (1 + std::abs(s2.objective)));
}

TEST(MinEig, Examples) {
  EXPECT_DOUBLE_EQ(min_eig((Mat(2, 2) << 3, 0, 0, -1).finished()), -1.0);
  EXPECT_NEAR(min_eig(Mat::Identity(5, 5)), 1.0, 1e-15);
  EXPECT_THROW(min_eig((Mat(2, 2) << 1, 2, 0, 1).finished()), NotSymmetric);
}

TEST(MinEig, MatchesGeneralEigenOracle) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat A = fixtures::random_symmetric(6, rng);
    const double oracle = Eigen::EigenSolver<Mat>(A).eigenvalues().real().minCoeff();
    EXPECT_NEAR(min_eig(A), oracle, 1e-9);
  }
}

TEST(Sdpa, RoundTripPreservesProblemAndSolution) {
  SynthesisParams p;
  p.mode = SynthesisMode::Tradeoff;
  p.a = 10;
  p.b = 10;
  p.sigma_max = 0.5;
  const SdpProblem prob = assemble_synthesis_problem(fixtures::benchmark_aug(), p).to_sdp();
  std::stringstream ss;
  write_sdpa(prob, ss);
  const SdpProblem back = read_sdpa(ss);
  ASSERT_EQ(back.num_vars, prob.num_vars);
  ASSERT_EQ(back.blocks.size(), prob.blocks.size());
  EXPECT_LT((back.c - prob.c).norm(), 1e-15);
  for (std::size_t b = 0; b < prob.blocks.size(); ++b) {
    EXPECT_LT((back.blocks[b].F0 - prob.blocks[b].F0).norm(), 1e-12 * (1 + prob.blocks[b].F0.norm()));
    for (int i = 0; i < prob.num_vars; ++i)
      EXPECT_LT((back.blocks[b].F[i] - prob.blocks[b].F[i]).norm(), 1e-12 * (1 + prob.blocks[b].F[i].norm()));
  }
  const auto s1 = solve(prob), s2 = solve(back);
  EXPECT_NEAR(s1.objective, s2.objective, 1e-8 * (1 + std::abs(s1.objective)));
}

TEST(Sdpa, ReadsHandWrittenFile) {
  // max-eigenvalue problem for diag(1, 3) written by hand; F0 holds the negated constant
  std::stringstream ss(
      "* lambda max\n"
      "1 =mDIM\n"
      "1 =nBLOCK\n"
      "2 =bLOCKsTRUCT\n"
      "{1.0}\n"
      "0 1 1 1 1.0\n"
      "0 1 2 2 3.0\n"
      "1 1 1 1 1.0\n"
      "1 1 2 2 1.0\n");
  const auto p = read_sdpa(ss);
  ASSERT_EQ(p.num_vars, 1);
  const auto sol = solve(p);
  ASSERT_EQ(sol.status, SdpStatus::Optimal);
  EXPECT_NEAR(sol.x(0), 3.0, 1e-6);
}

TEST(Sdpa, MalformedInputThrows) {
  std::stringstream ss("2 =mDIM\nnot-a-number\n");
  EXPECT_THROW(read_sdpa(ss), Error);
}
