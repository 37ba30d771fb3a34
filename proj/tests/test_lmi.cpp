#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <complex>

#include "faultest/filter.hpp"
#include "faultest/lmi.hpp"
#include "test_support.hpp"

using namespace faultest;

namespace {

/// Overwrites the matrices of a linear (alpha = 0) system; n_f = rows of c_bar.
AugmentedSystem custom_aug(const Mat& A_a, const Mat& C_a, const Mat& B_omega_a, const Mat& C_bar) {
  AugmentedSystem aug = fixtures::scalar_chain(-1.0);
  const int n_z = static_cast<int>(A_a.rows()), m = static_cast<int>(C_a.rows());
  aug.A_a = A_a;
  aug.C_a = C_a;
  aug.B_omega_a = B_omega_a;
  aug.C_bar = C_bar;
  aug.B_ua = Mat::Zero(n_z, 0);
  aug.S_ga = Mat::Zero(n_z, 0);
  aug.V_ga = Mat::Zero(0, n_z);
  aug.D_nu = Mat::Identity(m, m);
  aug.alpha = 0;
  aug.dims.n_z = n_z;
  aug.dims.m = m;
  aug.dims.m_nu = m;
  aug.dims.n_vga = 0;
  aug.dims.n_ga = 0;
  aug.dims.l_a = 0;
  aug.dims.n_f = static_cast<int>(C_bar.rows());
  aug.dims.n_deta = 0;
  aug.dims.n_omega = static_cast<int>(B_omega_a.cols()) - aug.dims.n_f;
  return aug;
}

SdpStatus feasibility(const AugmentedSystem& aug, const AffineMatrixInequality& lmi, double eps = 1e-6) {
  SynthesisProblem sp;
  sp.layout = make_layout(aug);
  sp.constraints.push_back(lmi);
  BlockLmi pos("P-eps", Sense::PosSemidef, {aug.dims.n_z});
  pos.set(0, 0, AffineExpr::var(VarId::P, sp.layout) - AffineExpr::constant(eps * Mat::Identity(aug.dims.n_z, aug.dims.n_z)));
  sp.constraints.push_back(pos.compile(sp.layout));
  sp.objective = Vec::Zero(sp.layout.size());
  return solve(sp.to_sdp()).status;
}

Vec random_assignment(const VariableLayout& layout, std::mt19937_64& rng) {
  return fixtures::random_matrix(layout.size(), 1, rng);
}

Eigen::VectorXd sorted_eigs(const Mat& M) { return Eigen::SelfAdjointEigenSolver<Mat>(M).eigenvalues(); }

AugmentedSystem benchmark_nonlinear() {
  return augment(build_robot_arm(),
                 UncertaintyModel::nonlinear_state(make_nonlinearity("linear", {{"matrix", matrix_to_json(robot_arm_theta_x())}})),
                 1);
}

}  // namespace

TEST(CoreBlocks, SymmetricPartExample) {
  const auto aug = fixtures::scalar_chain(-2.0);
  const auto layout = make_layout(aug);
  Vec x = Vec::Zero(layout.size());
  layout.set_matrix(VarId::P, Mat::Identity(2, 2), x);
  const auto cb = build_x11_x12(aug, layout);
  EXPECT_EQ(cb.S11.evaluate(layout, x), (Mat(2, 2) << -4, 1, 1, 0).finished());
  EXPECT_EQ(cb.width_g + cb.width_v, 0);
  EXPECT_EQ(cb.X11.evaluate(layout, x), cb.S11.evaluate(layout, x));
}

TEST(CoreBlocks, BenchmarkNonlinearDimensions) {
  const auto aug = benchmark_nonlinear();
  const auto layout = make_layout(aug);
  const auto cb = build_x11_x12(aug, layout);
  EXPECT_EQ(cb.X12_g.rows(), 5);
  EXPECT_EQ(cb.width_g + cb.width_v, 6);
  EXPECT_EQ(assemble_stability_lmi(aug, layout, 1e-6).dim(), 11);
}

TEST(SynthesisProblem, BenchmarkVariableCount) {
  SynthesisParams p;
  p.mode = SynthesisMode::Tradeoff;
  p.sigma_max = 1.0;
  const auto sp = assemble_synthesis_problem(benchmark_nonlinear(), p);
  EXPECT_EQ(sp.num_vars(), 43);
  EXPECT_EQ(sp.layout.block(VarId::P).count, 15);
  EXPECT_EQ(sp.layout.block(VarId::R).count, 10);
  EXPECT_EQ(sp.layout.block(VarId::Q).count, 10);
  EXPECT_EQ(sp.layout.block(VarId::J).count, 6);
}

TEST(SynthesisProblem, ConstraintSetAndSigmaBound) {
  const auto aug = fixtures::benchmark_aug();
  SynthesisParams p;
  p.mode = SynthesisMode::Tradeoff;
  p.sigma_max = 2.0;
  const auto bounded = assemble_synthesis_problem(aug, p);
  EXPECT_EQ(bounded.constraints.size(), 8u);
  p.mode = SynthesisMode::L2;
  p.sigma_max = kUnbounded;
  const auto open = assemble_synthesis_problem(aug, p);
  EXPECT_EQ(open.constraints.size(), 7u);
  p.mode = SynthesisMode::Tradeoff;
  EXPECT_THROW(assemble_synthesis_problem(aug, p), ConfigError);
  p.sigma_max = 1;
  p.a = 0;
  EXPECT_THROW(assemble_synthesis_problem(aug, p), Error);
}

TEST(SynthesisProblem, ModesShareConstraintSkeleton) {
  const auto aug = fixtures::benchmark_aug();
  SynthesisParams p;
  p.sigma_max = 1.0;
  std::vector<std::vector<int>> dims;
  for (auto mode : {SynthesisMode::Tradeoff, SynthesisMode::L2Linf}) {
    p.mode = mode;
    std::vector<int> d;
    for (const auto& c : assemble_synthesis_problem(aug, p).constraints) d.push_back(c.dim());
    dims.push_back(d);
  }
  EXPECT_EQ(dims[0], dims[1]);
}

TEST(Lmi, SymmetricAndAffine) {
  std::mt19937_64 rng(11);
  for (const auto& aug : {fixtures::benchmark_aug(), benchmark_nonlinear(), fixtures::benchmark_aug(2)}) {
    SynthesisParams p;
    p.mode = SynthesisMode::Tradeoff;
    p.sigma_max = 1.0;
    p.a = 0.7;
    p.b = 1.3;
    const auto sp = assemble_synthesis_problem(aug, p);
    for (const auto& lmi : sp.constraints) {
      const Vec v1 = random_assignment(sp.layout, rng), v2 = random_assignment(sp.layout, rng);
      const Mat F1 = lmi.evaluate(v1), F2 = lmi.evaluate(v2), F12 = lmi.evaluate(v1 + v2);
      const double scale = 1.0 + F1.norm() + F2.norm();
      EXPECT_LE((F1 - F1.transpose()).norm(), 1e-12 * scale) << lmi.label;
      EXPECT_LE((F12 - (F1 + F2 - lmi.F0)).norm(), 1e-12 * scale) << lmi.label;
    }
  }
}

TEST(Lmi, CompiledMatchesDirectEvaluation) {
  const auto aug = benchmark_nonlinear();
  const auto layout = make_layout(aug);
  const auto cb = build_x11_x12(aug, layout);
  std::mt19937_64 rng(2);
  const Vec x = random_assignment(layout, rng);
  const Mat P = layout.matrix(VarId::P, x), R = layout.matrix(VarId::R, x), Q = layout.matrix(VarId::Q, x);
  const Mat PR = P + R * aug.C_a;
  const Mat S11 = PR * aug.A_a + (PR * aug.A_a).transpose() - Q * aug.C_a - (Q * aug.C_a).transpose();
  EXPECT_LT((cb.S11.evaluate(layout, x) - S11).norm(), 1e-11 * (1 + S11.norm()));
}

TEST(Lmi, ReducedFormsMatchFullWhenAlphaIsZero) {
  std::mt19937_64 rng(4);
  const auto aug = fixtures::toy_chain_plant();
  const auto a = augment(aug, UncertaintyModel::none(), 1);
  const auto layout = make_layout(a);
  for (int trial = 0; trial < 3; ++trial) {
    const Vec x = random_assignment(layout, rng);
    EXPECT_LT((assemble_stability_lmi(a, layout, 1e-3).evaluate(x) -
               assemble_stability_lmi_reduced(a, layout, 1e-3).evaluate(x)).norm(),
              1e-12);
    // with a = 1 the two L2 forms are congruent through diag(I, -I)
    const Vec l2_full = sorted_eigs(assemble_l2_lmi(a, layout, 1.0).evaluate(x));
    const Vec l2_red = sorted_eigs(assemble_l2_lmi_reduced(a, layout).evaluate(x));
    EXPECT_LT((l2_full - l2_red).norm(), 1e-10 * (1 + l2_red.norm()));
    // with b = 1 and no nonlinearity the two first L2-Linf forms coincide
    const Mat lf = assemble_l2linf_lmis(a, layout, 1.0).first.evaluate(x);
    const Mat lr = assemble_l2linf_first_reduced(a, layout).evaluate(x);
    ASSERT_EQ(lf.rows(), lr.rows());
    EXPECT_LT((lf - lr).norm(), 1e-12 * (1 + lr.norm()));
  }
}

TEST(StabilityLmi, ScalarStableSystemFeasible) {
  const auto aug = custom_aug(Mat::Constant(1, 1, -1), Mat::Ones(1, 1), Mat::Zero(1, 1), Mat::Ones(1, 1));
  const auto layout = make_layout(aug);
  Vec x = Vec::Zero(layout.size());
  layout.set_matrix(VarId::P, Mat::Ones(1, 1), x);
  EXPECT_GE(assemble_stability_lmi(aug, layout, 1e-6).margin(x), 0.0);
  EXPECT_EQ(feasibility(aug, assemble_stability_lmi(aug, layout, 1e-6)), SdpStatus::Optimal);
}

TEST(StabilityLmi, DetectablePairMatchesPolePlacementOracle) {
  const auto aug = fixtures::scalar_chain(-1.0);
  const auto layout = make_layout(aug);
  // K places the eigenvalues of A_a - K C_a at {-1, -2}
  const Mat K = (Mat(2, 1) << 2, 2).finished();
  const Mat Acl = aug.A_a - K * aug.C_a;
  Eigen::EigenSolver<Mat> es(Acl);
  std::vector<double> eig{es.eigenvalues()(0).real(), es.eigenvalues()(1).real()};
  std::sort(eig.begin(), eig.end());
  EXPECT_NEAR(eig[0], -2, 1e-12);
  EXPECT_NEAR(eig[1], -1, 1e-12);
  // P from Acl^T P + P Acl = -I through the Kronecker form
  const Mat I2 = Mat::Identity(2, 2);
  Mat kron = Mat::Zero(4, 4);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      kron.block(2 * i, 2 * j, 2, 2) += Acl.transpose()(i, j) * I2;  // (Acl^T kron I) + (I kron Acl^T) on vec(P)
      kron.block(2 * i, 2 * j, 2, 2) += (i == j ? 1.0 : 0.0) * Acl.transpose();
    }
  const Vec vecP = kron.fullPivLu().solve(-Eigen::Map<const Vec>(I2.data(), 4));
  const Mat P = Eigen::Map<const Mat>(vecP.data(), 2, 2);
  EXPECT_LT((Acl.transpose() * P + P * Acl + I2).norm(), 1e-12);
  Vec x = Vec::Zero(layout.size());
  layout.set_matrix(VarId::P, (P + P.transpose()) / 2, x);
  layout.set_matrix(VarId::Q, P * K, x);
  EXPECT_GT(assemble_stability_lmi(aug, layout, 1e-6).margin(x), 0.0);
  EXPECT_EQ(feasibility(aug, assemble_stability_lmi(aug, layout, 1e-6)), SdpStatus::Optimal);
}

TEST(StabilityLmi, UnobservableInfeasible) {
  const auto aug = custom_aug((Mat(2, 2) << 0, 1, 0, 0).finished(), Mat::Zero(1, 2), (Mat(2, 1) << 0, 1).finished(),
                              (Mat(1, 2) << 0, 1).finished());
  const auto layout = make_layout(aug);
  EXPECT_EQ(feasibility(aug, assemble_stability_lmi(aug, layout, 1e-6)), SdpStatus::Infeasible);
}

TEST(L2Lmi, OptimalRhoMatchesFrequencySweepOracle) {
  const auto aug = fixtures::scalar_chain(-1.0);
  ASSERT_EQ(aug.B_omega_a, (Mat(2, 1) << 0, 1).finished());
  SynthesisParams p;
  p.mode = SynthesisMode::L2;
  p.a = 1.0;
  const auto res = synthesize(aug, p);
  ASSERT_TRUE(res.optimal());
  const auto fr = build_filter(aug, recover_gains(res));
  // e' = N e - M B_omega_a omega_a, e_f = Cbar e
  const Mat B = -fr.M * aug.B_omega_a;
  double peak = 0.0;
  for (int k = 0; k <= 4000; ++k) {
    const double w = std::pow(10.0, -4.0 + 8.0 * k / 4000.0);
    const Eigen::MatrixXcd H = aug.C_bar.cast<std::complex<double>>() *
                               (std::complex<double>(0, w) * Eigen::MatrixXcd::Identity(2, 2) - fr.N.cast<std::complex<double>>())
                                   .inverse() *
                               B.cast<std::complex<double>>();
    peak = std::max(peak, std::norm(H(0, 0)));
  }
  const double dc = std::norm((aug.C_bar * (-fr.N).inverse() * B)(0, 0));
  peak = std::max(peak, dc);
  EXPECT_LE(peak, res.rho * (1 + 1e-6) + 1e-9);
  EXPECT_NEAR(res.rho, peak, 1e-3 * std::max(1.0, peak));
}

TEST(L2Lmi, NoDisturbanceChannelGivesZeroRho) {
  const auto aug = custom_aug((Mat(2, 2) << -1, 1, 0, 0).finished(), (Mat(1, 2) << 1, 0).finished(), Mat::Zero(2, 1),
                              (Mat(1, 2) << 0, 1).finished());
  SynthesisParams p;
  p.mode = SynthesisMode::L2;
  const auto res = synthesize(aug, p);
  ASSERT_TRUE(res.optimal());
  EXPECT_LT(res.rho, 1e-6);
}

TEST(L2LinfLmi, PeakLmiFeasibleIffSigmaAtLeastOne) {
  const auto aug = fixtures::scalar_chain(-1.0);
  const auto layout = make_layout(aug);
  const auto second = assemble_l2linf_lmis(aug, layout, 1.0).second;
  Vec x = Vec::Zero(layout.size());
  layout.set_matrix(VarId::P, Mat::Identity(2, 2), x);
  layout.set_scalar(VarId::Sigma, 1.0, x);
  EXPECT_GE(second.margin(x), -1e-12);
  layout.set_scalar(VarId::Sigma, 0.99, x);
  EXPECT_LT(second.margin(x), 0.0);
  layout.set_scalar(VarId::Sigma, 5.0, x);
  EXPECT_GE(second.margin(x), 0.0);
}

TEST(L2LinfLmi, NoiseFreeSensorsZeroCouplingBlocks) {
  AugmentedSystem aug = fixtures::benchmark_aug();
  aug.D_nu.setZero();
  const auto layout = make_layout(aug);
  std::mt19937_64 rng(8);
  const Vec x = random_assignment(layout, rng);
  const Mat F = assemble_l2linf_lmis(aug, layout, 2.0).first.evaluate(x);
  EXPECT_EQ(F.block(0, 5, 5, 2).norm(), 0.0);
  EXPECT_EQ(F.block(5, 7, 2, 2).norm(), 0.0);
}

TEST(Synthesis, BenchmarkTradeoffPointIsOptimal) {
  const auto& res = fixtures::benchmark_tradeoff_design();
  ASSERT_TRUE(res.optimal());
  EXPECT_TRUE(std::isfinite(res.rho));
  EXPECT_LE(res.sigma, 0.154 * (1 + 1e-7));
  for (const auto& [label, margin] : res.margins) EXPECT_GE(margin, -1e-7) << label;
}

TEST(Synthesis, SigmaBoundMonotone) {
  const auto aug = fixtures::benchmark_aug();
  SynthesisParams p;
  p.mode = SynthesisMode::Tradeoff;
  p.a = 10;
  p.b = 10;
  p.sigma_max = 0.15;
  const double tight = synthesize(aug, p).rho;
  p.sigma_max = 1.0;
  const double loose = synthesize(aug, p).rho;
  EXPECT_LE(loose, tight * (1 + 1e-5));
}

TEST(Synthesis, PeakSigmaMatchesEigenvalueOracle) {
  const auto& res = fixtures::benchmark_tradeoff_design();
  const auto aug = fixtures::benchmark_aug();
  const Mat W = aug.C_bar * res.P.inverse() * aug.C_bar.transpose();
  EXPECT_NEAR(peak_sigma_for(aug, res.P), Eigen::SelfAdjointEigenSolver<Mat>(W).eigenvalues().maxCoeff(), 1e-9);
  EXPECT_LE(peak_sigma_for(aug, res.P), res.sigma * (1 + 1e-6));
}

TEST(LineSearch, SinglePointMatchesDirectSolve) {
  const auto aug = fixtures::benchmark_aug();
  SynthesisParams p;
  p.mode = SynthesisMode::Tradeoff;
  p.sigma_max = 0.154;
  const auto ls = line_search(aug, {10.0}, {10.0}, p);
  EXPECT_EQ(ls.table.size(), 1u);
  EXPECT_NEAR(ls.best.rho, fixtures::benchmark_tradeoff_design().rho, 1e-9 * ls.best.rho);
}

TEST(LineSearch, SkipsInfeasiblePoints) {
  const auto aug = fixtures::benchmark_aug();
  SynthesisParams p;
  p.mode = SynthesisMode::Tradeoff;
  p.sigma_max = 0.154;
  const auto full = line_search(aug, log_grid(1e-2, 1e2, 5), {10.0}, p);
  const LineSearchEntry* bad = nullptr;
  const LineSearchEntry* good = nullptr;
  for (const auto& e : full.table) {
    if (e.status == SdpStatus::Infeasible && !bad) bad = &e;
    if (e.status == SdpStatus::Optimal && !good) good = &e;
  }
  ASSERT_TRUE(bad && good);
  const auto two = line_search(aug, {bad->a, good->a}, {10.0}, p);
  EXPECT_EQ(two.best.params.a, good->a);
  EXPECT_THROW(line_search(aug, {bad->a}, {10.0}, p), AllInfeasible);
}

TEST(LineSearch, LogGrid) {
  const auto g = log_grid(1e-2, 1e2, 5);
  ASSERT_EQ(g.size(), 5u);
  EXPECT_DOUBLE_EQ(g.front(), 1e-2);
  EXPECT_NEAR(g[2], 1.0, 1e-15);
  EXPECT_DOUBLE_EQ(g.back(), 1e2);
}
