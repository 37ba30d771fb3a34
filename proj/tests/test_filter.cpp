#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <chrono>
#include <complex>
#include <numbers>

#include "faultest/errors.hpp"
#include "faultest/filter.hpp"
#include "faultest/simulation.hpp"
#include "test_support.hpp"

using namespace faultest;

TEST(RecoverGains, IdentityP) {
  std::mt19937_64 rng(1);
  const Mat R = fixtures::random_matrix(3, 2, rng), Q = fixtures::random_matrix(3, 2, rng), J = Mat::Zero(1, 2);
  const auto g = recover_gains(Mat::Identity(3, 3), R, Q, J);
  EXPECT_LT((g.E - R).norm(), 1e-15);
  EXPECT_LT((g.K - Q).norm(), 1e-15);
  EXPECT_EQ(g.J, J);
}

TEST(RecoverGains, ScaledP) {
  const Mat R = (Mat(2, 1) << 2, 0).finished();
  const auto g = recover_gains(2 * Mat::Identity(2, 2), R, R, Mat::Zero(0, 1));
  EXPECT_LT((g.E - R / 2).norm(), 1e-15);
}

TEST(RecoverGains, ResidualOnRandomSpd) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat P = fixtures::random_spd(5, rng), R = fixtures::random_matrix(5, 2, rng);
    const auto g = recover_gains(P, R, R, Mat::Zero(1, 2));
    EXPECT_LT((P * g.E - R).norm(), 1e-10 * R.norm());
  }
}

TEST(RecoverGains, IllConditioned) {
  Mat P = Mat::Identity(2, 2);
  P(1, 1) = 1e-13;
  EXPECT_THROW(recover_gains(P, Mat::Ones(2, 1), Mat::Ones(2, 1), Mat::Zero(0, 1)), IllConditioned);
}

TEST(RecoverGains, RequiresOptimalResult) {
  SynthesisResult r;
  r.status = SdpStatus::Infeasible;
  EXPECT_THROW(recover_gains(r), Error);
}

TEST(BuildFilter, ZeroEGivesLuenbergerObserver) {
  const auto aug = fixtures::benchmark_aug();
  std::mt19937_64 rng(3);
  const ObserverGains g{Mat::Zero(5, 2), fixtures::random_matrix(5, 2, rng), Mat::Zero(1, 2)};
  const auto fr = build_filter(aug, g);
  EXPECT_TRUE(fr.M.isIdentity());
  EXPECT_LT((fr.N - (aug.A_a - g.K * aug.C_a)).norm(), 1e-14);
  EXPECT_LT((fr.L - g.K).norm(), 1e-14);
  EXPECT_LT((fr.G - aug.B_ua).norm(), 1e-14);
}

TEST(BuildFilter, IdentitiesOnToyChain) {
  const auto aug = augment(fixtures::toy_chain_plant(), UncertaintyModel::none(), 1);
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const ObserverGains g{fixtures::random_matrix(3, 1, rng), fixtures::random_matrix(3, 1, rng), Mat::Zero(0, 1)};
    const auto fr = build_filter(aug, g);
    EXPECT_LT((fr.N * fr.M + fr.L * aug.C_a - fr.M * aug.A_a).norm(), 1e-12);
  }
}

TEST(BuildFilter, IdentitiesOnThousandRandomDraws) {
  const auto aug = fixtures::benchmark_aug();
  std::mt19937_64 rng(5);
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ObserverGains g{fixtures::random_matrix(5, 2, rng, 10.0), fixtures::random_matrix(5, 2, rng, 10.0),
                          fixtures::random_matrix(1, 2, rng)};
    worst = std::max(worst, build_filter(aug, g).residuals().max());
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(worst, 1e-10);
  EXPECT_LT(seconds, 1.0);
}

TEST(BuildFilter, DimensionMismatch) {
  const auto aug = fixtures::benchmark_aug();
  EXPECT_THROW(build_filter(aug, {Mat::Zero(4, 2), Mat::Zero(5, 2), Mat::Zero(1, 2)}), DimensionMismatch);
  EXPECT_THROW(build_filter(aug, {Mat::Zero(5, 2), Mat::Zero(5, 3), Mat::Zero(1, 2)}), DimensionMismatch);
}

TEST(BuildFilter, CertifiedDesignIsHurwitz) {
  const auto& res = fixtures::benchmark_tradeoff_design();
  ASSERT_TRUE(res.optimal());
  const auto fr = build_filter(fixtures::benchmark_aug(), recover_gains(res));
  EXPECT_LT(Eigen::EigenSolver<Mat>(fr.N).eigenvalues().real().maxCoeff(), 0.0);
  const auto layout = make_layout(fr.aug);
  EXPECT_GE(assemble_stability_lmi(fr.aug, layout, res.epsilon).margin(res.solution.x), -1e-7);
}

TEST(FilterRhs, EquilibriumAtZero) {
  const auto aug = augment(fixtures::toy_chain_plant(), UncertaintyModel::none(), 1);
  std::mt19937_64 rng(6);
  const auto fr = build_filter(aug, {fixtures::random_matrix(3, 1, rng), fixtures::random_matrix(3, 1, rng), Mat::Zero(0, 1)});
  EXPECT_EQ(filter_rhs(fr, Vec::Zero(3), Vec::Zero(1), Vec::Zero(1), 0.0).norm(), 0.0);
}

TEST(FilterRhs, BenchmarkInitialEstimate) {
  const auto& res = fixtures::benchmark_tradeoff_design();
  const auto fr = build_filter(fixtures::benchmark_aug(), recover_gains(res));
  const Vec y = Vec::Constant(2, 0.01);
  const auto ev = filter_eval(fr, Vec::Zero(5), fr.aug.build_u_a(Vec::Zero(1), y, 0), y, 0.0);
  EXPECT_LT((ev.xhat + fr.E * y).norm(), 1e-15);
  EXPECT_TRUE(ev.zdot.allFinite());
}

TEST(ExtractFault, SelectorAndCancellation) {
  const auto aug = fixtures::benchmark_aug();
  std::mt19937_64 rng(7);
  const auto fr0 = build_filter(aug, {Mat::Zero(5, 2), fixtures::random_matrix(5, 2, rng), Mat::Zero(1, 2)});
  const Vec z = fixtures::random_matrix(5, 1, rng), y = fixtures::random_matrix(2, 1, rng);
  EXPECT_DOUBLE_EQ(extract_fault(fr0, z, y)(0), z(4));
  const auto fr = build_filter(aug, {fixtures::random_matrix(5, 2, rng), fixtures::random_matrix(5, 2, rng), Mat::Zero(1, 2)});
  EXPECT_LT(extract_fault(fr, fr.E * y, y).norm(), 1e-15);
}

TEST(FilterRhs, LinearFrequencyResponse) {
  // y -> fhat of the linear filter, measured by simulation and compared with
  // Cbar (jwI - N)^-1 L - Cbar E
  const auto aug = augment(fixtures::toy_chain_plant(), UncertaintyModel::none(), 1);
  const Mat E = (Mat(3, 1) << 0.2, -0.1, 0.3).finished();
  const Mat K = (Mat(3, 1) << 3, 4, 2).finished();
  const auto fr = build_filter(aug, {E, K, Mat::Zero(0, 1)});
  ASSERT_LT(Eigen::EigenSolver<Mat>(fr.N).eigenvalues().real().maxCoeff(), 0.0);
  for (double w : {0.3, 1.0, 4.0}) {
    const double period = 2 * std::numbers::pi / w;
    const double h = period / 2000;
    const double t_end = 40 * period;
    const auto tr = integrate_rk4(
        PlainRhs([&](double t, const Vec& z) -> Vec {
          const Vec y = Vec::Constant(1, std::sin(w * t));
          return filter_rhs(fr, z, Vec::Zero(1), y, t);
        }),
        Vec::Zero(3), 0.0, t_end, h);
    // least squares of fhat on (sin, cos) over the last period
    Mat A(2000, 2);
    Vec b(2000);
    for (int k = 0; k < 2000; ++k) {
      const std::size_t idx = tr.t.size() - 2000 + k;
      const double t = tr.t[idx];
      A(k, 0) = std::sin(w * t);
      A(k, 1) = std::cos(w * t);
      b(k) = extract_fault(fr, tr.x[idx], Vec::Constant(1, std::sin(w * t)))(0);
    }
    const Vec coef = A.colPivHouseholderQr().solve(b);
    const std::complex<double> measured(coef(0), coef(1));
    using C = std::complex<double>;
    const Eigen::MatrixXcd H =
        fr.C_bar.cast<C>() * (C(0, w) * Eigen::MatrixXcd::Identity(3, 3) - fr.N.cast<C>()).inverse() *
            fr.L.cast<C>() -
        (fr.C_bar * fr.E).cast<C>();
    EXPECT_LT(std::abs(measured - H(0, 0)), 1e-6 * (1 + std::abs(H(0, 0)))) << "w = " << w;
  }
}

TEST(GainsDocument, RoundTrip) {
  const auto& res = fixtures::benchmark_tradeoff_design();
  const auto fr = build_filter(fixtures::benchmark_aug(), recover_gains(res));
  const auto doc = nlohmann::json::parse(gains_to_json(fr).dump());
  const auto g = gains_from_json(doc);
  EXPECT_EQ(g.E, fr.E);
  EXPECT_EQ(g.K, fr.K);
  EXPECT_EQ(g.J, fr.J);
  EXPECT_TRUE(doc.contains("N") && doc.contains("identity_residuals"));
  EXPECT_THROW(gains_from_json(nlohmann::json::object()), ConfigError);
}
