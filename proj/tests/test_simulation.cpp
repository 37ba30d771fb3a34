#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "faultest/errors.hpp"
#include "faultest/simulation.hpp"
#include "test_support.hpp"

using namespace faultest;
namespace fs = std::filesystem;

namespace {

const AugmentedSystem& toy_aug() {
  static const AugmentedSystem aug = augment(fixtures::toy_chain_plant(), UncertaintyModel::none(), 1);
  return aug;
}

/// Hand-tuned gains for the toy chain: char poly of N is s^3 + 6 s^2 + 11.9 s + 7.5.
const FilterRealization& toy_filter() {
  static const FilterRealization fr = [] {
    const Mat E = (Mat(3, 1) << 0.0, 0.0, 0.1).finished();
    const Mat K = (Mat(3, 1) << 5, 6, 8).finished();
    return build_filter(toy_aug(), {E, K, Mat::Zero(0, 1)});
  }();
  return fr;
}

SimulationOptions options(double horizon, double step = 0.01) {
  SimulationOptions opt;
  opt.horizon = horizon;
  opt.step = step;
  opt.substeps = stable_substeps(toy_filter(), step);
  return opt;
}

SimulationInputs quiet_inputs(const SignalSpec& fault) {
  return {SignalSpec::sinusoid(Vec::Constant(1, 1.0), Vec::Constant(1, 0.5)), fault, SignalSpec::zero(1),
          SignalSpec::zero(1)};
}

double rk4_error(double h) {
  const auto tr = integrate_rk4(PlainRhs([](double, const Vec& x) -> Vec { return -x; }), Vec::Ones(1), 0.0, 1.0, h);
  return std::abs(tr.x.back()(0) - std::exp(-1.0));
}

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("faultest_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Rk4, ExponentialDecay) {
  const auto tr = integrate_rk4(PlainRhs([](double, const Vec& x) -> Vec { return -x; }), Vec::Ones(1), 0.0, 1.0, 0.01);
  ASSERT_EQ(tr.t.size(), 101u);
  EXPECT_NEAR(tr.x.back()(0), std::exp(-1.0), 1e-9);
}

TEST(Rk4, ConstantSolution) {
  const auto tr = integrate_rk4(PlainRhs([](double, const Vec& x) -> Vec { return Vec::Zero(x.size()); }),
                                Vec::Constant(3, 2.5), 0.0, 2.0, 0.1);
  for (const auto& x : tr.x) EXPECT_EQ(x, Vec::Constant(3, 2.5));
}

TEST(Rk4, FourthOrderConvergence) {
  const double ratio = rk4_error(0.1) / rk4_error(0.05);
  EXPECT_GE(ratio, 12.0);
  EXPECT_LE(ratio, 20.0);
}

TEST(Rk4, RejectsNonIntegerStepCount) {
  EXPECT_THROW(rk4_step_count(0.0, 1.0, 0.3), ConfigError);
  EXPECT_THROW(rk4_step_count(0.0, 1.0, 0.0), ConfigError);
  EXPECT_EQ(rk4_step_count(0.0, 1.0, 0.25), 4);
}

TEST(Rk4, NonFiniteStateThrows) {
  EXPECT_THROW(integrate_rk4(PlainRhs([](double, const Vec& x) -> Vec { return x.array().square().matrix() * 1e10; }),
                             Vec::Ones(1), 0.0, 10.0, 0.1),
               NonFiniteState);
}

TEST(Signals, Waveforms) {
  const Signal s(SignalSpec::sinusoid(Vec::Constant(1, 2.0), Vec::Constant(1, 0.5), 1.0), 10.0);
  EXPECT_EQ(s.value(0.5)(0), 0.0);
  EXPECT_NEAR(s.value(1.0 + std::numbers::pi)(0), 2.0, 1e-12);
  EXPECT_NEAR(s.derivative(1.0, 1)->coeff(0), 1.0, 1e-12);
  EXPECT_FALSE(s.identically_zero());

  const Signal poly(SignalSpec::polynomial((Mat(1, 3) << 1, 2, 3).finished()), 10.0);
  EXPECT_DOUBLE_EQ(poly.value(2.0)(0), 1 + 4 + 12);
  EXPECT_DOUBLE_EQ(poly.derivative(2.0, 1)->coeff(0), 2 + 12);
  EXPECT_DOUBLE_EQ(poly.derivative(2.0, 2)->coeff(0), 6);
  EXPECT_DOUBLE_EQ(poly.derivative(2.0, 3)->coeff(0), 0);

  EXPECT_TRUE(Signal(SignalSpec::zero(2), 1.0).identically_zero());
}

TEST(Signals, UniformNoiseIsBoundedHeldAndRepeatable) {
  const auto spec = SignalSpec::uniform_noise(Vec::Constant(2, 0.3), 0.1, 11);
  const Signal a(spec, 5.0), b(spec, 5.0);
  EXPECT_FALSE(a.differentiable());
  EXPECT_FALSE(a.derivative(1.0, 1).has_value());
  for (double t = 0; t < 5.0; t += 0.037) {
    EXPECT_EQ(a.value(t), b.value(t));
    EXPECT_LE(a.value(t).cwiseAbs().maxCoeff(), 0.3);
  }
  EXPECT_EQ(a.value(1.01), a.value(1.09));
}

TEST(Signals, InvalidSpecThrows) {
  auto spec = SignalSpec::sinusoid(Vec::Constant(2, 1.0), Vec::Constant(1, 1.0));
  EXPECT_THROW(spec.validate(), ConfigError);
  EXPECT_THROW(waveform_kind_from_string("square"), ConfigError);
}

TEST(Signals, JsonRoundTrip) {
  const auto spec = SignalSpec::sinusoid(Vec::Constant(1, 0.1), Vec::Constant(1, 0.25), 25.0);
  const auto back = SignalSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
}

TEST(Simulation, ZeroFaultStaysOnInvariantManifold) {
  const auto& fr = toy_filter();
  const auto fault = SignalSpec::zero(1);
  const Vec x0 = (Vec(2) << 0.3, -0.2).finished();
  auto opt = options(20.0);
  const auto tr = simulate(fr, {}, quiet_inputs(fault), x0, manifold_initial_state(fr, x0, fault), opt);
  EXPECT_LT(tr.e.cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Simulation, ConstantFaultEstimatedExactlyAndFromPerturbedStart) {
  const auto& fr = toy_filter();
  ASSERT_LT(Eigen::EigenSolver<Mat>(fr.N).eigenvalues().real().maxCoeff(), 0.0);
  const auto fault = SignalSpec::constant(Vec::Constant(1, 0.4));
  const Vec x0 = Vec::Zero(2);
  auto opt = options(60.0);
  const Vec z0 = manifold_initial_state(fr, x0, fault);
  const auto exact = simulate(fr, {}, quiet_inputs(fault), x0, z0, opt);
  EXPECT_LT(exact.e_f.cwiseAbs().maxCoeff(), 1e-8);
  const auto perturbed = simulate(fr, {}, quiet_inputs(fault), x0, z0 + Vec::Constant(3, 0.5), opt);
  EXPECT_GT(perturbed.e_f.row(0).norm(), 1e-3);
  EXPECT_LT(perturbed.e_f.bottomRows(100).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(Simulation, Deterministic) {
  const auto& fr = toy_filter();
  SimulationInputs in = quiet_inputs(SignalSpec::sinusoid(Vec::Constant(1, 0.1), Vec::Constant(1, 0.3)));
  in.nu = SignalSpec::uniform_noise(Vec::Constant(1, 0.01), 0.01, 5);
  auto opt = options(5.0);
  const auto a = simulate(fr, {}, in, Vec::Zero(2), Vec::Zero(3), opt);
  const auto b = simulate(fr, {}, in, Vec::Zero(2), Vec::Zero(3), opt);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.e_f, b.e_f);
}

TEST(Simulation, TraceConsistency) {
  const auto& fr = toy_filter();
  auto opt = options(10.0);
  const auto tr = simulate(fr, {}, quiet_inputs(SignalSpec::sinusoid(Vec::Constant(1, 0.1), Vec::Constant(1, 0.3))),
                           Vec::Constant(2, 0.1), Vec::Zero(3), opt);
  ASSERT_EQ(tr.samples(), 1001);
  EXPECT_LT((tr.e - (tr.xhat - tr.x_a)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((tr.e_f - tr.e * fr.C_bar.transpose()).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((tr.e_f - (tr.fhat - tr.f)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(tr.omega_a().cols(), fr.aug.dims.n_omega_a());
}

TEST(Simulation, ErrorFollowsLinearErrorDynamics) {
  // without noise and nonlinearity: e' = N e - M B_omega_a omega_a
  const auto& fr = toy_filter();
  SimulationInputs in = quiet_inputs(SignalSpec::sinusoid(Vec::Constant(1, 0.2), Vec::Constant(1, 0.7)));
  in.omega = SignalSpec::sinusoid(Vec::Constant(1, 0.05), Vec::Constant(1, 1.3));
  auto opt = options(10.0, 0.001);
  const auto tr = simulate(fr, {}, in, Vec::Constant(2, 0.1), Vec::Zero(3), opt);
  const Mat wa = tr.omega_a();
  double worst = 0.0;
  for (Eigen::Index k = 1; k + 1 < tr.samples(); k += 37) {
    const Vec de = (tr.e.row(k + 1) - tr.e.row(k - 1)).transpose() / (2 * opt.step);
    const Vec model = fr.N * tr.e.row(k).transpose() - fr.M * fr.aug.B_omega_a * wa.row(k).transpose();
    worst = std::max(worst, (de - model).norm() / (1 + model.norm()));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Simulation, CsvRoundTrip) {
  const auto& fr = toy_filter();
  SimulationInputs in = quiet_inputs(SignalSpec::sinusoid(Vec::Constant(1, 0.1), Vec::Constant(1, 0.3), 1.0));
  in.nu = SignalSpec::uniform_noise(Vec::Constant(1, 0.01), 0.05, 3);
  auto opt = options(2.0);
  opt.scenario_id = "roundtrip";
  const auto tr = simulate(fr, {}, in, Vec::Zero(2), Vec::Zero(3), opt);
  const auto dir = temp_dir("csv");
  const auto csv = (dir / "run.csv").string();
  write_trace_csv(tr, csv);
  write_trace_metadata(tr, trace_metadata_path(csv));
  EXPECT_EQ(trace_metadata_path(csv), (dir / "run.meta.json").string());

  std::ifstream is(csv);
  std::string first;
  std::getline(is, first);
  EXPECT_EQ(first.rfind("# columns:", 0), 0u);

  const auto back = read_trace_csv(csv, trace_metadata_path(csv));
  ASSERT_EQ(back.samples(), tr.samples());
  EXPECT_LT((back.t - tr.t).cwiseAbs().maxCoeff(), 1e-15);
  for (auto [a, b] : {std::pair{&back.x, &tr.x}, {&back.z, &tr.z}, {&back.e_f, &tr.e_f}, {&back.nu, &tr.nu},
                      {&back.f_r, &tr.f_r}})
    EXPECT_LT((*a - *b).cwiseAbs().maxCoeff(), 1e-15 * (1 + b->cwiseAbs().maxCoeff()));
  EXPECT_EQ(back.scenario_id, "roundtrip");
  EXPECT_DOUBLE_EQ(back.step, tr.step);
  EXPECT_EQ(back.breakpoints, tr.breakpoints);
}

TEST(Simulation, StableSubstepsIsSmallestSufficientPowerOfTwo) {
  const auto& fr = toy_filter();
  const double radius = std::max(Eigen::EigenSolver<Mat>(fr.N).eigenvalues().cwiseAbs().maxCoeff(),
                                 Eigen::EigenSolver<Mat>(fr.aug.A_a).eigenvalues().cwiseAbs().maxCoeff());
  for (double step : {0.001, 0.01, 0.1}) {
    const int k = stable_substeps(fr, step);
    EXPECT_EQ(k & (k - 1), 0);
    EXPECT_LE(step / k * radius, 1.0);
    if (k > 1) EXPECT_GT(step / (k / 2) * radius, 1.0);
  }
}
