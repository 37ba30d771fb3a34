// One PASS/FAIL line per acceptance criterion; exit status 1 when any fails.
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>

#include "faultest/errors.hpp"
#include "faultest/robot_arm.hpp"
#include "faultest/scenario.hpp"
#include "faultest/sdp.hpp"

using namespace faultest;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double time_limit, const std::function<Outcome()>& body) {
  const auto start = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (time_limit > 0 && secs > time_limit) {
    out.pass = false;
    out.detail += " [over " + std::to_string(time_limit) + " s]";
  }
  if (!out.pass) ++failures;
  std::printf("%s  %-32s %-70s %8.2f s\n", out.pass ? "PASS" : "FAIL", name.c_str(), out.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Mat gaussian(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat M(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) M(i, j) = n(rng);
  return M;
}

/// The benchmark tradeoff design shared by several criteria.
struct Design {
  ScenarioConfig cfg;
  ScenarioModel sm;
  SynthesisOutcome out;
  FilterRealization fr;
  LyapunovCertificate cert;
};

std::optional<Design> design;

double max_error_after(const SimulationTrace& tr, double from) {
  double m = 0.0;
  for (Eigen::Index k = 0; k < tr.samples(); ++k)
    if (tr.t(k) >= from - 1e-12) m = std::max(m, tr.e_f.row(k).norm());
  return m;
}

/// Exact prior, no disturbance or noise, polynomial fault with zero r-th derivative.
double exact_estimation_error(int r, SynthesisMode mode, bool on_manifold) {
  ScenarioConfig cfg = robot_arm_benchmark(mode);
  cfg.arm.dc = 0.0;
  cfg.r = r;
  if (mode == SynthesisMode::Tradeoff) {
    cfg.a_grid = {10.0};
    cfg.b_grid = {10.0};
    cfg.sigma_max = 0.154;
  }
  cfg.fault = SignalSpec::polynomial(r == 1 ? Mat::Constant(1, 1, 0.05) : (Mat(1, 2) << 0.05, 0.01).finished());
  cfg.omega = SignalSpec::zero(1);
  cfg.noise_fraction = 0.0;
  cfg.z0_on_manifold = on_manifold;
  const auto sm = build_scenario_model(cfg);
  const auto out = synthesize_scenario(cfg, sm);
  const auto fr = build_filter(sm.aug, recover_gains(out.result));
  const auto runs = simulate_scenario(cfg, sm, fr);
  return max_error_after(runs.clean, 50.0);
}

}  // namespace

int main() {
  criterion("filter-identities", 1.0, [] {
    const auto aug = augment(build_robot_arm(), UncertaintyModel::linear_state(robot_arm_theta_x()), 1);
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const ObserverGains g{gaussian(5, 2, rng, 10.0), gaussian(5, 2, rng, 10.0), gaussian(1, 2, rng)};
      worst = std::max(worst, build_filter(aug, g, 1.0).residuals().max());
    }
    return Outcome{worst < 1e-10, fmt("1000 draws, worst residual %.2e", worst)};
  });

  criterion("sdp-lambda-max", 10.0, [] {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> dim(1, 8);
    double worst = 0.0;
    int solved = 0;
    for (int i = 0; i < 50; ++i) {
      const int n = dim(rng);
      const Mat B = gaussian(n, n, rng);
      const Mat A = (B + B.transpose()) / 2;
      SdpProblem p;
      p.num_vars = 1;
      p.c = Vec::Ones(1);
      p.blocks.push_back({"tI-A", -A, {Mat::Identity(n, n)}});
      const auto sol = solve(p);
      if (sol.status != SdpStatus::Optimal) continue;
      ++solved;
      worst = std::max(worst, std::abs(sol.x(0) - Eigen::SelfAdjointEigenSolver<Mat>(A).eigenvalues().maxCoeff()));
    }
    return Outcome{solved == 50 && worst < 1e-6, fmt("%.0f/50 optimal, worst error %.2e", solved, worst)};
  });

  criterion("benchmark-feasibility", 60.0, [] {
    auto cfg = robot_arm_benchmark(SynthesisMode::Tradeoff);
    auto sm = build_scenario_model(cfg);
    auto out = synthesize_scenario(cfg, sm);
    const auto& res = out.result;
    auto fr = build_filter(sm.aug, recover_gains(res));
    const LyapunovCertificate cert{res.P, res.rho, res.params.a, res.alpha};
    const bool hurwitz = Eigen::EigenSolver<Mat>(fr.N).eigenvalues().real().maxCoeff() < 0;
    const bool ok = res.optimal() && std::isfinite(res.rho) && std::isfinite(res.sigma) && hurwitz;
    design.emplace(Design{std::move(cfg), std::move(sm), std::move(out), std::move(fr), cert});
    const auto& r = design->out.result;
    return Outcome{ok, fmt("rho %.5g, sigma %.5g, sigma_max %.4g", r.rho, r.sigma, design->out.sigma_max)};
  });

  criterion("exact-estimation", 0, [] {
    const double r1 = exact_estimation_error(1, SynthesisMode::Tradeoff, true);
    const double r1z = exact_estimation_error(1, SynthesisMode::Tradeoff, false);
    const double r2 = exact_estimation_error(2, SynthesisMode::L2, true);
    const double worst = std::max({r1, r1z, r2});
    return Outcome{worst < 1e-5, fmt("max|e_f| t>=50: r=1 %.1e (z0=0: %.1e), r=2 %.1e", r1, r1z, r2)};
  });

  criterion("l2-ensemble", 120.0, [] {
    if (!design) return Outcome{false, "no design"};
    const auto rep = l2_ensemble(design->cfg, design->sm, design->fr, design->cert);
    double worst = 0.0;
    for (const auto& m : rep.members) worst = std::max(worst, m.ratio.value_or(0.0));
    return Outcome{rep.members.size() == 20 && rep.all_within_bound(),
                   fmt("20 seeds, worst ratio %.4g <= sqrt(rho) %.4g", worst, std::sqrt(design->out.result.rho))};
  });

  criterion("energy-to-peak-ensemble", 0, [] {
    if (!design) return Outcome{false, "no design"};
    const double bound = design->out.result.linf_bound();
    const auto rep = energy_to_peak_ensemble(design->cfg, design->sm, design->fr, bound);
    double worst = 0.0;
    for (const auto& m : rep.members) worst = std::max(worst, m.ratio.value_or(0.0));
    return Outcome{rep.members.size() == 10 && rep.all_within_bound(),
                   fmt("10 seeds, worst ratio %.4g <= sqrt(b sigma) %.4g", worst, bound)};
  });

  criterion("design-orderings", 0, [] {
    ScenarioConfig base = robot_arm_benchmark(SynthesisMode::Tradeoff);
    base.l2_members = 0;
    base.e2p_members = 0;
    base.corrupt_gain_scale = 0;
    const auto cmp = run_benchmark_comparison(base);
    const auto& l2 = cmp.runs[0].runs;
    const auto& tr = cmp.runs[1].runs;
    const auto& li = cmp.runs[2].runs;
    return Outcome{cmp.peak_ordering && cmp.tracking_ordering,
                   fmt("noisy peak %.3g > %.3g > %.3g", l2.noisy_metrics.peak_error, tr.noisy_metrics.peak_error,
                       li.noisy_metrics.peak_error) +
                       fmt("; clean rms %.2g < %.2g < %.2g", l2.clean_metrics.rms_error, tr.clean_metrics.rms_error,
                           li.clean_metrics.rms_error)};
  });

  criterion("rk4-richardson", 0, [] {
    const auto plant = build_robot_arm();
    const RobotArmParams arm;
    const SimulationInputs in{SignalSpec::sinusoid(Vec::Constant(1, 2.0), Vec::Constant(1, 0.25)),
                              SignalSpec::sinusoid(Vec::Constant(1, 0.1), Vec::Constant(1, 0.25)),
                              SignalSpec::sinusoid(Vec::Constant(1, 0.03), Vec::Constant(1, 0.1)),
                              SignalSpec::zero(2)};
    const auto final_state = [&](double h) {
      SimulationOptions opt;
      opt.horizon = 10.0;
      opt.step = h;
      return simulate_plant(plant, robot_arm_true_eta(arm).fn, in, Vec::Constant(4, 0.01), opt).x.back();
    };
    const Vec a = final_state(0.2), b = final_state(0.1), c = final_state(0.05);
    const double ratio = (a - b).norm() / (b - c).norm();
    return Outcome{ratio >= 12.0 && ratio <= 20.0, fmt("error ratio %.3f for h = 0.2, 0.1, 0.05", ratio)};
  });

  criterion("lyapunov-spot-check", 0, [] {
    if (!design) return Outcome{false, "no design"};
    const auto good = l2_ensemble(design->cfg, design->sm, design->fr, design->cert);
    int certified = 0;
    for (const auto& m : good.members)
      certified += m.diverged ? 1 : m.lyapunov.cumulative_violations + m.lyapunov.gain_violations;
    ObserverGains bad{design->fr.E, design->fr.K * 10.0, design->fr.J};
    const auto corrupted = l2_ensemble(design->cfg, design->sm, build_filter(design->sm.aug, bad), design->cert);
    return Outcome{certified == 0 && corrupted.total_violations() >= 1,
                   fmt("certified violations %.0f, K x10 violations %.0f", certified, corrupted.total_violations())};
  });

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
