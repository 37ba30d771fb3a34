#pragma once

#include <optional>
#include <string>
#include <vector>

#include "faultest/robot_arm.hpp"
#include "faultest/simulation.hpp"
#include "faultest/verification.hpp"

namespace faultest {

/// Everything one run needs. Built from a TOML/JSON document by
/// scenario_from_json; the normalized form is written back into every artifact.
struct ScenarioConfig {
  std::string id = "robot-arm";

  // plant
  std::string plant_source = "robot-arm";  // "robot-arm" or a plant document path
  nlohmann::json plant_doc;                // filled when plant_source is a path or given inline
  RobotArmParams arm;                      // true parameters of the built-in arm
  std::optional<nlohmann::json> true_eta;  // {"name", "params"} for document plants; zero when absent

  // prior uncertainty model; for the built-in arm an empty theta_x selects the stiffness prior
  UncertaintyKind uncertainty = UncertaintyKind::LinearState;
  Mat theta_x, theta_y, T_eta;
  std::optional<nlohmann::json> eta_lx;

  int r = 1;
  SynthesisMode mode = SynthesisMode::Tradeoff;
  std::vector<double> a_grid = log_grid(1e-2, 1e2, 5);
  std::vector<double> b_grid = log_grid(1e-1, 1e1, 5);
  /// Infinite means unbounded. In tradeoff mode, an absent value selects the
  /// geometric mean of the sigma found by the l2linf and l2 designs.
  std::optional<double> sigma_max;
  double epsilon = 0.0;
  LinfForm linf_form = LinfForm::Auto;
  SolverOptions solver;
  int threads = 0;

  // signals; nu is the noise of the noisy run, derived from noise_fraction when absent
  SignalSpec u = SignalSpec::sinusoid(Vec::Constant(1, 2.0), Vec::Constant(1, 0.25));
  SignalSpec fault = SignalSpec::sinusoid(Vec::Constant(1, 0.1), Vec::Constant(1, 0.25), 25.0);
  SignalSpec omega = SignalSpec::sinusoid(Vec::Constant(1, 0.03), Vec::Constant(1, 0.1));
  std::optional<SignalSpec> nu;
  double noise_fraction = 0.05;  // of each sensor's peak |y| in the noise-free run
  std::uint64_t noise_seed = 7;

  Vec x0 = Vec::Constant(4, 0.01);
  bool z0_on_manifold = false;  // demo runs start the filter at zero
  double horizon = 100.0;
  double step = 0.01;
  double metrics_from = -1.0;  // negative: horizon / 2

  // verification ensembles
  int l2_members = 20;
  std::uint64_t l2_seed = 1;
  int e2p_members = 10;
  std::uint64_t e2p_seed = 1;
  double corrupt_gain_scale = 10.0;  // K multiplier of the negative control, 0 disables

  std::string output_dir;  // empty: nothing is written

  double metrics_start() const { return metrics_from < 0 ? horizon / 2 : metrics_from; }
};

ScenarioConfig scenario_from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
ScenarioConfig load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
/// 64-bit FNV-1a of the normalized config, hex encoded.
std::string config_hash(const ScenarioConfig& cfg);

/// The default study on the built-in arm for one mode.
ScenarioConfig robot_arm_benchmark(SynthesisMode mode);

struct ScenarioModel {
  ValidatedPlant plant;
  UncertaintyModel model;
  AugmentedSystem aug;
  UncertaintyFn true_eta;
};

ScenarioModel build_scenario_model(const ScenarioConfig& cfg);

struct SynthesisOutcome {
  SynthesisResult result;
  std::vector<LineSearchEntry> table;
  double sigma_max = kUnbounded;
  /// Sigma of the l2linf and l2 designs when the tradeoff bound was derived from them.
  std::optional<std::pair<double, double>> sigma_range;
};

/// Line search for the configured mode. Throws AllInfeasible.
SynthesisOutcome synthesize_scenario(const ScenarioConfig& cfg, const ScenarioModel& sm);

/// Gains document: the filter matrices, a "certificate" block and the config.
nlohmann::json gains_document(const ScenarioConfig& cfg, const SynthesisOutcome& out, const FilterRealization& fr);
LyapunovCertificate certificate_from_document(const nlohmann::json& gains_doc);
/// Rebuilds the filter stored in a gains document against its embedded config.
FilterRealization filter_from_document(const nlohmann::json& gains_doc);

struct RunMetrics {
  double peak_error = 0.0;  // max ||e_f|| for t >= metrics_start
  double rms_error = 0.0;   // RMS of ||e_f|| for t >= metrics_start
};

RunMetrics run_metrics(const SimulationTrace& trace, double from);

struct DemoRuns {
  SimulationTrace clean;
  SimulationTrace noisy;
  RunMetrics clean_metrics;
  RunMetrics noisy_metrics;
  Vec noise_amplitude;
};

/// Noise-free and noisy runs of the configured scenario.
DemoRuns simulate_scenario(const ScenarioConfig& cfg, const ScenarioModel& sm, const FilterRealization& fr);

struct EnsembleMember {
  std::uint64_t seed = 0;
  std::optional<double> ratio;
  double bound = 0.0;
  bool diverged = false;  // NonFiniteState during the run; counted as one violation
  LyapunovReport lyapunov;
};

struct EnsembleReport {
  std::vector<EnsembleMember> members;
  bool all_within_bound() const;
  int total_violations() const;
  nlohmann::json to_json() const;
};

/// Disturbance members: random sinusoidal omega and fault, nu = 0, z0 = M x_a(0).
/// The fault starts at a random delay only when r = 1.
/// For the built-in arm the true stiffness and mass-center deviations are
/// drawn too, so delta eta is excited.
EnsembleReport l2_ensemble(const ScenarioConfig& cfg, const ScenarioModel& sm, const FilterRealization& fr,
                           const LyapunovCertificate& cert);
/// Noise members: random sinusoidal nu, every other perturbation zero
/// (true uncertainty equal to its model, no fault), z0 = M x_a(0).
/// Empty when the uncertainty model reads the noisy output.
EnsembleReport energy_to_peak_ensemble(const ScenarioConfig& cfg, const ScenarioModel& sm,
                                       const FilterRealization& fr, double bound);

struct ScenarioReport {
  ScenarioConfig config;
  SynthesisOutcome synthesis;
  ObserverGains gains;
  std::optional<FilterRealization> filter;
  DemoRuns runs;
  EnsembleReport l2;
  EnsembleReport l2_corrupted;
  EnsembleReport e2p;
  nlohmann::json summary;
};

/// Synthesis, demo runs, certificate checks, then artifacts when output_dir is set.
ScenarioReport run_scenario(const ScenarioConfig& cfg);
/// Same, with a gains document instead of synthesis.
ScenarioReport run_scenario_with_gains(const ScenarioConfig& cfg, const nlohmann::json& gains_doc);

/// Checks one recorded trace against a gains document: identities, empirical
/// gains when their preconditions hold, and the Lyapunov spot-check.
nlohmann::json verify_trace(const nlohmann::json& gains_doc, const SimulationTrace& trace);

/// Writes t, f_i, fhat_i columns.
void write_fault_plot_csv(const SimulationTrace& trace, const std::string& path);

struct BenchmarkComparison {
  std::vector<ScenarioReport> runs;  // l2, tradeoff, l2linf
  bool peak_ordering = false;        // l2 > tradeoff > l2linf
  bool tracking_ordering = false;    // l2 < tradeoff < l2linf
  nlohmann::json to_json() const;
};

/// Runs the three designs on the built-in arm. The tradeoff bound is derived
/// from the other two designs unless base.sigma_max is set.
BenchmarkComparison run_benchmark_comparison(const ScenarioConfig& base);

}  // namespace faultest
