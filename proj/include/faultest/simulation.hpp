#pragma once

#include <functional>
#include <string>
#include <vector>

#include "faultest/filter.hpp"
#include "faultest/signals.hpp"

namespace faultest {

/// Right-hand side with access to the start time of the current step, so
/// piecewise-constant inputs can be held across the RK4 stages.
using StepRhs = std::function<Vec(double t, const Vec& x, double t_step)>;
using PlainRhs = std::function<Vec(double t, const Vec& x)>;

struct Rk4Trace {
  std::vector<double> t;
  std::vector<Vec> x;
};

/// Classical fixed-step RK4 on [t0, t1]. Requires h > 0 and (t1 - t0) / h
/// within 1e-9 of an integer. Throws NonFiniteState.
Rk4Trace integrate_rk4(const StepRhs& rhs, const Vec& x0, double t0, double t1, double h);
Rk4Trace integrate_rk4(const PlainRhs& rhs, const Vec& x0, double t0, double t1, double h);

/// Number of RK4 steps, or ConfigError when the horizon is not a multiple of h.
long rk4_step_count(double t0, double t1, double h);

struct SimulationInputs {
  SignalSpec u;
  SignalSpec fault;
  SignalSpec omega;
  SignalSpec nu;
};

struct SimulationOptions {
  double t0 = 0.0;
  double horizon = 100.0;
  double step = 0.01;
  /// RK4 steps per recorded sample; the integration step is step / substeps.
  int substeps = 1;
  std::string scenario_id = "scenario";
};

/// Smallest power of two k such that (step / k) times the spectral radius of
/// N and A_a is at most 1.
int stable_substeps(const FilterRealization& fr, double step);

/// True uncertainty eta(V_eta x, u, t). An empty function means eta = 0.
using UncertaintyFn = Nonlinearity::Fn;

/// Row k of every matrix is the sample at t(k).
struct SimulationTrace {
  Vec t;
  Mat x, x_a, z, xhat, y, u, f, fhat, e, e_f, omega, nu, nu_dot, delta_eta, f_r;
  bool nu_dot_available = true;
  /// Times where an exogenous input or its derivative jumps (noise hold
  /// boundaries excluded).
  std::vector<double> breakpoints;
  double step = 0.0;
  std::string scenario_id;
  nlohmann::json metadata = nlohmann::json::object();

  Eigen::Index samples() const { return t.size(); }
  /// [delta_eta | omega | f_r]
  Mat omega_a() const;
};

/// z(0) = M x_a(0), which zeroes the initial estimation error when nu(0) = 0.
Vec manifold_initial_state(const FilterRealization& fr, const Vec& x0, const SignalSpec& fault, double t0 = 0.0);

/// Co-simulates the plant (with the true uncertainty) and the filter driven by
/// the measured output. Noise is held constant over each step when it is not
/// differentiable.
SimulationTrace simulate(const FilterRealization& fr, const UncertaintyFn& true_eta, const SimulationInputs& inputs,
                         const Vec& x0, const Vec& z0, const SimulationOptions& options = {});

/// Plant alone, without filter; returns states on the grid.
Rk4Trace simulate_plant(const ValidatedPlant& plant, const UncertaintyFn& true_eta, const SimulationInputs& inputs,
                        const Vec& x0, const SimulationOptions& options);

/// CSV: a "# columns:" comment line, a header row, then one row per sample.
void write_trace_csv(const SimulationTrace& trace, const std::string& path);
/// Reads a trace CSV. When metadata_path names an existing sidecar, its step,
/// breakpoints and scenario id are restored too.
SimulationTrace read_trace_csv(const std::string& path, const std::string& metadata_path = "");
/// "run.csv" -> "run.meta.json"
std::string trace_metadata_path(const std::string& csv_path);
nlohmann::json trace_metadata(const SimulationTrace& trace);
void write_trace_metadata(const SimulationTrace& trace, const std::string& path);

}  // namespace faultest
