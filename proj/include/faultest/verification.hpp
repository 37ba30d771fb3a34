#pragma once

#include <limits>
#include <optional>

#include "faultest/simulation.hpp"

namespace faultest {

/// Trapezoidal integral of ||row(k)||^2 over the trace grid.
double l2_energy(const Vec& t, const Mat& rows);
/// Running trapezoidal integral of ||row(k)||^2, one entry per sample.
Vec cumulative_energy(const Vec& t, const Mat& rows);

/// ||e_f||_L2 / ||omega_a||_L2. Empty when the denominator is below 1e-12.
/// Throws NoiseNotZero when the trace carries measurement noise.
std::optional<double> empirical_l2_gain(const SimulationTrace& trace);

struct EnergyToPeak {
  std::optional<double> ratio;  // empty when the denominator is below 1e-12
  double peak = 0.0;            // sup_t ||e_f(t)||
  double energy = 0.0;          // ||(nu, nu')||_L2, or ||nu||_L2 when nu' is unavailable
  bool derivative_used = true;
};

/// sup_t ||e_f|| / ||(nu, nu')||_L2. Throws DisturbanceNotZero unless
/// delta_eta, omega and f^(r) all vanish (1e-12).
EnergyToPeak empirical_energy_to_peak(const SimulationTrace& trace);

/// Values taken from a solved program.
struct LyapunovCertificate {
  Mat P;
  double rho = 0.0;
  double a = 1.0;
  double alpha = 0.0;
};

struct LyapunovReport {
  int points = 0;
  // W' <= e^T S11 e + 2 alpha |(P M S_ga)^T e|^2 + (alpha / 2) |(V_ga - J C_a) e + J D_nu nu|^2
  //       - 2 e^T P M B_omega_a omega_a + 2 e^T (Q D_nu nu - R D_nu nu')
  bool decay_checked = false;
  int decay_violations = 0;
  double decay_worst = -std::numeric_limits<double>::infinity();
  // W' + a ||e_f||^2 - a rho ||omega_a||^2 <= 0, only without noise
  bool dissipation_checked = false;
  int dissipation_violations = 0;
  double dissipation_worst = -std::numeric_limits<double>::infinity();
  // W(e(t)) - W(e(0)) + a int ||e_f||^2 - a rho int ||omega_a||^2 <= 0, only without noise
  bool cumulative_checked = false;
  int cumulative_violations = 0;
  double cumulative_worst = -std::numeric_limits<double>::infinity();
  // int ||e_f||^2 <= rho int ||omega_a||^2 + W(e(0)) / a, the same with W(e(t)) dropped
  int gain_violations = 0;
  double gain_worst = -std::numeric_limits<double>::infinity();
  // samples skipped by the pointwise checks because an input jumps inside the stencil
  int skipped = 0;

  int total_violations() const {
    return decay_violations + dissipation_violations + cumulative_violations + gain_violations;
  }
  nlohmann::json to_json() const;
};

/// Differentiates W(e) = e^T P e by central differences and checks the decay
/// and dissipation inequalities pointwise (tolerance 10 h^2, relative to the
/// magnitudes involved), plus the integrated L2 inequalities at every sample.
LyapunovReport lyapunov_spot_check(const SimulationTrace& trace, const FilterRealization& fr,
                                   const LyapunovCertificate& cert);

}  // namespace faultest
