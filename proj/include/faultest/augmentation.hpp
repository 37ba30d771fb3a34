#pragma once

#include <functional>

#include "faultest/plant.hpp"

namespace faultest {

/// Chain of r integrators per fault channel: zeta_j' = zeta_{j+1}, zeta_r' = 0, f = zeta_1.
struct FaultChain {
  Mat chain;     // (r n_f) x (r n_f)
  Mat selector;  // n_f x (r n_f), picks zeta_1
};

/// Throws InvalidOrder when n_f or r is zero.
FaultChain build_fault_internal_model(int n_f, int r);

struct AugmentedDimensions {
  int n = 0;       // plant states
  int n_f = 0;     // fault channels
  int r = 0;       // integrators per channel
  int n_z = 0;     // n + r n_f
  int m = 0;       // outputs
  int l_a = 0;     // length of u_a
  int n_ga = 0;    // columns of S_ga (outputs of g_a)
  int n_vga = 0;   // rows of V_ga (inputs of g_a)
  int m_nu = 0;    // noise channels
  // Column partition of B_omega_a: [delta eta | omega | f^(r)].
  int n_deta = 0;
  int n_omega = 0;
  int n_omega_a() const { return n_deta + n_omega + n_f; }
};

/// Fault-augmented dynamics
///   x_a' = A_a x_a + B_ua u_a + S_ga g_a(V_ga x_a, u_a, t) + B_omega_a omega_a
///   y    = C_a x_a + D_nu nu
/// with x_a = (x, zeta_1, ..., zeta_r) and omega_a = (delta eta, omega, f^(r)).
struct AugmentedSystem {
  using StackedFn = std::function<Vec(const Vec& v, const Vec& u_a, double t)>;
  using InputBuilder = std::function<Vec(const Vec& u, const Vec& y, double t)>;

  Mat A_a{}, B_ua{}, S_ga{}, V_ga{}, B_omega_a{}, C_a{}, C_bar{}, D_nu{};
  AugmentedDimensions dims{};
  double alpha = 0.0;  // Lipschitz constant of g_a
  StackedFn g_a{};
  InputBuilder u_a_builder{};

  ValidatedPlant plant;
  UncertaintyModel model;

  Vec g_a_eval(const Vec& v, const Vec& u_a, double t) const { return g_a(v, u_a, t); }
  Vec build_u_a(const Vec& u, const Vec& y, double t) const { return u_a_builder(u, y, t); }
};

/// Builds the augmented system for the given prior uncertainty model.
///  nonlinear-state: g_a = (g, eta_lx), stacked S_ga / V_ga, alpha = max(alpha_g, alpha_eta)
///  linear-state:    A replaced by A + S_eta Theta_x V_eta inside A_a
///  linear-output / none: eta_ly(T_eta y) enters as a known input through B_ua = [B_u S_eta; 0]
AugmentedSystem augment(const ValidatedPlant& plant, const UncertaintyModel& model, int r);

/// x_a = (x, f, f', ..., f^(r-1)) stacked from a state and fault derivatives
/// (derivs.col(k) holds f^(k)).
Vec stack_augmented_state(const AugmentedSystem& aug, const Vec& x, const Mat& fault_derivs);

}  // namespace faultest
