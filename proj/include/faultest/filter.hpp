#pragma once

#include "faultest/augmentation.hpp"
#include "faultest/lmi.hpp"

namespace faultest {

struct ObserverGains {
  Mat E;  // n_z x m
  Mat K;  // n_z x m
  Mat J;  // n_vga x m
};

/// E = P^-1 R, K = P^-1 Q through a Cholesky solve. Throws IllConditioned when
/// cond2(P) > max_condition.
ObserverGains recover_gains(const Mat& P, const Mat& R, const Mat& Q, const Mat& J, double max_condition = 1e12);
ObserverGains recover_gains(const SynthesisResult& result, double max_condition = 1e12);

struct IdentityResiduals {
  double g = 0.0;   // ||G - M B_ua|| relative
  double nm = 0.0;  // ||N M + L C_a - M A_a|| relative
  double ne = 0.0;  // ||N E + L - K|| relative
  double max() const { return std::max({g, nm, ne}); }
};

/// z' = N z + G u_a + L y + M S_ga g_a(V_ga xhat + J (y - C_a xhat), u_a, t)
/// xhat_a = z - E y,  fhat = Cbar (z - E y)
struct FilterRealization {
  Mat E, K, J;
  Mat N, G, L, M;
  Mat C_bar;
  AugmentedSystem aug;

  IdentityResiduals residuals() const;
};

/// Builds N = M A_a - K C_a, G = M B_ua, L = K (I + C_a E) - M A_a E, M = I + E C_a
/// and checks the identities. Throws IdentityViolation above tol.
FilterRealization build_filter(const AugmentedSystem& aug, const ObserverGains& gains, double tol = 1e-10);

struct FilterEval {
  Vec zdot;
  Vec xhat;
};

FilterEval filter_eval(const FilterRealization& fr, const Vec& z, const Vec& u_a, const Vec& y, double t);
Vec filter_rhs(const FilterRealization& fr, const Vec& z, const Vec& u_a, const Vec& y, double t);
Vec estimate_state(const FilterRealization& fr, const Vec& z, const Vec& y);
Vec extract_fault(const FilterRealization& fr, const Vec& z, const Vec& y);

/// Gains document: E, K, J and the derived N, G, L, M, C_bar, plus whatever
/// metadata the caller adds under "synthesis".
nlohmann::json gains_to_json(const FilterRealization& fr);
ObserverGains gains_from_json(const nlohmann::json& doc);

}  // namespace faultest
