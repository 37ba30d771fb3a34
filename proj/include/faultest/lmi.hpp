#pragma once

#include <limits>
#include <string>
#include <vector>

#include "faultest/affine.hpp"
#include "faultest/augmentation.hpp"
#include "faultest/errors.hpp"
#include "faultest/sdp.hpp"

namespace faultest {

/// Blocks shared by every LMI family.
///   S11 = sym((P + R C_a) A_a - Q C_a)
///   X11 = S11 + alpha (V^T V - sym(V^T J C_a))
///   X12 = [sqrt(2 alpha) (P + R C_a) S_ga,  sqrt(alpha) C_a^T J^T]  (split in two block columns)
struct CoreBlocks {
  AffineExpr S11, X11, X12_g, X12_v;
  int width_g = 0;  // 0 when alpha = 0
  int width_v = 0;
};

CoreBlocks build_x11_x12(const AugmentedSystem& aug, const VariableLayout& layout);

VariableLayout make_layout(const AugmentedSystem& aug);

/// [[X11 + eps I, X12], [*, -I]] <= 0
AffineMatrixInequality assemble_stability_lmi(const AugmentedSystem& aug, const VariableLayout& layout, double eps);
/// [[X11 + a Cbar^T Cbar, -(P + R C_a) B_omega_a, X12], [*, -rho a I, 0], [*, *, -I]] <= 0
AffineMatrixInequality assemble_l2_lmi(const AugmentedSystem& aug, const VariableLayout& layout, double a,
                                       double eps = 0.0);
/// First: [[X11, H12, 0, X12], [*, -b^2 I, sqrt(alpha) T_nu^T J^T, 0], [*, *, -I, 0], [*, *, *, -I]] <= 0
///   with H12 = [Q D_nu, -R D_nu], T_nu = [D_nu, 0].
/// Second: [[P, Cbar^T], [Cbar, sigma I]] >= 0.
std::pair<AffineMatrixInequality, AffineMatrixInequality> assemble_l2linf_lmis(const AugmentedSystem& aug,
                                                                               const VariableLayout& layout,
                                                                               double b);

/// Forms without the nonlinearity (alpha = 0).
///   S11 + eps I <= 0
AffineMatrixInequality assemble_stability_lmi_reduced(const AugmentedSystem& aug, const VariableLayout& layout,
                                                      double eps);
///   [[S11 + Cbar^T Cbar, (P + R C_a) B_omega_a], [*, -rho I]] <= 0
AffineMatrixInequality assemble_l2_lmi_reduced(const AugmentedSystem& aug, const VariableLayout& layout);
///   [[S11, H12], [*, -I]] <= 0   (no b)
AffineMatrixInequality assemble_l2linf_first_reduced(const AugmentedSystem& aug, const VariableLayout& layout);

enum class SynthesisMode { L2, L2Linf, Tradeoff };
enum class LinfForm { Auto, Full, Reduced };

std::string to_string(SynthesisMode m);
SynthesisMode synthesis_mode_from_string(const std::string& s);
std::string to_string(LinfForm f);
LinfForm linf_form_from_string(const std::string& s);

constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct SynthesisParams {
  double a = 1.0;
  double b = 1.0;
  double sigma_max = kUnbounded;
  double epsilon = 0.0;  // <= 0 selects 1e-6 (1 + ||A_a||_2)
  SynthesisMode mode = SynthesisMode::L2;
  LinfForm linf_form = LinfForm::Auto;
};

double default_epsilon(const AugmentedSystem& aug);

/// The full program over one shared variable vector.
struct SynthesisProblem {
  VariableLayout layout;
  std::vector<AffineMatrixInequality> constraints;
  Vec objective;
  SynthesisParams params;
  double epsilon = 0.0;
  double alpha = 0.0;
  bool linf_reduced = false;

  SdpProblem to_sdp() const;
  int num_vars() const { return layout.size(); }
};

SynthesisProblem assemble_synthesis_problem(const AugmentedSystem& aug, const SynthesisParams& params);

struct SynthesisResult {
  SynthesisParams params;
  double epsilon = 0.0;
  double alpha = 0.0;
  bool linf_reduced = false;
  SdpStatus status = SdpStatus::NumericalFailure;
  SdpSolution solution;
  VariableLayout layout;
  double rho = 0.0;
  double sigma = 0.0;
  Mat P, R, Q, J;
  std::vector<std::pair<std::string, double>> margins;

  bool optimal() const { return status == SdpStatus::Optimal; }
  /// sqrt(rho)
  double l2_bound() const;
  /// sqrt(b sigma), or sqrt(sigma) for the reduced form.
  double linf_bound() const;
  /// b sqrt(sigma), the bound obtained by integrating the first LMI directly.
  double linf_bound_integrated() const;
};

/// Smallest sigma with [[P, Cbar^T], [Cbar, sigma I]] >= 0, i.e. lambda_max(Cbar P^-1 Cbar^T).
double peak_sigma_for(const AugmentedSystem& aug, const Mat& P);
/// Smallest rho satisfying the L2 LMI at fixed (P, R, Q, J); infinite when none does.
double l2_rho_for(const AugmentedSystem& aug, const VariableLayout& layout, const Vec& x, double a);

/// Solves the program for one (a, b). In l2 mode sigma is not optimized and is
/// reported as the smallest value the solved P certifies; likewise rho in l2linf mode.
SynthesisResult synthesize(const AugmentedSystem& aug, const SynthesisParams& params,
                           const SolverOptions& options = {}, const SdpSolver* solver = nullptr);

struct LineSearchEntry {
  double a = 0.0;
  double b = 0.0;
  SdpStatus status = SdpStatus::NumericalFailure;
  double rho = 0.0;
  double sigma = 0.0;
  int iterations = 0;
};

struct LineSearchResult {
  SynthesisResult best;
  std::vector<LineSearchEntry> table;
};

class AllInfeasible : public Error {
 public:
  explicit AllInfeasible(std::vector<LineSearchEntry> table);
  const std::vector<LineSearchEntry>& table() const { return table_; }

 private:
  std::vector<LineSearchEntry> table_;
};

/// n log-spaced points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n);

/// Solves every grid point (concurrently when threads != 1) and returns the
/// best feasible one. Ranking: rho, then sigma, then smaller a, then smaller |b|.
/// In L2Linf mode the certified noise bound takes the place of rho.
LineSearchResult line_search(const AugmentedSystem& aug, const std::vector<double>& a_grid,
                             const std::vector<double>& b_grid, const SynthesisParams& base,
                             const SolverOptions& options = {}, int threads = 0);

}  // namespace faultest
