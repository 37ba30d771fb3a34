#pragma once

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "faultest/plant.hpp"

namespace faultest {

/// One semidefinite constraint  F0 + sum_i x_i F_i >= 0  (symmetric blocks).
/// Scalar inequalities are 1x1 blocks.
struct SdpBlock {
  std::string label;
  Mat F0;
  std::vector<Mat> F;

  int dim() const { return static_cast<int>(F0.rows()); }
  Mat evaluate(const Vec& x) const;
};

/// minimize c^T x  subject to  every block >= 0, x free.
struct SdpProblem {
  int num_vars = 0;
  Vec c;
  std::vector<SdpBlock> blocks;
};

enum class SdpStatus { Optimal, Infeasible, Unbounded, MaxIterations, NumericalFailure };

std::string to_string(SdpStatus s);

struct SdpResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double gap = 0.0;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::NumericalFailure;
  Vec x;
  double objective = 0.0;       // c^T x
  double dual_objective = 0.0;  // -<F0, Z>
  SdpResiduals residuals;
  int iterations = 0;
  /// Smallest eigenvalue of each block at x, recomputed outside the solver.
  std::vector<double> block_min_eigs;
};

struct SolverOptions {
  double tol_feas = 1e-8;
  double tol_gap = 1e-7;
  int max_iter = 200;
  bool verbose = false;
};

/// Adapter seam for alternative SDP back-ends.
class SdpSolver {
 public:
  virtual ~SdpSolver() = default;
  virtual SdpSolution solve(const SdpProblem& problem, const SolverOptions& options) const = 0;
  virtual std::string name() const = 0;
};

/// Dense primal-dual interior-point method on the homogeneous self-dual
/// embedding, with Nesterov-Todd scaling and Mehrotra predictor-corrector steps.
class InteriorPointSolver final : public SdpSolver {
 public:
  SdpSolution solve(const SdpProblem& problem, const SolverOptions& options) const override;
  std::string name() const override { return "faultest-hsd-ipm"; }
};

/// Solves with the built-in interior-point solver.
SdpSolution solve(const SdpProblem& problem, const SolverOptions& options = {});

/// Smallest eigenvalue of a symmetric matrix. Throws NotSymmetric when
/// ||M - M^T|| exceeds 1e-10 (1 + ||M||).
double min_eig(const Mat& M);

/// Sparse SDPA text format. The SDPA primal reads  sum_i x_i F_i - F_0 >= 0,
/// so F_0 is written negated. A negative block size marks a diagonal block.
void write_sdpa(const SdpProblem& problem, std::ostream& os);
SdpProblem read_sdpa(std::istream& is);
void write_sdpa_file(const SdpProblem& problem, const std::string& path);
SdpProblem read_sdpa_file(const std::string& path);

}  // namespace faultest
