#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "faultest/plant.hpp"

namespace faultest {

enum class VarId { P, R, Q, J, Rho, Sigma };

std::string to_string(VarId id);

/// Placement of the decision variables (P, R, Q, J, rho, sigma) in one shared
/// vector. Symmetric P uses the scaled symmetric vectorization (off-diagonal
/// entries carry a sqrt(2) factor), so vector inner products equal trace inner
/// products.
class VariableLayout {
 public:
  struct Block {
    VarId id;
    int rows = 0;
    int cols = 0;
    bool symmetric = false;
    int offset = 0;
    int count = 0;
  };

  VariableLayout() = default;
  VariableLayout(int n_z, int m, int n_vga);

  int size() const { return size_; }
  const Block& block(VarId id) const;
  const std::vector<Block>& blocks() const { return blocks_; }

  Mat matrix(VarId id, const Vec& x) const;
  double scalar(VarId id, const Vec& x) const { return x(block(id).offset); }
  void set_matrix(VarId id, const Mat& value, Vec& x) const;
  void set_scalar(VarId id, double value, Vec& x) const { x(block(id).offset) = value; }

  /// Matrix value of the k-th scalar coordinate of a variable block.
  Mat basis(VarId id, int k) const;

  int n_z() const { return n_z_; }
  int m() const { return m_; }
  int n_vga() const { return n_vga_; }

 private:
  std::vector<Block> blocks_;
  int size_ = 0;
  int n_z_ = 0, m_ = 0, n_vga_ = 0;
};

/// Matrix expression affine in the decision variables: a constant plus terms of
/// the form L * X * R, L * X^T * R, or s * L for scalar variables s.
class AffineExpr {
 public:
  struct Term {
    VarId var;
    Mat left;
    Mat right;
    bool transpose = false;
    bool scalar = false;
  };

  AffineExpr() = default;
  AffineExpr(int rows, int cols) : constant_(Mat::Zero(rows, cols)) {}

  static AffineExpr constant(Mat value);
  static AffineExpr zeros(int rows, int cols) { return AffineExpr(rows, cols); }
  /// The decision matrix itself (rows x cols taken from the layout).
  static AffineExpr var(VarId id, const VariableLayout& layout);
  /// coeff * s, for scalar variable s.
  static AffineExpr scalar(VarId id, Mat coeff);

  Eigen::Index rows() const { return constant_.rows(); }
  Eigen::Index cols() const { return constant_.cols(); }
  const Mat& constant_part() const { return constant_; }
  const std::vector<Term>& terms() const { return terms_; }

  AffineExpr transpose() const;
  /// X + X^T
  AffineExpr sym() const { return *this + transpose(); }

  AffineExpr operator+(const AffineExpr& o) const;
  AffineExpr operator-(const AffineExpr& o) const { return *this + o * -1.0; }
  AffineExpr operator*(double s) const;
  friend AffineExpr operator*(const Mat& M, const AffineExpr& e);
  AffineExpr operator*(const Mat& M) const;

  Mat evaluate(const VariableLayout& layout, const Vec& x) const;
  /// Value of the linear part at x (constant excluded).
  Mat evaluate_linear(const VariableLayout& layout, const Vec& x) const;

 private:
  Mat constant_;
  std::vector<Term> terms_;
};

enum class Sense { NegSemidef, PosSemidef };  // F(x) <= 0 or F(x) >= 0

/// F(x) = F0 + sum_k x_k F_k with symmetric blocks, constrained to a cone.
struct AffineMatrixInequality {
  std::string label;
  Sense sense = Sense::NegSemidef;
  Mat F0;
  std::vector<Mat> F;

  int dim() const { return static_cast<int>(F0.rows()); }
  Mat evaluate(const Vec& x) const;
  /// Largest violation-free margin: min eig of F for PosSemidef, of -F for NegSemidef.
  double margin(const Vec& x) const;
};

/// Symmetric block matrix assembled from affine blocks; only the upper block
/// triangle is stored.
class BlockLmi {
 public:
  BlockLmi(std::string label, Sense sense, std::vector<int> sizes)
      : label_(std::move(label)), sense_(sense), sizes_(std::move(sizes)) {}

  void set(int i, int j, AffineExpr e);
  AffineMatrixInequality compile(const VariableLayout& layout) const;
  /// Direct evaluation, independent of compile().
  Mat evaluate(const VariableLayout& layout, const Vec& x) const;
  int dim() const;

 private:
  std::string label_;
  Sense sense_;
  std::vector<int> sizes_;
  std::map<std::pair<int, int>, AffineExpr> blocks_;
};

}  // namespace faultest
