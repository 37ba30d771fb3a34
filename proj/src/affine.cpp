#include "faultest/affine.hpp"

#include <cmath>
#include <numeric>

#include "faultest/errors.hpp"
#include "faultest/sdp.hpp"

namespace faultest {

std::string to_string(VarId id) {
  switch (id) {
    case VarId::P: return "P";
    case VarId::R: return "R";
    case VarId::Q: return "Q";
    case VarId::J: return "J";
    case VarId::Rho: return "rho";
    case VarId::Sigma: return "sigma";
  }
  return "?";
}

VariableLayout::VariableLayout(int n_z, int m, int n_vga) : n_z_(n_z), m_(m), n_vga_(n_vga) {
  const auto add = [this](VarId id, int rows, int cols, bool sym) {
    const int count = sym ? rows * (rows + 1) / 2 : rows * cols;
    blocks_.push_back({id, rows, cols, sym, size_, count});
    size_ += count;
  };
  add(VarId::P, n_z, n_z, true);
  add(VarId::R, n_z, m, false);
  add(VarId::Q, n_z, m, false);
  add(VarId::J, n_vga, m, false);
  add(VarId::Rho, 1, 1, false);
  add(VarId::Sigma, 1, 1, false);
}

const VariableLayout::Block& VariableLayout::block(VarId id) const {
  for (const auto& b : blocks_) {
    if (b.id == id) return b;
  }
  throw Error("variable layout has no block " + to_string(id));
}

Mat VariableLayout::matrix(VarId id, const Vec& x) const {
  const Block& b = block(id);
  Mat M(b.rows, b.cols);
  if (b.symmetric) {
    int k = b.offset;
    for (int j = 0; j < b.cols; ++j) {
      for (int i = j; i < b.rows; ++i, ++k) {
        const double v = i == j ? x(k) : x(k) / std::sqrt(2.0);
        M(i, j) = v;
        M(j, i) = v;
      }
    }
    return M;
  }
  for (int j = 0; j < b.cols; ++j) {
    for (int i = 0; i < b.rows; ++i) M(i, j) = x(b.offset + j * b.rows + i);
  }
  return M;
}

void VariableLayout::set_matrix(VarId id, const Mat& value, Vec& x) const {
  const Block& b = block(id);
  if (value.rows() != b.rows || value.cols() != b.cols) {
    throw DimensionMismatch("value for " + to_string(id) + " has wrong shape");
  }
  if (b.symmetric) {
    int k = b.offset;
    for (int j = 0; j < b.cols; ++j) {
      for (int i = j; i < b.rows; ++i, ++k) {
        x(k) = i == j ? value(i, j) : std::sqrt(2.0) * 0.5 * (value(i, j) + value(j, i));
      }
    }
    return;
  }
  for (int j = 0; j < b.cols; ++j) {
    for (int i = 0; i < b.rows; ++i) x(b.offset + j * b.rows + i) = value(i, j);
  }
}

Mat VariableLayout::basis(VarId id, int k) const {
  const Block& b = block(id);
  Vec x = Vec::Zero(size_);
  x(b.offset + k) = 1.0;
  return matrix(id, x);
}

AffineExpr AffineExpr::constant(Mat value) {
  AffineExpr e;
  e.constant_ = std::move(value);
  return e;
}

AffineExpr AffineExpr::var(VarId id, const VariableLayout& layout) {
  const auto& b = layout.block(id);
  AffineExpr e(b.rows, b.cols);
  e.terms_.push_back({id, Mat::Identity(b.rows, b.rows), Mat::Identity(b.cols, b.cols), false, false});
  return e;
}

AffineExpr AffineExpr::scalar(VarId id, Mat coeff) {
  AffineExpr e(static_cast<int>(coeff.rows()), static_cast<int>(coeff.cols()));
  e.terms_.push_back({id, std::move(coeff), Mat(), false, true});
  return e;
}

AffineExpr AffineExpr::transpose() const {
  AffineExpr e = constant(constant_.transpose());
  for (const auto& t : terms_) {
    if (t.scalar) {
      e.terms_.push_back({t.var, t.left.transpose(), Mat(), false, true});
    } else {
      e.terms_.push_back({t.var, t.right.transpose(), t.left.transpose(), !t.transpose, false});
    }
  }
  return e;
}

AffineExpr AffineExpr::operator+(const AffineExpr& o) const {
  if (rows() != o.rows() || cols() != o.cols()) {
    throw DimensionMismatch("affine expression sum of incompatible shapes");
  }
  AffineExpr e = *this;
  e.constant_ += o.constant_;
  e.terms_.insert(e.terms_.end(), o.terms_.begin(), o.terms_.end());
  return e;
}

AffineExpr AffineExpr::operator*(double s) const {
  AffineExpr e = *this;
  e.constant_ *= s;
  for (auto& t : e.terms_) t.left *= s;
  return e;
}

AffineExpr operator*(const Mat& M, const AffineExpr& x) {
  if (M.cols() != x.rows()) throw DimensionMismatch("matrix * affine expression");
  AffineExpr e = AffineExpr::constant(M * x.constant_);
  for (const auto& t : x.terms_) {
    AffineExpr::Term nt = t;
    nt.left = M * t.left;
    e.terms_.push_back(std::move(nt));
  }
  return e;
}

AffineExpr AffineExpr::operator*(const Mat& M) const {
  if (cols() != M.rows()) throw DimensionMismatch("affine expression * matrix");
  AffineExpr e = constant(constant_ * M);
  for (const auto& t : terms_) {
    Term nt = t;
    if (t.scalar) {
      nt.left = t.left * M;
    } else {
      nt.right = t.right * M;
    }
    e.terms_.push_back(std::move(nt));
  }
  return e;
}

Mat AffineExpr::evaluate_linear(const VariableLayout& layout, const Vec& x) const {
  Mat out = Mat::Zero(rows(), cols());
  for (const auto& t : terms_) {
    if (t.scalar) {
      out += layout.scalar(t.var, x) * t.left;
    } else {
      const Mat X = layout.matrix(t.var, x);
      if (t.transpose) {
        out += t.left * X.transpose() * t.right;
      } else {
        out += t.left * X * t.right;
      }
    }
  }
  return out;
}

Mat AffineExpr::evaluate(const VariableLayout& layout, const Vec& x) const {
  return constant_ + evaluate_linear(layout, x);
}

Mat AffineMatrixInequality::evaluate(const Vec& x) const {
  Mat out = F0;
  for (std::size_t k = 0; k < F.size(); ++k) {
    if (x(static_cast<Eigen::Index>(k)) != 0.0) out += x(static_cast<Eigen::Index>(k)) * F[k];
  }
  return out;
}

double AffineMatrixInequality::margin(const Vec& x) const {
  Mat v = evaluate(x);
  if (sense == Sense::NegSemidef) v = -v;
  v = 0.5 * (v + v.transpose());
  return min_eig(v);
}

void BlockLmi::set(int i, int j, AffineExpr e) {
  if (i > j) {
    std::swap(i, j);
    e = e.transpose();
  }
  if (e.rows() != sizes_.at(i) || e.cols() != sizes_.at(j)) {
    throw DimensionMismatch(label_ + ": block (" + std::to_string(i) + "," + std::to_string(j) +
                            ") has the wrong shape");
  }
  blocks_[{i, j}] = std::move(e);
}

int BlockLmi::dim() const { return std::accumulate(sizes_.begin(), sizes_.end(), 0); }

namespace {

template <typename BlockFn>
Mat assemble(const std::vector<int>& sizes, int dim, BlockFn&& value_of,
             const std::map<std::pair<int, int>, AffineExpr>& blocks) {
  std::vector<int> offsets(sizes.size(), 0);
  for (std::size_t i = 1; i < sizes.size(); ++i) offsets[i] = offsets[i - 1] + sizes[i - 1];
  Mat out = Mat::Zero(dim, dim);
  for (const auto& [ij, expr] : blocks) {
    const auto [i, j] = ij;
    if (sizes[i] == 0 || sizes[j] == 0) continue;
    const Mat v = value_of(expr);
    out.block(offsets[i], offsets[j], sizes[i], sizes[j]) = v;
    if (i != j) out.block(offsets[j], offsets[i], sizes[j], sizes[i]) = v.transpose();
  }
  return out;
}

}  // namespace

Mat BlockLmi::evaluate(const VariableLayout& layout, const Vec& x) const {
  return assemble(
      sizes_, dim(), [&](const AffineExpr& e) { return e.evaluate(layout, x); }, blocks_);
}

AffineMatrixInequality BlockLmi::compile(const VariableLayout& layout) const {
  AffineMatrixInequality lmi;
  lmi.label = label_;
  lmi.sense = sense_;
  const int n = dim();
  lmi.F0 = assemble(
      sizes_, n, [](const AffineExpr& e) { return e.constant_part(); }, blocks_);
  lmi.F0 = 0.5 * (lmi.F0 + lmi.F0.transpose());
  lmi.F.assign(layout.size(), Mat::Zero(n, n));

  // Only coordinates of variables that actually appear need evaluation.
  std::vector<bool> used(6, false);
  for (const auto& [ij, expr] : blocks_) {
    for (const auto& t : expr.terms()) used[static_cast<int>(t.var)] = true;
  }
  Vec unit = Vec::Zero(layout.size());
  for (const auto& b : layout.blocks()) {
    if (!used[static_cast<int>(b.id)]) continue;
    for (int k = 0; k < b.count; ++k) {
      unit(b.offset + k) = 1.0;
      Mat Fk = assemble(
          sizes_, n, [&](const AffineExpr& e) { return e.evaluate_linear(layout, unit); }, blocks_);
      lmi.F[b.offset + k] = 0.5 * (Fk + Fk.transpose());
      unit(b.offset + k) = 0.0;
    }
  }
  return lmi;
}

}  // namespace faultest
