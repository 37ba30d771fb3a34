#include "faultest/sdp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

#include "faultest/errors.hpp"

namespace faultest {

Mat SdpBlock::evaluate(const Vec& x) const {
  Mat out = F0;
  for (std::size_t i = 0; i < F.size(); ++i) {
    const double xi = x(static_cast<Eigen::Index>(i));
    if (xi != 0.0 && F[i].size() > 0) out += xi * F[i];
  }
  return out;
}

std::string to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::Optimal: return "optimal";
    case SdpStatus::Infeasible: return "infeasible";
    case SdpStatus::Unbounded: return "unbounded";
    case SdpStatus::MaxIterations: return "max_iterations";
    case SdpStatus::NumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

double min_eig(const Mat& M) {
  if (M.rows() != M.cols()) throw NotSymmetric("min_eig: matrix is not square");
  if (M.size() == 0) return std::numeric_limits<double>::infinity();
  const double asym = (M - M.transpose()).norm();
  if (asym > 1e-10 * (1.0 + M.norm())) {
    throw NotSymmetric("min_eig: asymmetry " + std::to_string(asym));
  }
  const Mat S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

namespace {

using Cone = std::vector<Mat>;

double inner(const Cone& a, const Cone& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k].array() * b[k].array()).sum();
  return s;
}

double norm(const Cone& a) { return std::sqrt(inner(a, a)); }

void axpy(double alpha, const Cone& x, Cone& y) {
  for (std::size_t k = 0; k < x.size(); ++k) y[k] += alpha * x[k];
}

Cone scaled(const Cone& a, double s) {
  Cone out = a;
  for (auto& m : out) m *= s;
  return out;
}

Mat symmetrize(const Mat& M) { return 0.5 * (M + M.transpose()); }

// Reduced problem over the variables that appear in some block.
struct Reduced {
  std::vector<int> active;  // original index of each reduced variable
  Vec c;
  std::vector<int> sizes;
  Cone F0;
  std::vector<Cone> F;  // F[i][k]: coefficient of variable i in block k
  int nu = 0;

  Cone apply(const Vec& x) const {
    Cone out;
    out.reserve(sizes.size());
    for (int s : sizes) out.push_back(Mat::Zero(s, s));
    for (std::size_t i = 0; i < F.size(); ++i) {
      if (x(static_cast<Eigen::Index>(i)) == 0.0) continue;
      for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (F[i][k].size() > 0) out[k] += x(static_cast<Eigen::Index>(i)) * F[i][k];
      }
    }
    return out;
  }

  Vec adjoint(const Cone& z) const {
    Vec out = Vec::Zero(static_cast<Eigen::Index>(F.size()));
    for (std::size_t i = 0; i < F.size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < sizes.size(); ++k) {
        if (F[i][k].size() > 0) s += (F[i][k].array() * z[k].array()).sum();
      }
      out(static_cast<Eigen::Index>(i)) = s;
    }
    return out;
  }

  // H_ij = sum_k <F_i, T_k F_j T_k>
  Mat gram(const Cone& T) const {
    const int nv = static_cast<int>(F.size());
    Mat H = Mat::Zero(nv, nv);
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      std::vector<int> nz;
      for (int i = 0; i < nv; ++i) {
        if (F[i][k].size() > 0) nz.push_back(i);
      }
      for (int j : nz) {
        const Mat TFT = T[k] * F[j][k] * T[k];
        for (int i : nz) {
          if (i > j) continue;
          H(i, j) += (F[i][k].array() * TFT.array()).sum();
        }
      }
    }
    return H.selfadjointView<Eigen::Upper>();
  }
};

Reduced reduce(const SdpProblem& p, bool& unbounded) {
  Reduced r;
  unbounded = false;
  std::vector<const SdpBlock*> kept;
  for (const auto& b : p.blocks) {
    if (b.dim() == 0) continue;
    kept.push_back(&b);
    r.sizes.push_back(b.dim());
    r.F0.push_back(symmetrize(b.F0));
    r.nu += b.dim();
  }
  for (int i = 0; i < p.num_vars; ++i) {
    Cone Fi(kept.size());
    bool any = false;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      const auto& b = *kept[k];
      if (static_cast<int>(b.F.size()) > i && b.F[i].size() > 0 && b.F[i].cwiseAbs().maxCoeff() > 0.0) {
        Fi[k] = symmetrize(b.F[i]);
        any = true;
      }
    }
    if (!any) {
      if (p.c(i) != 0.0) unbounded = true;
      continue;
    }
    r.active.push_back(i);
    r.F.push_back(std::move(Fi));
  }
  r.c.resize(static_cast<Eigen::Index>(r.active.size()));
  for (std::size_t i = 0; i < r.active.size(); ++i) r.c(static_cast<Eigen::Index>(i)) = p.c(r.active[i]);
  return r;
}

// Symmetric positive (semi)definite solve with a regularized fallback.
class SchurFactor {
 public:
  bool factor(const Mat& H) {
    llt_.compute(H);
    use_llt_ = llt_.info() == Eigen::Success;
    if (use_llt_) return true;
    const double reg = 1e-14 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    ldlt_.compute(H + reg * Mat::Identity(H.rows(), H.cols()));
    return ldlt_.info() == Eigen::Success;
  }
  Vec solve(const Vec& b) const { return use_llt_ ? Vec(llt_.solve(b)) : Vec(ldlt_.solve(b)); }

 private:
  Eigen::LLT<Mat> llt_;
  Eigen::LDLT<Mat> ldlt_;
  bool use_llt_ = true;
};

// Nesterov-Todd scaling of one block: W(Z) = R^T Z R, W^{-T}(S) = R^{-1} S R^{-T},
// both equal to diag(lambda).
struct NtBlock {
  Mat R, Rinv, T;
  Vec lambda;
};

bool nt_scaling(const Cone& s, const Cone& z, std::vector<NtBlock>& out) {
  out.resize(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    Eigen::LLT<Mat> ls(s[k]), lz(z[k]);
    if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) return false;
    const Mat Ls = ls.matrixL();
    const Mat Lz = lz.matrixL();
    Eigen::JacobiSVD<Mat> svd(Lz.transpose() * Ls, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec sv = svd.singularValues();
    if (sv.minCoeff() <= 0.0 || !sv.allFinite()) return false;
    const Vec isq = sv.cwiseSqrt().cwiseInverse();
    NtBlock& b = out[k];
    b.lambda = sv;
    b.R = Ls * svd.matrixV() * isq.asDiagonal();
    b.Rinv = isq.asDiagonal() * svd.matrixU().transpose() * Lz.transpose();
    b.T = b.Rinv.transpose() * b.Rinv;
  }
  return true;
}

// Solves (diag(lambda) U + U diag(lambda)) / 2 = V for U.
Mat lambda_divide(const Vec& lambda, const Mat& V) {
  Mat U(V.rows(), V.cols());
  for (Eigen::Index i = 0; i < V.rows(); ++i) {
    for (Eigen::Index j = 0; j < V.cols(); ++j) U(i, j) = 2.0 * V(i, j) / (lambda(i) + lambda(j));
  }
  return U;
}

// Largest step t in [0, inf) keeping diag(lambda) + t D >= 0; inf if unbounded.
double max_step(const Vec& lambda, const Mat& D) {
  const Vec isq = lambda.cwiseSqrt().cwiseInverse();
  const Mat M = symmetrize(isq.asDiagonal() * D * isq.asDiagonal());
  Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  return lo < 0.0 ? -1.0 / lo : std::numeric_limits<double>::infinity();
}

struct KktSolver {
  const Reduced& prob;
  const std::vector<NtBlock>& nt;
  SchurFactor factor;
  Cone T;

  KktSolver(const Reduced& p, const std::vector<NtBlock>& w) : prob(p), nt(w) {
    for (const auto& b : w) T.push_back(b.T);
  }

  bool init() { return factor.factor(prob.gram(T)); }

  // [0  G^T; G  -W^T W] [x; z] = [bx; bz] with G = -A, plus refinement steps.
  void solve(const Vec& bx, const Cone& bz, Vec& x, Cone& z, int refine = 3) const {
    solve_once(bx, bz, x, z);
    for (int r = 0; r < refine; ++r) {
      const Vec rx = bx + prob.adjoint(z);
      const Cone Ax = prob.apply(x);
      Cone rz(bz.size());
      for (std::size_t k = 0; k < bz.size(); ++k) {
        const Mat RRt = nt[k].R * nt[k].R.transpose();
        rz[k] = bz[k] + Ax[k] + RRt * z[k] * RRt;
      }
      Vec dx;
      Cone dz;
      solve_once(rx, rz, dx, dz);
      x += dx;
      axpy(1.0, dz, z);
    }
  }

  void solve_once(const Vec& bx, const Cone& bz, Vec& x, Cone& z) const {
    Cone TbT(bz.size());
    for (std::size_t k = 0; k < bz.size(); ++k) TbT[k] = T[k] * bz[k] * T[k];
    x = factor.solve(bx - prob.adjoint(TbT));
    const Cone Ax = prob.apply(x);
    z.resize(bz.size());
    for (std::size_t k = 0; k < bz.size(); ++k) z[k] = symmetrize(-T[k] * (Ax[k] + bz[k]) * T[k]);
  }
};

}  // namespace

SdpSolution InteriorPointSolver::solve(const SdpProblem& problem, const SolverOptions& opt) const {
  if (problem.c.size() != problem.num_vars) throw DimensionMismatch("SDP objective length differs from num_vars");
  for (const auto& b : problem.blocks) {
    if (b.F0.rows() != b.F0.cols()) throw DimensionMismatch("SDP block " + b.label + " is not square");
    if (static_cast<int>(b.F.size()) > problem.num_vars) {
      throw DimensionMismatch("SDP block " + b.label + " has too many coefficient matrices");
    }
  }

  SdpSolution sol;
  sol.x = Vec::Zero(problem.num_vars);

  bool unbounded = false;
  const Reduced P = reduce(problem, unbounded);
  const auto finish = [&](SdpStatus status, const Vec& xr) {
    sol.status = status;
    for (std::size_t i = 0; i < P.active.size(); ++i) sol.x(P.active[i]) = xr(static_cast<Eigen::Index>(i));
    sol.objective = problem.c.dot(sol.x);
    sol.block_min_eigs.clear();
    for (const auto& b : problem.blocks) sol.block_min_eigs.push_back(b.dim() ? min_eig(symmetrize(b.evaluate(sol.x))) : 0.0);
    return sol;
  };
  if (unbounded) {
    sol.dual_objective = -std::numeric_limits<double>::infinity();
    return finish(SdpStatus::Unbounded, Vec::Zero(static_cast<Eigen::Index>(P.active.size())));
  }

  const int nv = static_cast<int>(P.active.size());
  if (nv == 0) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& f : P.F0) {
      if (f.size() > 0) lo = std::min(lo, min_eig(f));
    }
    return finish(lo >= -opt.tol_feas ? SdpStatus::Optimal : SdpStatus::Infeasible, Vec());
  }
  const int nb = static_cast<int>(P.sizes.size());
  if (nb == 0) return finish(P.c.norm() > 0.0 ? SdpStatus::Unbounded : SdpStatus::Optimal, Vec::Zero(nv));
  const Cone& h = P.F0;
  const Vec& c = P.c;
  const double resx0 = std::max(1.0, c.norm());
  const double resz0 = std::max(1.0, norm(h));

  Cone identity;
  for (int s : P.sizes) identity.push_back(Mat::Identity(s, s));

  // Least-squares starting point, shifted into the cone.
  std::vector<NtBlock> nt;
  {
    Cone Ident = identity;
    SchurFactor f0;
    if (!f0.factor(P.gram(Ident))) return finish(SdpStatus::NumericalFailure, Vec::Zero(nv));
    Vec x0 = f0.solve(-P.adjoint(h));
    Vec w0 = f0.solve(c);
    Cone s0 = P.apply(x0);
    axpy(1.0, h, s0);
    Cone z0 = P.apply(w0);
    const auto shift_into_cone = [&](Cone& v) {
      double lo = std::numeric_limits<double>::infinity();
      for (int k = 0; k < nb; ++k) {
        if (P.sizes[k] > 0) lo = std::min(lo, min_eig(symmetrize(v[k])));
      }
      const double a = -lo;
      if (a >= -1e-8 * std::max(1.0, norm(v))) axpy(1.0 + a, identity, v);
    };
    shift_into_cone(s0);
    shift_into_cone(z0);
    Vec x = x0;
    Cone s = s0, z = z0;
    double tau = 1.0, kappa = 1.0;

    const double nu = static_cast<double>(P.nu);
    Vec x_best = x;
    for (int it = 0; it <= opt.max_iter; ++it) {
      sol.iterations = it;
      for (auto& m : s) m = symmetrize(m);
      for (auto& m : z) m = symmetrize(m);

      // Residuals of the homogeneous embedding (G = -A, h = F0).
      const Cone Ax = P.apply(x);
      const Vec Atz = P.adjoint(z);
      const Vec rx = -Atz + tau * c;
      Cone rz = s;
      axpy(-1.0, Ax, rz);
      axpy(-tau, h, rz);
      const double cx = c.dot(x);
      const double hz = inner(h, z);
      const double rt = kappa + cx + hz;

      const double gap = inner(s, z);
      const double mu = (gap + tau * kappa) / (nu + 1.0);
      const double pcost = cx / tau;
      const double dcost = -hz / tau;
      const double pres = norm(rz) / tau / resz0;
      const double dres = rx.norm() / tau / resx0;
      const double rgap = gap / (tau * tau);
      sol.residuals = {pres, dres, rgap};
      sol.dual_objective = dcost;
      x_best = x / tau;
      if (opt.verbose) {
        std::cerr << "ipm " << it << " pcost " << pcost << " dcost " << dcost << " gap " << rgap << " pres " << pres
                  << " dres " << dres << " tau " << tau << " kappa " << kappa << " |x| " << (x / tau).norm() << "\n";
      }

      if (!std::isfinite(mu) || !std::isfinite(pcost) || !std::isfinite(dcost)) {
        return finish(SdpStatus::NumericalFailure, x_best);
      }
      if (pres <= opt.tol_feas && dres <= opt.tol_feas &&
          rgap <= opt.tol_gap * std::max(1.0, std::min(std::abs(pcost), std::abs(dcost)))) {
        return finish(SdpStatus::Optimal, x_best);
      }
      // Certificates read off the embedding as tau -> 0.
      if (hz < 0.0) {
        const double pinf = Atz.norm() / resx0 / (-hz);
        if (pinf <= opt.tol_feas) {
          sol.dual_objective = std::numeric_limits<double>::infinity();
          return finish(SdpStatus::Infeasible, x_best);
        }
      }
      if (cx < 0.0) {
        Cone r = s;
        axpy(-1.0, Ax, r);
        const double dinf = norm(r) / resz0 / (-cx);
        if (dinf <= opt.tol_feas) return finish(SdpStatus::Unbounded, x_best);
      }
      if (it == opt.max_iter) return finish(SdpStatus::MaxIterations, x_best);

      if (!nt_scaling(s, z, nt)) return finish(SdpStatus::NumericalFailure, x_best);
      KktSolver kkt(P, nt);
      if (!kkt.init()) return finish(SdpStatus::NumericalFailure, x_best);

      Vec x1;
      Cone z1;
      kkt.solve(-c, h, x1, z1);
      const double denom_base = c.dot(x1) + inner(h, z1);

      Cone lam_sq(nb);
      for (int k = 0; k < nb; ++k) lam_sq[k] = Mat(nt[k].lambda.array().square().matrix().asDiagonal());

      struct Step {
        Vec dx;
        Cone dz, ds, dz_t, ds_t;
        double dtau = 0, dkappa = 0;
      };
      const auto direction = [&](double sigma, const Cone& dS, double dk, Step& st) {
        const double f = 1.0 - sigma;
        Cone lam_div(nb);
        Cone bz(nb);
        for (int k = 0; k < nb; ++k) {
          lam_div[k] = lambda_divide(nt[k].lambda, dS[k]);
          bz[k] = -f * rz[k] - nt[k].R * lam_div[k] * nt[k].R.transpose();
        }
        const Vec bx = -f * rx;
        Vec x2;
        Cone z2;
        kkt.solve(bx, bz, x2, z2);
        const double denom = denom_base - kappa / tau;
        st.dtau = (-f * rt - dk / tau - c.dot(x2) - inner(h, z2)) / denom;
        st.dx = x2 + st.dtau * x1;
        st.dz = z2;
        axpy(st.dtau, z1, st.dz);
        st.dkappa = (dk - kappa * st.dtau) / tau;
        // ds from the linear equation keeps the primal residual exact; the
        // scaled copies feed the step length and the corrector.
        const Cone Adx = P.apply(st.dx);
        st.ds.resize(nb);
        st.ds_t.resize(nb);
        st.dz_t.resize(nb);
        for (int k = 0; k < nb; ++k) {
          st.ds[k] = symmetrize(-f * rz[k] + Adx[k] + st.dtau * h[k]);
          st.dz_t[k] = symmetrize(nt[k].R.transpose() * st.dz[k] * nt[k].R);
          st.ds_t[k] = symmetrize(nt[k].Rinv * st.ds[k] * nt[k].Rinv.transpose());
        }
        return std::isfinite(st.dtau) && st.dx.allFinite();
      };
      const auto step_length = [&](const Step& st) {
        double a = std::numeric_limits<double>::infinity();
        for (int k = 0; k < nb; ++k) {
          if (P.sizes[k] == 0) continue;
          a = std::min(a, max_step(nt[k].lambda, st.ds_t[k]));
          a = std::min(a, max_step(nt[k].lambda, st.dz_t[k]));
        }
        if (st.dtau < 0.0) a = std::min(a, -tau / st.dtau);
        if (st.dkappa < 0.0) a = std::min(a, -kappa / st.dkappa);
        return a;
      };

      // Predictor.
      Step aff;
      Cone dS_aff = scaled(lam_sq, -1.0);
      if (!direction(0.0, dS_aff, -tau * kappa, aff)) return finish(SdpStatus::NumericalFailure, x_best);
      const double a_aff = std::min(1.0, step_length(aff));
      const double sigma = std::pow(1.0 - a_aff, 3.0);

      // Corrector.
      Step cor;
      Cone dS(nb);
      for (int k = 0; k < nb; ++k) {
        const Mat prod = 0.5 * (aff.ds_t[k] * aff.dz_t[k] + aff.dz_t[k] * aff.ds_t[k]);
        dS[k] = -lam_sq[k] - prod + sigma * mu * identity[k];
      }
      const double dk = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
      if (!direction(sigma, dS, dk, cor)) return finish(SdpStatus::NumericalFailure, x_best);
      const double a = std::min(1.0, 0.99 * step_length(cor));

      x += a * cor.dx;
      axpy(a, cor.ds, s);
      axpy(a, cor.dz, z);
      tau += a * cor.dtau;
      kappa += a * cor.dkappa;
      if (!(tau > 0.0) || !(kappa > 0.0)) return finish(SdpStatus::NumericalFailure, x_best);
    }
    return finish(SdpStatus::MaxIterations, x_best);
  }
}

SdpSolution solve(const SdpProblem& problem, const SolverOptions& options) {
  return InteriorPointSolver().solve(problem, options);
}

}  // namespace faultest
