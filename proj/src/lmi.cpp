#include "faultest/lmi.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace faultest {

namespace {

Mat I(int n) { return Mat::Identity(n, n); }

AffineExpr pm(const AugmentedSystem& aug, const VariableLayout& layout) {
  return AffineExpr::var(VarId::P, layout) + AffineExpr::var(VarId::R, layout) * aug.C_a;
}

AffineMatrixInequality scalar_bound(const std::string& label, const VariableLayout& layout, VarId id, double coeff,
                                    double offset) {
  // coeff * s + offset >= 0
  BlockLmi lmi(label, Sense::PosSemidef, {1});
  lmi.set(0, 0, AffineExpr::scalar(id, Mat::Constant(1, 1, coeff)) + AffineExpr::constant(Mat::Constant(1, 1, offset)));
  return lmi.compile(layout);
}

}  // namespace

VariableLayout make_layout(const AugmentedSystem& aug) {
  return VariableLayout(aug.dims.n_z, aug.dims.m, aug.dims.n_vga);
}

CoreBlocks build_x11_x12(const AugmentedSystem& aug, const VariableLayout& layout) {
  CoreBlocks cb;
  const double alpha = aug.alpha;
  const AffineExpr PM = pm(aug, layout);
  cb.S11 = (PM * aug.A_a - AffineExpr::var(VarId::Q, layout) * aug.C_a).sym();
  cb.X11 = cb.S11;
  if (alpha > 0.0) {
    const Mat& V = aug.V_ga;
    const AffineExpr JC = AffineExpr::var(VarId::J, layout) * aug.C_a;
    cb.X11 = cb.S11 + AffineExpr::constant(alpha * V.transpose() * V) - (V.transpose() * JC).sym() * alpha;
    cb.width_g = static_cast<int>(aug.S_ga.cols());
    cb.width_v = static_cast<int>(aug.V_ga.rows());
    cb.X12_g = PM * aug.S_ga * std::sqrt(2.0 * alpha);
    cb.X12_v = JC.transpose() * std::sqrt(alpha);
  }
  return cb;
}

AffineMatrixInequality assemble_stability_lmi(const AugmentedSystem& aug, const VariableLayout& layout, double eps) {
  const CoreBlocks cb = build_x11_x12(aug, layout);
  const int n_z = aug.dims.n_z;
  BlockLmi lmi("stability", Sense::NegSemidef, {n_z, cb.width_g, cb.width_v});
  lmi.set(0, 0, cb.X11 + AffineExpr::constant(eps * I(n_z)));
  if (cb.width_g > 0) {
    lmi.set(0, 1, cb.X12_g);
    lmi.set(1, 1, AffineExpr::constant(-I(cb.width_g)));
  }
  if (cb.width_v > 0) {
    lmi.set(0, 2, cb.X12_v);
    lmi.set(2, 2, AffineExpr::constant(-I(cb.width_v)));
  }
  return lmi.compile(layout);
}

namespace {

// With rho_free the disturbance column is left out, which is the closure of
// the feasible set as rho grows without bound.
AffineMatrixInequality l2_lmi(const AugmentedSystem& aug, const VariableLayout& layout, double a, double eps,
                              bool rho_free) {
  if (!(a > 0.0)) throw Error("L2 LMI needs a > 0");
  const CoreBlocks cb = build_x11_x12(aug, layout);
  const int n_z = aug.dims.n_z;
  const int n_w = rho_free ? 0 : aug.dims.n_omega_a();
  BlockLmi lmi("l2", Sense::NegSemidef, {n_z, n_w, cb.width_g, cb.width_v});
  lmi.set(0, 0, cb.X11 + AffineExpr::constant(a * aug.C_bar.transpose() * aug.C_bar + eps * I(n_z)));
  if (n_w > 0) {
    lmi.set(0, 1, pm(aug, layout) * aug.B_omega_a * -1.0);
    lmi.set(1, 1, AffineExpr::scalar(VarId::Rho, -a * I(n_w)));
  }
  if (cb.width_g > 0) {
    lmi.set(0, 2, cb.X12_g);
    lmi.set(2, 2, AffineExpr::constant(-I(cb.width_g)));
  }
  if (cb.width_v > 0) {
    lmi.set(0, 3, cb.X12_v);
    lmi.set(3, 3, AffineExpr::constant(-I(cb.width_v)));
  }
  return lmi.compile(layout);
}

}  // namespace

AffineMatrixInequality assemble_l2_lmi(const AugmentedSystem& aug, const VariableLayout& layout, double a,
                                       double eps) {
  return l2_lmi(aug, layout, a, eps, false);
}

std::pair<AffineMatrixInequality, AffineMatrixInequality> assemble_l2linf_lmis(const AugmentedSystem& aug,
                                                                               const VariableLayout& layout,
                                                                               double b) {
  if (b == 0.0) throw Error("L2-Linf LMI needs b != 0");
  const CoreBlocks cb = build_x11_x12(aug, layout);
  const int n_z = aug.dims.n_z;
  const int m_nu = aug.dims.m_nu;
  const int w_nu = cb.width_v;  // J T_nu nu_a channel
  // Blocks: e | nu | nu' | J D_nu nu | X12_g | X12_v
  BlockLmi first("l2linf", Sense::NegSemidef, {n_z, m_nu, m_nu, w_nu, cb.width_g, cb.width_v});
  first.set(0, 0, cb.X11);
  first.set(0, 1, AffineExpr::var(VarId::Q, layout) * aug.D_nu);
  first.set(0, 2, AffineExpr::var(VarId::R, layout) * aug.D_nu * -1.0);
  first.set(1, 1, AffineExpr::constant(-b * b * I(m_nu)));
  first.set(2, 2, AffineExpr::constant(-b * b * I(m_nu)));
  if (w_nu > 0) {
    first.set(1, 3, (AffineExpr::var(VarId::J, layout) * aug.D_nu).transpose() * std::sqrt(aug.alpha));
    first.set(3, 3, AffineExpr::constant(-I(w_nu)));
  }
  if (cb.width_g > 0) {
    first.set(0, 4, cb.X12_g);
    first.set(4, 4, AffineExpr::constant(-I(cb.width_g)));
  }
  if (cb.width_v > 0) {
    first.set(0, 5, cb.X12_v);
    first.set(5, 5, AffineExpr::constant(-I(cb.width_v)));
  }

  const int n_f = aug.dims.n_f;
  BlockLmi second("peak", Sense::PosSemidef, {n_z, n_f});
  second.set(0, 0, AffineExpr::var(VarId::P, layout));
  second.set(0, 1, AffineExpr::constant(aug.C_bar.transpose()));
  second.set(1, 1, AffineExpr::scalar(VarId::Sigma, I(n_f)));
  return {first.compile(layout), second.compile(layout)};
}

AffineMatrixInequality assemble_stability_lmi_reduced(const AugmentedSystem& aug, const VariableLayout& layout,
                                                      double eps) {
  const CoreBlocks cb = build_x11_x12(aug, layout);
  BlockLmi lmi("stability-reduced", Sense::NegSemidef, {aug.dims.n_z});
  lmi.set(0, 0, cb.S11 + AffineExpr::constant(eps * I(aug.dims.n_z)));
  return lmi.compile(layout);
}

AffineMatrixInequality assemble_l2_lmi_reduced(const AugmentedSystem& aug, const VariableLayout& layout) {
  const CoreBlocks cb = build_x11_x12(aug, layout);
  const int n_w = aug.dims.n_omega_a();
  BlockLmi lmi("l2-reduced", Sense::NegSemidef, {aug.dims.n_z, n_w});
  lmi.set(0, 0, cb.S11 + AffineExpr::constant(aug.C_bar.transpose() * aug.C_bar));
  lmi.set(0, 1, pm(aug, layout) * aug.B_omega_a);
  lmi.set(1, 1, AffineExpr::scalar(VarId::Rho, -I(n_w)));
  return lmi.compile(layout);
}

AffineMatrixInequality assemble_l2linf_first_reduced(const AugmentedSystem& aug, const VariableLayout& layout) {
  const CoreBlocks cb = build_x11_x12(aug, layout);
  const int m_nu = aug.dims.m_nu;
  BlockLmi lmi("l2linf-reduced", Sense::NegSemidef, {aug.dims.n_z, m_nu, m_nu});
  lmi.set(0, 0, cb.S11);
  lmi.set(0, 1, AffineExpr::var(VarId::Q, layout) * aug.D_nu);
  lmi.set(0, 2, AffineExpr::var(VarId::R, layout) * aug.D_nu * -1.0);
  lmi.set(1, 1, AffineExpr::constant(-I(m_nu)));
  lmi.set(2, 2, AffineExpr::constant(-I(m_nu)));
  return lmi.compile(layout);
}

std::string to_string(SynthesisMode m) {
  switch (m) {
    case SynthesisMode::L2: return "l2";
    case SynthesisMode::L2Linf: return "l2linf";
    case SynthesisMode::Tradeoff: return "tradeoff";
  }
  return "?";
}

SynthesisMode synthesis_mode_from_string(const std::string& s) {
  if (s == "l2" || s == "l2-only") return SynthesisMode::L2;
  if (s == "l2linf" || s == "l2linf-only") return SynthesisMode::L2Linf;
  if (s == "tradeoff") return SynthesisMode::Tradeoff;
  throw ConfigError("unknown design mode '" + s + "'");
}

std::string to_string(LinfForm f) {
  switch (f) {
    case LinfForm::Auto: return "auto";
    case LinfForm::Full: return "full";
    case LinfForm::Reduced: return "reduced";
  }
  return "?";
}

LinfForm linf_form_from_string(const std::string& s) {
  if (s == "auto") return LinfForm::Auto;
  if (s == "full") return LinfForm::Full;
  if (s == "reduced") return LinfForm::Reduced;
  throw ConfigError("unknown linf_form '" + s + "'");
}

double default_epsilon(const AugmentedSystem& aug) {
  Eigen::JacobiSVD<Mat> svd(aug.A_a);
  return 1e-6 * (1.0 + svd.singularValues()(0));
}

SynthesisProblem assemble_synthesis_problem(const AugmentedSystem& aug, const SynthesisParams& params) {
  if (!(params.a > 0.0)) throw Error("synthesis needs a > 0");
  if (params.b == 0.0) throw Error("synthesis needs b != 0");
  if (!(params.sigma_max > 0.0)) throw Error("synthesis needs sigma_max > 0");
  if (params.mode == SynthesisMode::Tradeoff && !std::isfinite(params.sigma_max)) {
    throw ConfigError("tradeoff mode needs a finite sigma_max");
  }
  SynthesisProblem sp;
  sp.params = params;
  sp.layout = make_layout(aug);
  sp.alpha = aug.alpha;
  sp.epsilon = params.epsilon > 0.0 ? params.epsilon : default_epsilon(aug);
  sp.linf_reduced = params.linf_form == LinfForm::Reduced || (params.linf_form == LinfForm::Auto && aug.alpha == 0.0);
  const auto& L = sp.layout;

  sp.constraints.push_back(assemble_stability_lmi(aug, L, sp.epsilon));
  sp.constraints.push_back(assemble_l2_lmi(aug, L, params.a));
  auto [first, second] = assemble_l2linf_lmis(aug, L, params.b);
  sp.constraints.push_back(sp.linf_reduced ? assemble_l2linf_first_reduced(aug, L) : std::move(first));
  sp.constraints.push_back(std::move(second));
  {
    BlockLmi pos("P-eps", Sense::PosSemidef, {aug.dims.n_z});
    pos.set(0, 0, AffineExpr::var(VarId::P, L) - AffineExpr::constant(sp.epsilon * I(aug.dims.n_z)));
    sp.constraints.push_back(pos.compile(L));
  }
  sp.constraints.push_back(scalar_bound("rho>=0", L, VarId::Rho, 1.0, 0.0));
  sp.constraints.push_back(scalar_bound("sigma>=0", L, VarId::Sigma, 1.0, 0.0));
  const bool bound_sigma = params.mode != SynthesisMode::L2 && std::isfinite(params.sigma_max);
  if (bound_sigma) sp.constraints.push_back(scalar_bound("sigma<=sigma_max", L, VarId::Sigma, -1.0, params.sigma_max));

  sp.objective = Vec::Zero(L.size());
  const VarId primary = params.mode == SynthesisMode::L2Linf ? VarId::Sigma : VarId::Rho;
  sp.objective(L.block(primary).offset) = 1.0;
  return sp;
}

SdpProblem SynthesisProblem::to_sdp() const {
  SdpProblem p;
  p.num_vars = layout.size();
  p.c = objective;
  for (const auto& con : constraints) {
    const double s = con.sense == Sense::NegSemidef ? -1.0 : 1.0;
    SdpBlock b;
    b.label = con.label;
    b.F0 = s * con.F0;
    b.F.resize(con.F.size());
    for (std::size_t k = 0; k < con.F.size(); ++k) {
      if (con.F[k].size() > 0 && con.F[k].cwiseAbs().maxCoeff() > 0.0) b.F[k] = s * con.F[k];
    }
    p.blocks.push_back(std::move(b));
  }
  return p;
}

double SynthesisResult::l2_bound() const { return std::sqrt(std::max(rho, 0.0)); }

double SynthesisResult::linf_bound() const {
  const double s = std::max(sigma, 0.0);
  return linf_reduced ? std::sqrt(s) : std::sqrt(std::abs(params.b) * s);
}

double SynthesisResult::linf_bound_integrated() const {
  const double s = std::max(sigma, 0.0);
  return linf_reduced ? std::sqrt(s) : std::abs(params.b) * std::sqrt(s);
}

double peak_sigma_for(const AugmentedSystem& aug, const Mat& P) {
  Eigen::LLT<Mat> llt(P);
  if (llt.info() != Eigen::Success) return kUnbounded;
  const Mat W = aug.C_bar * llt.solve(aug.C_bar.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff() * (1.0 + 1e-9);
}

double l2_rho_for(const AugmentedSystem& aug, const VariableLayout& layout, const Vec& x, double a) {
  const CoreBlocks cb = build_x11_x12(aug, layout);
  Mat Y = cb.X11.evaluate(layout, x) + a * aug.C_bar.transpose() * aug.C_bar;
  if (cb.width_g > 0) {
    const Mat Xg = cb.X12_g.evaluate(layout, x);
    Y += Xg * Xg.transpose();
  }
  if (cb.width_v > 0) {
    const Mat Xv = cb.X12_v.evaluate(layout, x);
    Y += Xv * Xv.transpose();
  }
  Eigen::LLT<Mat> llt(-0.5 * (Y + Y.transpose()));
  if (llt.info() != Eigen::Success) return kUnbounded;
  const Mat PMB = pm(aug, layout).evaluate(layout, x) * aug.B_omega_a;
  const Mat W = PMB.transpose() * llt.solve(PMB);
  if (W.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (W + W.transpose()), Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff()) / a * (1.0 + 1e-9);
}

SynthesisResult synthesize(const AugmentedSystem& aug, const SynthesisParams& params, const SolverOptions& options,
                           const SdpSolver* solver) {
  const InteriorPointSolver builtin;
  if (solver == nullptr) solver = &builtin;
  SynthesisProblem sp = assemble_synthesis_problem(aug, params);
  SynthesisResult res;
  res.params = params;
  res.epsilon = sp.epsilon;
  res.alpha = sp.alpha;
  res.linf_reduced = sp.linf_reduced;
  res.layout = sp.layout;

  // A scalar that is neither optimized nor bounded above leaves the optimal
  // face unbounded. Its constraint is replaced by the limit as the scalar
  // grows, and the scalar is then set in closed form from the solved gains.
  const bool min_sigma = params.mode == SynthesisMode::L2Linf;
  SynthesisProblem solved = sp;
  if (params.mode != SynthesisMode::Tradeoff) {
    std::vector<AffineMatrixInequality> kept;
    for (auto& con : solved.constraints) {
      if (min_sigma && con.label == "l2") {
        kept.push_back(l2_lmi(aug, sp.layout, params.a, 0.0, true));
      } else if (min_sigma && con.label == "rho>=0") {
        continue;
      } else if (!min_sigma && (con.label == "peak" || con.label == "sigma>=0")) {
        continue;
      } else {
        kept.push_back(std::move(con));
      }
    }
    solved.constraints = std::move(kept);
  }
  SdpSolution sol = solver->solve(solved.to_sdp(), options);
  if (params.mode == SynthesisMode::L2) {
    sp.layout.set_scalar(VarId::Sigma, peak_sigma_for(aug, sp.layout.matrix(VarId::P, sol.x)), sol.x);
  } else if (min_sigma) {
    sp.layout.set_scalar(VarId::Rho, l2_rho_for(aug, sp.layout, sol.x, params.a), sol.x);
  }
  res.status = sol.status;
  res.solution = sol;
  const auto& L = sp.layout;
  res.rho = L.scalar(VarId::Rho, sol.x);
  res.sigma = L.scalar(VarId::Sigma, sol.x);
  res.P = L.matrix(VarId::P, sol.x);
  res.R = L.matrix(VarId::R, sol.x);
  res.Q = L.matrix(VarId::Q, sol.x);
  res.J = L.matrix(VarId::J, sol.x);
  for (const auto& con : sp.constraints) res.margins.emplace_back(con.label, con.margin(sol.x));
  return res;
}

AllInfeasible::AllInfeasible(std::vector<LineSearchEntry> table)
    : Error("no grid point of the (a, b) line search is feasible (" + std::to_string(table.size()) + " tried)"),
      table_(std::move(table)) {}

std::vector<double> log_grid(double lo, double hi, int n) {
  if (n < 1 || !(lo > 0.0) || !(hi >= lo)) throw ConfigError("log_grid needs 0 < lo <= hi and n >= 1");
  std::vector<double> g(static_cast<std::size_t>(n));
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  const double l0 = std::log10(lo), l1 = std::log10(hi);
  for (int i = 0; i < n; ++i) g[i] = std::pow(10.0, l0 + (l1 - l0) * i / (n - 1));
  return g;
}

namespace {

// -1 if x < y, 1 if x > y, 0 if equal within a relative tolerance.
int compare(double x, double y) {
  if (std::abs(x - y) <= 1e-6 * std::max({std::abs(x), std::abs(y), 1e-12})) return 0;
  return x < y ? -1 : 1;
}

bool better(const SynthesisResult& x, const SynthesisResult& y, SynthesisMode mode) {
  const double kx[4] = {mode == SynthesisMode::L2Linf ? x.linf_bound() : x.rho,
                        mode == SynthesisMode::L2Linf ? x.rho : x.sigma, x.params.a, std::abs(x.params.b)};
  const double ky[4] = {mode == SynthesisMode::L2Linf ? y.linf_bound() : y.rho,
                        mode == SynthesisMode::L2Linf ? y.rho : y.sigma, y.params.a, std::abs(y.params.b)};
  for (int i = 0; i < 4; ++i) {
    const int c = compare(kx[i], ky[i]);
    if (c != 0) return c < 0;
  }
  return false;
}

}  // namespace

LineSearchResult line_search(const AugmentedSystem& aug, const std::vector<double>& a_grid,
                             const std::vector<double>& b_grid, const SynthesisParams& base,
                             const SolverOptions& options, int threads) {
  if (a_grid.empty() || b_grid.empty()) throw ConfigError("line search grids must be nonempty");
  for (double a : a_grid) {
    if (!(a > 0.0)) throw ConfigError("line search a values must be positive");
  }
  for (double b : b_grid) {
    if (b == 0.0) throw ConfigError("line search b values must be nonzero");
  }
  std::vector<SynthesisParams> points;
  for (double a : a_grid) {
    for (double b : b_grid) {
      SynthesisParams p = base;
      p.a = a;
      p.b = b;
      points.push_back(p);
    }
  }
  std::vector<SynthesisResult> results(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) results[i] = synthesize(aug, points[i], options);
  };
  int n_threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n_threads = std::min<int>(n_threads, static_cast<int>(points.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  LineSearchResult out;
  int best = -1;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    out.table.push_back({r.params.a, r.params.b, r.status, r.rho, r.sigma, r.solution.iterations});
    if (!r.optimal()) continue;
    if (best < 0 || better(r, results[best], base.mode)) best = static_cast<int>(i);
  }
  if (best < 0) throw AllInfeasible(out.table);
  out.best = std::move(results[best]);
  return out;
}

}  // namespace faultest
