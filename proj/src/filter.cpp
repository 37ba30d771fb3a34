#include "faultest/filter.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace faultest {

ObserverGains recover_gains(const Mat& P, const Mat& R, const Mat& Q, const Mat& J, double max_condition) {
  if (P.rows() != P.cols() || R.rows() != P.rows() || Q.rows() != P.rows() || R.cols() != Q.cols()) {
    throw DimensionMismatch("recover_gains: P, R, Q");
  }
  const Mat Ps = 0.5 * (P + P.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(Ps, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues()(0);
  const double hi = es.eigenvalues()(Ps.rows() - 1);
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
  if (!(cond <= max_condition)) throw IllConditioned(cond);
  Eigen::LLT<Mat> llt(Ps);
  if (llt.info() != Eigen::Success) throw IllConditioned(cond);
  return {llt.solve(R), llt.solve(Q), J};
}

ObserverGains recover_gains(const SynthesisResult& result, double max_condition) {
  if (!result.optimal()) throw Error("recover_gains: synthesis status is " + to_string(result.status));
  return recover_gains(result.P, result.R, result.Q, result.J, max_condition);
}

IdentityResiduals FilterRealization::residuals() const {
  const auto rel = [](double num, double scale) { return num / std::max(1.0, scale); };
  const Mat& A = aug.A_a;
  const Mat& C = aug.C_a;
  IdentityResiduals r;
  r.g = rel((G - M * aug.B_ua).norm(), M.norm() * aug.B_ua.norm());
  r.nm = rel((N * M + L * C - M * A).norm(), N.norm() * M.norm() + L.norm() * C.norm() + M.norm() * A.norm());
  r.ne = rel((N * E + L - K).norm(), N.norm() * E.norm() + L.norm() + K.norm());
  return r;
}

FilterRealization build_filter(const AugmentedSystem& aug, const ObserverGains& gains, double tol) {
  const auto& d = aug.dims;
  if (gains.E.rows() != d.n_z || gains.E.cols() != d.m || gains.K.rows() != d.n_z || gains.K.cols() != d.m) {
    throw DimensionMismatch("build_filter: E and K must be n_z x m");
  }
  if (gains.J.rows() != d.n_vga || gains.J.cols() != d.m) throw DimensionMismatch("build_filter: J must be n_vga x m");
  FilterRealization fr{
      .E = gains.E, .K = gains.K, .J = gains.J, .N = {}, .G = {}, .L = {}, .M = {}, .C_bar = aug.C_bar, .aug = aug};
  const Mat I_z = Mat::Identity(d.n_z, d.n_z);
  const Mat I_m = Mat::Identity(d.m, d.m);
  fr.M = I_z + fr.E * aug.C_a;
  fr.N = fr.M * aug.A_a - fr.K * aug.C_a;
  fr.G = fr.M * aug.B_ua;
  fr.L = fr.K * (I_m + aug.C_a * fr.E) - fr.M * aug.A_a * fr.E;
  const IdentityResiduals r = fr.residuals();
  if (r.g > tol) throw IdentityViolation("G - M B_ua", r.g);
  if (r.nm > tol) throw IdentityViolation("N M + L C_a - M A_a", r.nm);
  if (r.ne > tol) throw IdentityViolation("N E + L - K", r.ne);
  return fr;
}

Vec estimate_state(const FilterRealization& fr, const Vec& z, const Vec& y) { return z - fr.E * y; }

Vec extract_fault(const FilterRealization& fr, const Vec& z, const Vec& y) { return fr.C_bar * (z - fr.E * y); }

FilterEval filter_eval(const FilterRealization& fr, const Vec& z, const Vec& u_a, const Vec& y, double t) {
  const auto& aug = fr.aug;
  FilterEval out;
  out.xhat = z - fr.E * y;
  out.zdot = fr.N * z + fr.G * u_a + fr.L * y;
  if (aug.S_ga.cols() > 0) {
    const Vec arg = aug.V_ga * out.xhat + fr.J * (y - aug.C_a * out.xhat);
    out.zdot += fr.M * (aug.S_ga * aug.g_a_eval(arg, u_a, t));
  }
  return out;
}

Vec filter_rhs(const FilterRealization& fr, const Vec& z, const Vec& u_a, const Vec& y, double t) {
  return filter_eval(fr, z, u_a, y, t).zdot;
}

nlohmann::json gains_to_json(const FilterRealization& fr) {
  nlohmann::json j;
  j["E"] = matrix_to_json(fr.E);
  j["K"] = matrix_to_json(fr.K);
  j["J"] = matrix_to_json(fr.J);
  j["N"] = matrix_to_json(fr.N);
  j["G"] = matrix_to_json(fr.G);
  j["L"] = matrix_to_json(fr.L);
  j["M"] = matrix_to_json(fr.M);
  j["C_bar"] = matrix_to_json(fr.C_bar);
  const IdentityResiduals r = fr.residuals();
  j["identity_residuals"] = {{"G-MB_ua", r.g}, {"NM+LC_a-MA_a", r.nm}, {"NE+L-K", r.ne}};
  return j;
}

ObserverGains gains_from_json(const nlohmann::json& doc) {
  for (const char* key : {"E", "K", "J"}) {
    if (!doc.contains(key)) throw ConfigError(std::string("gains document lacks '") + key + "'");
  }
  return {matrix_from_json(doc.at("E")), matrix_from_json(doc.at("K")), matrix_from_json(doc.at("J"))};
}

}  // namespace faultest
