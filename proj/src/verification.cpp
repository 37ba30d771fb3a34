#include "faultest/verification.hpp"

#include <cmath>

#include "faultest/errors.hpp"

namespace faultest {

namespace {

constexpr double kUndefined = 1e-12;

double max_abs(const Mat& M) { return M.size() ? M.cwiseAbs().maxCoeff() : 0.0; }

double row_sq(const Mat& M, Eigen::Index k) { return M.cols() ? M.row(k).squaredNorm() : 0.0; }

}  // namespace

Vec cumulative_energy(const Vec& t, const Mat& rows) {
  Vec out = Vec::Zero(t.size());
  for (Eigen::Index k = 1; k < t.size(); ++k) {
    out(k) = out(k - 1) + 0.5 * (t(k) - t(k - 1)) * (row_sq(rows, k - 1) + row_sq(rows, k));
  }
  return out;
}

double l2_energy(const Vec& t, const Mat& rows) {
  const Vec c = cumulative_energy(t, rows);
  return c.size() ? c(c.size() - 1) : 0.0;
}

std::optional<double> empirical_l2_gain(const SimulationTrace& tr) {
  if (max_abs(tr.nu) > 0.0) throw NoiseNotZero("empirical_l2_gain needs a noise-free trace");
  const double den = std::sqrt(l2_energy(tr.t, tr.omega_a()));
  if (den < kUndefined) return std::nullopt;
  return std::sqrt(l2_energy(tr.t, tr.e_f)) / den;
}

EnergyToPeak empirical_energy_to_peak(const SimulationTrace& tr) {
  const double dist = std::max({max_abs(tr.delta_eta), max_abs(tr.omega), max_abs(tr.f_r)});
  if (dist > 1e-12) throw DisturbanceNotZero("empirical_energy_to_peak needs delta_eta, omega and f^(r) to vanish");
  EnergyToPeak out;
  for (Eigen::Index k = 0; k < tr.samples(); ++k) out.peak = std::max(out.peak, std::sqrt(row_sq(tr.e_f, k)));
  double energy = l2_energy(tr.t, tr.nu);
  out.derivative_used = tr.nu_dot_available && tr.nu_dot.cols() == tr.nu.cols();
  if (out.derivative_used) energy += l2_energy(tr.t, tr.nu_dot);
  out.energy = std::sqrt(energy);
  if (out.energy >= kUndefined) out.ratio = out.peak / out.energy;
  return out;
}

nlohmann::json LyapunovReport::to_json() const {
  const auto margin = [](bool checked, double v) -> nlohmann::json {
    if (!checked || !std::isfinite(v)) return nullptr;
    return v;
  };
  return {{"points", points},
          {"decay", {{"checked", decay_checked}, {"violations", decay_violations}, {"worst", margin(decay_checked, decay_worst)}}},
          {"dissipation",
           {{"checked", dissipation_checked},
            {"violations", dissipation_violations},
            {"worst", margin(dissipation_checked, dissipation_worst)}}},
          {"cumulative",
           {{"checked", cumulative_checked},
            {"violations", cumulative_violations},
            {"worst", margin(cumulative_checked, cumulative_worst)}}},
          {"gain",
           {{"checked", cumulative_checked},
            {"violations", gain_violations},
            {"worst", margin(cumulative_checked, gain_worst)}}},
          {"skipped", skipped}};
}

LyapunovReport lyapunov_spot_check(const SimulationTrace& tr, const FilterRealization& fr,
                                   const LyapunovCertificate& cert) {
  const AugmentedSystem& aug = fr.aug;
  const Mat& P = cert.P;
  if (P.rows() != aug.dims.n_z || P.cols() != aug.dims.n_z) throw DimensionMismatch("certificate P");
  if (tr.e.cols() != aug.dims.n_z) throw DimensionMismatch("trace error width");

  const Mat PM = P * fr.M;
  const Mat Q = P * fr.K;
  const Mat R = P * fr.E;
  const Mat PMA_QC = PM * aug.A_a - Q * aug.C_a;
  const Mat S11 = PMA_QC + PMA_QC.transpose();
  const Mat PMS = PM * aug.S_ga;
  const Mat VJC = aug.V_ga - fr.J * aug.C_a;
  const Mat JD = fr.J * aug.D_nu;
  const Mat PMB = PM * aug.B_omega_a;
  const Mat QD = Q * aug.D_nu;
  const Mat RD = R * aug.D_nu;
  const double alpha = cert.alpha;

  const Eigen::Index N = tr.samples();
  const Mat wa = tr.omega_a();
  const bool noise_free = max_abs(tr.nu) == 0.0;
  const bool have_nu_dot = tr.nu_dot_available && tr.nu_dot.cols() == tr.nu.cols();

  LyapunovReport rep;
  rep.points = static_cast<int>(N);
  Vec W(N);
  for (Eigen::Index k = 0; k < N; ++k) {
    const Vec e = tr.e.row(k).transpose();
    W(k) = e.dot(P * e);
  }

  rep.decay_checked = (noise_free || have_nu_dot) && N >= 5;
  rep.dissipation_checked = noise_free && N >= 5;
  // Central differences carry an error of about h^2 W''' / 6; W''' is estimated
  // from a five-point third difference, so the stencil spans k - 2 .. k + 2.
  std::size_t bp = 0;
  for (Eigen::Index k = 2; k + 2 < N; ++k) {
    while (bp < tr.breakpoints.size() && tr.breakpoints[bp] < tr.t(k - 2) - 1e-12) ++bp;
    if (bp < tr.breakpoints.size() && tr.breakpoints[bp] <= tr.t(k + 2) + 1e-12) {
      ++rep.skipped;
      continue;
    }
    const double h = (tr.t(k + 1) - tr.t(k - 1)) / 2.0;
    const double tol_rel = 10.0 * h * h;
    const double Wdot = (W(k + 1) - W(k - 1)) / (2.0 * h);
    const double W3 = std::abs(W(k + 2) - 2.0 * W(k + 1) + 2.0 * W(k - 1) - W(k - 2)) / (2.0 * h * h * h);
    const Vec e = tr.e.row(k).transpose();
    const Vec w = wa.row(k).transpose();
    const double supply = -2.0 * e.dot(PMB * w);
    if (rep.decay_checked) {
      const Vec nu = tr.nu.row(k).transpose();
      const Vec nu_dot = have_nu_dot ? Vec(tr.nu_dot.row(k).transpose()) : Vec::Zero(nu.size());
      const double t_lin = e.dot(S11 * e);
      const double t_g = alpha > 0.0 ? 2.0 * alpha * (PMS.transpose() * e).squaredNorm() : 0.0;
      const double t_v = alpha > 0.0 ? 0.5 * alpha * (VJC * e + JD * nu).squaredNorm() : 0.0;
      const double t_n = 2.0 * e.dot(QD * nu - RD * nu_dot);
      const double bound = t_lin + t_g + t_v + supply + t_n;
      const double scale = std::abs(Wdot) + std::abs(t_lin) + t_g + t_v + std::abs(supply) + std::abs(t_n);
      const double excess = Wdot - bound;
      rep.decay_worst = std::max(rep.decay_worst, excess);
      if (excess > tol_rel * (scale + W3) + 1e-12) ++rep.decay_violations;
    }
    if (rep.dissipation_checked) {
      const double ef = cert.a * row_sq(tr.e_f, k);
      const double ww = cert.a * cert.rho * w.squaredNorm();
      const double excess = Wdot + ef - ww;
      rep.dissipation_worst = std::max(rep.dissipation_worst, excess);
      if (excess > tol_rel * (std::abs(Wdot) + ef + ww + W3) + 1e-12) ++rep.dissipation_violations;
    }
  }

  rep.cumulative_checked = noise_free;
  if (noise_free) {
    const Vec lhs = cumulative_energy(tr.t, tr.e_f);
    const Vec wint = cumulative_energy(tr.t, wa);
    const double W0 = N > 0 ? W(0) : 0.0;
    for (Eigen::Index k = 0; k < N; ++k) {
      const double h = k > 0 ? tr.t(k) - tr.t(k - 1) : (N > 1 ? tr.t(1) - tr.t(0) : 0.0);
      const double tol = 10.0 * h * h;
      const double supply = cert.a * cert.rho * wint(k);
      const double stored = W(k) + cert.a * lhs(k);
      const double excess = stored - W0 - supply;
      rep.cumulative_worst = std::max(rep.cumulative_worst, excess);
      if (excess > tol * (stored + W0 + supply) + 1e-14) ++rep.cumulative_violations;
      const double g_rhs = cert.rho * wint(k) + W0 / cert.a;
      const double g_excess = lhs(k) - g_rhs;
      rep.gain_worst = std::max(rep.gain_worst, g_excess);
      if (g_excess > tol * (lhs(k) + g_rhs) + 1e-14) ++rep.gain_violations;
    }
  }
  return rep;
}

}  // namespace faultest
