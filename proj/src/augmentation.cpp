#include "faultest/augmentation.hpp"

#include <algorithm>

#include "faultest/errors.hpp"

namespace faultest {

FaultChain build_fault_internal_model(int n_f, int r) {
  if (n_f < 1 || r < 1) {
    throw InvalidOrder("fault internal model needs n_f >= 1 and r >= 1 (got n_f = " +
                       std::to_string(n_f) + ", r = " + std::to_string(r) + ")");
  }
  const int dim = r * n_f;
  FaultChain fc;
  fc.chain = Mat::Zero(dim, dim);
  for (int j = 0; j + 1 < r; ++j) {
    fc.chain.block(j * n_f, (j + 1) * n_f, n_f, n_f).setIdentity();
  }
  fc.selector = Mat::Zero(n_f, dim);
  fc.selector.leftCols(n_f).setIdentity();
  return fc;
}

AugmentedSystem augment(const ValidatedPlant& plant, const UncertaintyModel& model, int r) {
  validate_uncertainty_model(model, plant);
  const auto& p = plant.model();
  const auto& d = plant.dims();
  const FaultChain fc = build_fault_internal_model(d.n_f, r);

  AugmentedSystem aug{.plant = plant, .model = model};
  auto& ad = aug.dims;
  ad.n = d.n;
  ad.n_f = d.n_f;
  ad.r = r;
  ad.n_z = d.n + r * d.n_f;
  ad.m = d.m;
  ad.m_nu = d.m_nu;
  ad.n_deta = d.n_eta;
  ad.n_omega = d.n_omega;
  const int n = d.n;
  const int n_z = ad.n_z;
  const int chain = r * d.n_f;

  Mat A_top = p.A;
  if (model.kind == UncertaintyKind::LinearState) A_top += p.S_eta * model.theta_x * p.V_eta;

  aug.A_a = Mat::Zero(n_z, n_z);
  aug.A_a.topLeftCorner(n, n) = A_top;
  aug.A_a.block(0, n, n, d.n_f) = p.B_f;
  aug.A_a.bottomRightCorner(chain, chain) = fc.chain;

  aug.C_a = Mat::Zero(d.m, n_z);
  aug.C_a.leftCols(n) = p.C;
  aug.C_a.block(0, n, d.m, d.n_f) = p.D_f;

  aug.C_bar = Mat::Zero(d.n_f, n_z);
  aug.C_bar.rightCols(chain) = fc.selector;

  aug.D_nu = p.D_nu;

  // Block rows: state, chain except last, last. The middle block vanishes for r = 1.
  aug.B_omega_a = Mat::Zero(n_z, ad.n_omega_a());
  aug.B_omega_a.block(0, 0, n, d.n_eta) = p.S_eta;
  aug.B_omega_a.block(0, d.n_eta, n, d.n_omega) = p.B_omega;
  aug.B_omega_a.block(n_z - d.n_f, d.n_eta + d.n_omega, d.n_f, d.n_f).setIdentity();

  const Nonlinearity g = p.g;
  const int l = d.l;

  if (model.kind == UncertaintyKind::NonlinearState) {
    const Nonlinearity eta = *model.eta_lx;
    ad.n_ga = d.n_g + d.n_eta;
    ad.n_vga = d.n_vg + d.n_veta;
    ad.l_a = l;
    aug.S_ga = Mat::Zero(n_z, ad.n_ga);
    aug.S_ga.topLeftCorner(n, d.n_g) = p.S_g;
    aug.S_ga.block(0, d.n_g, n, d.n_eta) = p.S_eta;
    aug.V_ga = Mat::Zero(ad.n_vga, n_z);
    aug.V_ga.topLeftCorner(d.n_vg, n) = p.V_g;
    aug.V_ga.block(d.n_vg, 0, d.n_veta, n) = p.V_eta;
    aug.alpha = std::max(p.alpha_g, eta.lipschitz);
    const int n_vg = d.n_vg;
    const int n_veta = d.n_veta;
    aug.g_a = [g, eta, n_vg, n_veta](const Vec& v, const Vec& u_a, double t) {
      Vec out(g.output_dim + eta.output_dim);
      out << g(v.head(n_vg), u_a, t), eta(v.segment(n_vg, n_veta), u_a, t);
      return out;
    };
    aug.B_ua = Mat::Zero(n_z, l);
    aug.B_ua.topRows(n) = p.B_u;
    aug.u_a_builder = [](const Vec& u, const Vec&, double) { return u; };
    return aug;
  }

  ad.n_ga = d.n_g;
  ad.n_vga = d.n_vg;
  aug.S_ga = Mat::Zero(n_z, d.n_g);
  aug.S_ga.topRows(n) = p.S_g;
  aug.V_ga = Mat::Zero(d.n_vg, n_z);
  aug.V_ga.leftCols(n) = p.V_g;
  aug.alpha = p.alpha_g;
  aug.g_a = [g, l](const Vec& v, const Vec& u_a, double t) { return g(v, u_a.head(l), t); };

  if (model.kind == UncertaintyKind::LinearState) {
    ad.l_a = l;
    aug.B_ua = Mat::Zero(n_z, l);
    aug.B_ua.topRows(n) = p.B_u;
    aug.u_a_builder = [](const Vec& u, const Vec&, double) { return u; };
    return aug;
  }

  // none / linear-output: u_a = (u, eta_ly(T_eta y)), eta_ly = 0 for kind none.
  ad.l_a = l + d.n_eta;
  aug.B_ua = Mat::Zero(n_z, ad.l_a);
  aug.B_ua.topLeftCorner(n, l) = p.B_u;
  aug.B_ua.block(0, l, n, d.n_eta) = p.S_eta;
  const int n_eta = d.n_eta;
  if (model.kind == UncertaintyKind::LinearOutput) {
    const Mat gain = model.theta_y * model.T_eta;
    aug.u_a_builder = [gain, l, n_eta](const Vec& u, const Vec& y, double) {
      Vec u_a(l + n_eta);
      u_a << u, gain * y;
      return u_a;
    };
  } else {
    aug.u_a_builder = [l, n_eta](const Vec& u, const Vec&, double) {
      Vec u_a = Vec::Zero(l + n_eta);
      u_a.head(l) = u;
      return u_a;
    };
  }
  return aug;
}

Vec stack_augmented_state(const AugmentedSystem& aug, const Vec& x, const Mat& fault_derivs) {
  const auto& d = aug.dims;
  if (x.size() != d.n || fault_derivs.rows() != d.n_f || fault_derivs.cols() < d.r) {
    throw DimensionMismatch("stack_augmented_state: state or fault derivative shape");
  }
  Vec x_a(d.n_z);
  x_a.head(d.n) = x;
  for (int j = 0; j < d.r; ++j) x_a.segment(d.n + j * d.n_f, d.n_f) = fault_derivs.col(j);
  return x_a;
}

}  // namespace faultest
