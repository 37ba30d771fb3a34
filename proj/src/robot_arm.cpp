#include "faultest/robot_arm.hpp"

namespace faultest {

RobotArmParams RobotArmParams::from_json(const nlohmann::json& j) {
  RobotArmParams p;
  p.J_l = j.value("J_l", p.J_l);
  p.J_m = j.value("J_m", p.J_m);
  p.F_l = j.value("F_l", p.F_l);
  p.F_m = j.value("F_m", p.F_m);
  p.k_s = j.value("k_s", p.k_s);
  p.dk_s = j.value("dk_s", p.dk_s);
  p.m = j.value("m", p.m);
  p.g = j.value("g", p.g);
  p.c = j.value("c", p.c);
  p.dc = j.value("dc", p.dc);
  p.k_tau = j.value("k_tau", p.k_tau);
  return p;
}

nlohmann::json RobotArmParams::to_json() const {
  return {{"J_l", J_l}, {"J_m", J_m}, {"F_l", F_l}, {"F_m", F_m}, {"k_s", k_s},     {"dk_s", dk_s},
          {"m", m},     {"g", g},     {"c", c},     {"dc", dc},   {"k_tau", k_tau}};
}

ValidatedPlant build_robot_arm(const RobotArmParams& p) {
  PlantModel pm;
  pm.A = Mat::Zero(4, 4);
  pm.A << -p.F_m / p.J_m, -p.k_s / p.J_m, 0, p.k_s / p.J_m,  //
      1, 0, 0, 0,                                            //
      0, p.k_s / p.J_l, -p.F_l / p.J_l, -p.k_s / p.J_l,      //
      0, 0, 1, 0;
  pm.B_u = Mat::Zero(4, 1);
  pm.B_u(0, 0) = p.k_tau / p.J_m;
  pm.S_g = Mat::Zero(4, 1);
  pm.S_g(2, 0) = -p.m * p.g * p.c / p.J_l;
  pm.V_g = Mat::Zero(1, 4);
  pm.V_g(0, 3) = 1.0;
  pm.g = make_nonlinearity("sin", {{"input_dim", 1}});
  pm.alpha_g = 1.0;
  pm.S_eta = Mat::Zero(4, 2);
  pm.S_eta(0, 0) = 1.0;
  pm.S_eta(2, 1) = 1.0;
  pm.V_eta = Mat::Zero(2, 4);
  pm.V_eta(0, 1) = 1.0;
  pm.V_eta(1, 3) = 1.0;
  pm.B_f = Mat::Zero(4, 1);
  pm.B_f(0, 0) = 1.0;
  pm.B_omega = Mat::Zero(4, 1);
  pm.B_omega(2, 0) = 1.0;
  pm.C = Mat::Zero(2, 4);
  pm.C(0, 1) = 1.0;
  pm.C(1, 3) = 1.0;
  pm.D_f = Mat::Zero(2, 1);
  pm.D_nu = Mat::Identity(2, 2);
  return validate_plant(pm);
}

Nonlinearity robot_arm_true_eta(const RobotArmParams& p) {
  return make_nonlinearity("robot-arm-eta",
                           {{"dks", p.dk_s}, {"dc", p.dc}, {"Jm", p.J_m}, {"Jl", p.J_l}, {"m", p.m}, {"g", p.g}});
}

Mat robot_arm_theta_x(const RobotArmParams& p) {
  Mat theta(2, 2);
  theta << -p.dk_s / p.J_m, p.dk_s / p.J_m,  //
      p.dk_s / p.J_l, -p.dk_s / p.J_l;
  return theta;
}

}  // namespace faultest
