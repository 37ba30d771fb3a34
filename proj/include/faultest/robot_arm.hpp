#pragma once

#include "faultest/plant.hpp"

namespace faultest {

/// Single-link arm with a revolute elastic joint. State (motor speed, motor
/// angle, link speed, link angle); outputs are the two angles.
struct RobotArmParams {
  double J_l = 4.5;
  double J_m = 1.0;
  double F_l = 0.5;
  double F_m = 1.0;
  double k_s = 2.0;
  double dk_s = -0.5;  // stiffness deviation, -0.25 k_s
  double m = 4.0;
  double g = 9.8;
  double c = 0.5;
  double dc = 0.125;  // mass-center deviation, 0.25 c
  double k_tau = 1.0;

  static RobotArmParams from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

ValidatedPlant build_robot_arm(const RobotArmParams& p = {});

/// eta(x) for the given deviations, as a function of (x2, x4).
Nonlinearity robot_arm_true_eta(const RobotArmParams& p = {});

/// Linear prior of the stiffness part: eta_lx = Theta_x (x2, x4).
Mat robot_arm_theta_x(const RobotArmParams& p = {});

}  // namespace faultest
