#pragma once

#include <functional>
#include <optional>
#include <string>

#include <Eigen/Dense>
#include <json.hpp>

namespace faultest {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A registered nonlinear map v -> phi(v, u, t), where v is a projection of the
/// state (V x) or of the output. The design math only ever uses the Lipschitz
/// constant, never derivatives of `fn`.
struct Nonlinearity {
  using Fn = std::function<Vec(const Vec& v, const Vec& u, double t)>;

  std::string name;
  std::string params_json = "{}";
  int input_dim = 0;
  int output_dim = 0;
  double lipschitz = 0.0;
  Fn fn;

  Vec operator()(const Vec& v, const Vec& u, double t) const { return fn(v, u, t); }
};

/// Builds a nonlinearity from the registry. Known names:
///   "zero"          {"input_dim", "output_dim"}
///   "sin"           {"input_dim", "scale"=1}        out_i = scale * sin(v_i)
///   "linear"        {"matrix"}                      out = matrix * v
///   "robot-arm-eta" {"dks","dc","Jm","Jl","m","g"}  flexible-joint stiffness/mass uncertainty
/// Throws ConfigError for unknown names or malformed parameters.
Nonlinearity make_nonlinearity(const std::string& name, const nlohmann::json& params);
Nonlinearity zero_nonlinearity(int input_dim, int output_dim);

/// The uncertain nonlinear plant
///   xdot = A x + B_u u + S_g g(V_g x,u,t) + S_eta eta(V_eta x,u,t) + B_f f + B_omega omega
///   y    = C x + D_f f + D_nu nu
struct PlantModel {
  Mat A, B_u, S_g, V_g, S_eta, V_eta, B_f, B_omega, C, D_f, D_nu;
  Nonlinearity g;
  double alpha_g = 0.0;
};

struct PlantDimensions {
  int n = 0, m = 0, l = 0;
  int n_g = 0, n_vg = 0;
  int n_eta = 0, n_veta = 0;
  int n_f = 0, n_omega = 0, m_nu = 0;
};

/// A plant that passed validate_plant. Immutable.
class ValidatedPlant {
 public:
  const PlantModel& model() const { return model_; }
  const PlantDimensions& dims() const { return dims_; }
  int rank_D_f() const { return rank_D_f_; }

 private:
  friend ValidatedPlant validate_plant(const PlantModel& p);
  ValidatedPlant(PlantModel model, PlantDimensions dims, int rank)
      : model_(std::move(model)), dims_(dims), rank_D_f_(rank) {}

  PlantModel model_;
  PlantDimensions dims_;
  int rank_D_f_ = 0;
};

/// Checks shapes, alpha_g >= 0 and rank(D_f) < m.
/// Throws DimensionMismatch or SensorFaultRankViolation.
ValidatedPlant validate_plant(const PlantModel& p);
inline ValidatedPlant validate_plant(const ValidatedPlant& p) { return validate_plant(p.model()); }

/// Numerical rank with tolerance 1e-9 * sigma_max.
int numerical_rank(const Mat& M);

enum class UncertaintyKind { None, LinearState, LinearOutput, NonlinearState };

std::string to_string(UncertaintyKind kind);
UncertaintyKind uncertainty_kind_from_string(const std::string& s);

/// Prior model eta_l of the uncertainty; the residual eta - eta_l is a
/// perturbation the estimator is robustified against.
struct UncertaintyModel {
  UncertaintyKind kind = UncertaintyKind::None;
  Mat theta_x;                       // n_eta x n_veta
  Mat theta_y;                       // n_eta x n_ty
  Mat T_eta;                         // n_ty x m
  std::optional<Nonlinearity> eta_lx;

  static UncertaintyModel none();
  static UncertaintyModel linear_state(Mat theta_x);
  static UncertaintyModel linear_output(Mat theta_y, Mat T_eta);
  static UncertaintyModel nonlinear_state(Nonlinearity eta_lx);

  double alpha_eta() const { return eta_lx ? eta_lx->lipschitz : 0.0; }
};

/// Throws DimensionMismatch or ConfigError when the model does not fit the plant.
void validate_uncertainty_model(const UncertaintyModel& um, const ValidatedPlant& plant);

enum class SignalKind { State, Output };

/// Evaluates the prior uncertainty model. State kinds expect the full state x,
/// the linear-output kind expects the measured output y; kind None accepts
/// either and returns zero. Throws KindArgumentMismatch.
Vec eval_uncertainty_model(const UncertaintyModel& um, const ValidatedPlant& plant,
                           SignalKind arg_kind, const Vec& arg, const Vec& u, double t);

/// JSON plant document: matrices as row-major nested arrays, nonlinearities as
/// {"name": ..., "params": {...}}.
PlantModel plant_from_json(const nlohmann::json& doc);
nlohmann::json plant_to_json(const PlantModel& p);

Mat matrix_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Mat& M);

}  // namespace faultest
