#include "faultest/plant.hpp"

#include <cmath>
#include <sstream>

#include "faultest/errors.hpp"

namespace faultest {
namespace {

std::string shape(const Mat& M) {
  std::ostringstream os;
  os << M.rows() << "x" << M.cols();
  return os.str();
}

void require_shape(const Mat& M, const char* name, Eigen::Index rows, Eigen::Index cols) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << name << " is " << shape(M) << ", expected " << rows << "x" << cols;
    throw DimensionMismatch(os.str());
  }
}

int param_int(const nlohmann::json& p, const char* key, int fallback) {
  return p.contains(key) ? p.at(key).get<int>() : fallback;
}

double param_double(const nlohmann::json& p, const char* key) {
  if (!p.contains(key)) throw ConfigError(std::string("missing nonlinearity parameter '") + key + "'");
  return p.at(key).get<double>();
}

// Empty JSON arrays come back as 0x0; give them the orientation the plant needs.
Mat fix_empty(Mat M, Eigen::Index rows, Eigen::Index cols) {
  if (M.size() == 0) return Mat::Zero(rows, cols);
  return M;
}

}  // namespace

Nonlinearity zero_nonlinearity(int input_dim, int output_dim) {
  Nonlinearity nl;
  nl.name = "zero";
  nl.params_json = nlohmann::json{{"input_dim", input_dim}, {"output_dim", output_dim}}.dump();
  nl.input_dim = input_dim;
  nl.output_dim = output_dim;
  nl.lipschitz = 0.0;
  nl.fn = [output_dim](const Vec&, const Vec&, double) { return Vec::Zero(output_dim).eval(); };
  return nl;
}

Nonlinearity make_nonlinearity(const std::string& name, const nlohmann::json& params) {
  if (name == "zero") {
    return zero_nonlinearity(param_int(params, "input_dim", 0), param_int(params, "output_dim", 0));
  }
  Nonlinearity nl;
  nl.name = name;
  nl.params_json = params.dump();
  if (name == "sin") {
    const int dim = param_int(params, "input_dim", 1);
    const double scale = params.contains("scale") ? params.at("scale").get<double>() : 1.0;
    nl.input_dim = dim;
    nl.output_dim = dim;
    nl.lipschitz = std::abs(scale);
    nl.fn = [scale](const Vec& v, const Vec&, double) { return (scale * v.array().sin()).matrix().eval(); };
    return nl;
  }
  if (name == "linear") {
    if (!params.contains("matrix")) throw ConfigError("linear nonlinearity needs 'matrix'");
    Mat theta = matrix_from_json(params.at("matrix"));
    nl.input_dim = static_cast<int>(theta.cols());
    nl.output_dim = static_cast<int>(theta.rows());
    nl.lipschitz = theta.size() ? Eigen::JacobiSVD<Mat>(theta).singularValues()(0) : 0.0;
    nl.fn = [theta](const Vec& v, const Vec&, double) { return (theta * v).eval(); };
    return nl;
  }
  if (name == "robot-arm-eta") {
    const double dks = param_double(params, "dks");
    const double dc = param_double(params, "dc");
    const double Jm = param_double(params, "Jm");
    const double Jl = param_double(params, "Jl");
    const double m = param_double(params, "m");
    const double g = param_double(params, "g");
    nl.input_dim = 2;  // (q_m, q_l)
    nl.output_dim = 2;
    // The Jacobian norm is convex in cos(q_l), so its sup sits at cos = +-1.
    double lip = 0.0;
    for (double c : {-1.0, 1.0}) {
      Eigen::Matrix2d jac;
      jac << -dks / Jm, dks / Jm, dks / Jl, -dks / Jl - m * g * dc / Jl * c;
      lip = std::max(lip, Eigen::JacobiSVD<Eigen::Matrix2d>(jac).singularValues()(0));
    }
    nl.lipschitz = lip;
    nl.fn = [=](const Vec& v, const Vec&, double) {
      Vec out(2);
      out(0) = dks / Jm * (v(1) - v(0));
      out(1) = dks / Jl * (v(0) - v(1)) - m * g * dc / Jl * std::sin(v(1));
      return out;
    };
    return nl;
  }
  throw ConfigError("unknown nonlinearity '" + name + "'");
}

int numerical_rank(const Mat& M) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(M);
  const Vec& s = svd.singularValues();
  if (s(0) == 0.0) return 0;
  const double tol = 1e-9 * s(0);
  return static_cast<int>((s.array() > tol).count());
}

ValidatedPlant validate_plant(const PlantModel& p) {
  PlantDimensions d;
  if (p.A.rows() != p.A.cols() || p.A.rows() == 0) {
    throw DimensionMismatch("A is " + shape(p.A) + ", expected a nonempty square matrix");
  }
  d.n = static_cast<int>(p.A.rows());
  d.m = static_cast<int>(p.C.rows());
  d.l = static_cast<int>(p.B_u.cols());
  d.n_g = static_cast<int>(p.S_g.cols());
  d.n_vg = static_cast<int>(p.V_g.rows());
  d.n_eta = static_cast<int>(p.S_eta.cols());
  d.n_veta = static_cast<int>(p.V_eta.rows());
  d.n_f = static_cast<int>(p.B_f.cols());
  d.n_omega = static_cast<int>(p.B_omega.cols());
  d.m_nu = static_cast<int>(p.D_nu.cols());
  if (d.m == 0) throw DimensionMismatch("C has no rows");

  require_shape(p.B_u, "B_u", d.n, d.l);
  require_shape(p.S_g, "S_g", d.n, d.n_g);
  require_shape(p.V_g, "V_g", d.n_vg, d.n);
  require_shape(p.S_eta, "S_eta", d.n, d.n_eta);
  require_shape(p.V_eta, "V_eta", d.n_veta, d.n);
  require_shape(p.B_f, "B_f", d.n, d.n_f);
  require_shape(p.B_omega, "B_omega", d.n, d.n_omega);
  require_shape(p.C, "C", d.m, d.n);
  require_shape(p.D_f, "D_f", d.m, d.n_f);
  require_shape(p.D_nu, "D_nu", d.m, d.m_nu);

  PlantModel model = p;
  if (!model.g.fn) {
    if (d.n_g != 0) throw ConfigError("S_g has columns but no nonlinearity g was given");
    model.g = zero_nonlinearity(d.n_vg, 0);
  }
  if (model.g.output_dim != d.n_g || model.g.input_dim != d.n_vg) {
    std::ostringstream os;
    os << "g maps R^" << model.g.input_dim << " -> R^" << model.g.output_dim << ", expected R^"
       << d.n_vg << " -> R^" << d.n_g;
    throw DimensionMismatch(os.str());
  }
  if (!(p.alpha_g >= 0.0) || !(model.g.lipschitz >= 0.0)) {
    throw ConfigError("Lipschitz constant alpha_g must be nonnegative");
  }
  model.alpha_g = std::max(p.alpha_g, model.g.lipschitz);

  const int rank = numerical_rank(p.D_f);
  if (rank >= d.m) throw SensorFaultRankViolation(rank, d.m);
  return ValidatedPlant(std::move(model), d, rank);
}

std::string to_string(UncertaintyKind kind) {
  switch (kind) {
    case UncertaintyKind::None: return "none";
    case UncertaintyKind::LinearState: return "linear-state";
    case UncertaintyKind::LinearOutput: return "linear-output";
    case UncertaintyKind::NonlinearState: return "nonlinear-state";
  }
  return "unknown";
}

UncertaintyKind uncertainty_kind_from_string(const std::string& s) {
  if (s == "none") return UncertaintyKind::None;
  if (s == "linear-state") return UncertaintyKind::LinearState;
  if (s == "linear-output") return UncertaintyKind::LinearOutput;
  if (s == "nonlinear-state") return UncertaintyKind::NonlinearState;
  throw ConfigError("unknown uncertainty-model kind '" + s + "'");
}

UncertaintyModel UncertaintyModel::none() { return {}; }

UncertaintyModel UncertaintyModel::linear_state(Mat theta_x) {
  UncertaintyModel um;
  um.kind = UncertaintyKind::LinearState;
  um.theta_x = std::move(theta_x);
  return um;
}

UncertaintyModel UncertaintyModel::linear_output(Mat theta_y, Mat T_eta) {
  UncertaintyModel um;
  um.kind = UncertaintyKind::LinearOutput;
  um.theta_y = std::move(theta_y);
  um.T_eta = std::move(T_eta);
  return um;
}

UncertaintyModel UncertaintyModel::nonlinear_state(Nonlinearity eta_lx) {
  UncertaintyModel um;
  um.kind = UncertaintyKind::NonlinearState;
  um.eta_lx = std::move(eta_lx);
  return um;
}

void validate_uncertainty_model(const UncertaintyModel& um, const ValidatedPlant& plant) {
  const auto& d = plant.dims();
  const bool has_x = um.theta_x.size() > 0;
  const bool has_y = um.theta_y.size() > 0 || um.T_eta.size() > 0;
  const bool has_nl = um.eta_lx.has_value();
  switch (um.kind) {
    case UncertaintyKind::None:
      if (has_x || has_y || has_nl) throw ConfigError("uncertainty kind 'none' carries model data");
      return;
    case UncertaintyKind::LinearState:
      if (has_y || has_nl) throw ConfigError("linear-state model carries foreign fields");
      require_shape(um.theta_x, "Theta_x", d.n_eta, d.n_veta);
      return;
    case UncertaintyKind::LinearOutput:
      if (has_x || has_nl) throw ConfigError("linear-output model carries foreign fields");
      require_shape(um.T_eta, "T_eta", um.T_eta.rows(), d.m);
      require_shape(um.theta_y, "Theta_y", d.n_eta, um.T_eta.rows());
      return;
    case UncertaintyKind::NonlinearState:
      if (has_x || has_y || !has_nl) throw ConfigError("nonlinear-state model needs eta_lx only");
      if (um.eta_lx->input_dim != d.n_veta || um.eta_lx->output_dim != d.n_eta) {
        throw DimensionMismatch("eta_lx does not map R^n_veta -> R^n_eta");
      }
      if (!(um.eta_lx->lipschitz >= 0.0)) throw ConfigError("alpha_eta must be nonnegative");
      return;
  }
}

Vec eval_uncertainty_model(const UncertaintyModel& um, const ValidatedPlant& plant,
                           SignalKind arg_kind, const Vec& arg, const Vec& u, double t) {
  const auto& d = plant.dims();
  const auto& p = plant.model();
  const auto expect = [&](SignalKind k) {
    if (arg_kind != k) {
      throw KindArgumentMismatch("uncertainty model '" + to_string(um.kind) + "' expects " +
                                 (k == SignalKind::State ? "a state" : "an output"));
    }
    const Eigen::Index want = k == SignalKind::State ? d.n : d.m;
    if (arg.size() != want) throw DimensionMismatch("uncertainty model argument has wrong length");
  };
  switch (um.kind) {
    case UncertaintyKind::None:
      return Vec::Zero(d.n_eta);
    case UncertaintyKind::LinearState:
      expect(SignalKind::State);
      return um.theta_x * (p.V_eta * arg);
    case UncertaintyKind::LinearOutput:
      expect(SignalKind::Output);
      return um.theta_y * (um.T_eta * arg);
    case UncertaintyKind::NonlinearState:
      expect(SignalKind::State);
      return (*um.eta_lx)(p.V_eta * arg, u, t);
  }
  return Vec::Zero(d.n_eta);
}

Mat matrix_from_json(const nlohmann::json& j) {
  if (j.is_number()) {
    Mat M(1, 1);
    M(0, 0) = j.get<double>();
    return M;
  }
  if (!j.is_array()) throw ConfigError("matrix must be a nested array");
  if (j.empty()) return Mat(0, 0);
  // A flat array of numbers is a column vector.
  if (!j.front().is_array()) {
    Mat M(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) M(static_cast<Eigen::Index>(i), 0) = j[i].get<double>();
    return M;
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Mat M(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError("ragged matrix rows");
    }
    for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return M;
}

nlohmann::json matrix_to_json(const Mat& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < M.cols(); ++c) row.push_back(M(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

PlantModel plant_from_json(const nlohmann::json& doc) {
  PlantModel p;
  const auto get = [&](const char* key) -> Mat {
    return doc.contains(key) ? matrix_from_json(doc.at(key)) : Mat(0, 0);
  };
  p.A = get("A");
  const Eigen::Index n = p.A.rows();
  p.C = get("C");
  const Eigen::Index m = p.C.rows();
  p.B_u = fix_empty(get("B_u"), n, 0);
  p.S_g = fix_empty(get("S_g"), n, 0);
  p.V_g = fix_empty(get("V_g"), 0, n);
  p.S_eta = fix_empty(get("S_eta"), n, 0);
  p.V_eta = fix_empty(get("V_eta"), 0, n);
  p.B_f = fix_empty(get("B_f"), n, 0);
  p.B_omega = fix_empty(get("B_omega"), n, 0);
  p.D_f = fix_empty(get("D_f"), m, p.B_f.cols());
  p.D_nu = fix_empty(get("D_nu"), m, 0);
  if (doc.contains("g")) {
    const auto& g = doc.at("g");
    p.g = make_nonlinearity(g.at("name").get<std::string>(), g.value("params", nlohmann::json::object()));
  }
  p.alpha_g = doc.value("alpha_g", p.g.lipschitz);
  return p;
}

nlohmann::json plant_to_json(const PlantModel& p) {
  nlohmann::json doc;
  doc["A"] = matrix_to_json(p.A);
  doc["B_u"] = matrix_to_json(p.B_u);
  doc["S_g"] = matrix_to_json(p.S_g);
  doc["V_g"] = matrix_to_json(p.V_g);
  doc["S_eta"] = matrix_to_json(p.S_eta);
  doc["V_eta"] = matrix_to_json(p.V_eta);
  doc["B_f"] = matrix_to_json(p.B_f);
  doc["B_omega"] = matrix_to_json(p.B_omega);
  doc["C"] = matrix_to_json(p.C);
  doc["D_f"] = matrix_to_json(p.D_f);
  doc["D_nu"] = matrix_to_json(p.D_nu);
  if (p.g.fn) doc["g"] = {{"name", p.g.name}, {"params", nlohmann::json::parse(p.g.params_json)}};
  doc["alpha_g"] = p.alpha_g;
  return doc;
}

}  // namespace faultest
