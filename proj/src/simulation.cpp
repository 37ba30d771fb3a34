#include "faultest/simulation.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "faultest/errors.hpp"

namespace faultest {

long rk4_step_count(double t0, double t1, double h) {
  if (!(h > 0.0)) throw ConfigError("integration step must be positive");
  if (!(t1 >= t0)) throw ConfigError("integration horizon must be non-negative");
  const double ratio = (t1 - t0) / h;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, steps)) {
    throw ConfigError("horizon " + std::to_string(t1 - t0) + " is not a multiple of the step " + std::to_string(h));
  }
  return static_cast<long>(steps);
}

Rk4Trace integrate_rk4(const StepRhs& rhs, const Vec& x0, double t0, double t1, double h) {
  const long steps = rk4_step_count(t0, t1, h);
  Rk4Trace out;
  out.t.reserve(static_cast<std::size_t>(steps) + 1);
  out.x.reserve(static_cast<std::size_t>(steps) + 1);
  if (!x0.allFinite()) throw NonFiniteState(t0);
  out.t.push_back(t0);
  out.x.push_back(x0);
  Vec x = x0;
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + static_cast<double>(k) * h;
    const Vec k1 = rhs(t, x, t);
    const Vec k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1, t);
    const Vec k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2, t);
    const Vec k4 = rhs(t + h, x + h * k3, t);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const double t_next = t0 + static_cast<double>(k + 1) * h;
    if (!x.allFinite()) throw NonFiniteState(t_next);
    out.t.push_back(t_next);
    out.x.push_back(x);
  }
  return out;
}

Rk4Trace integrate_rk4(const PlainRhs& rhs, const Vec& x0, double t0, double t1, double h) {
  return integrate_rk4(StepRhs([&rhs](double t, const Vec& x, double) { return rhs(t, x); }), x0, t0, t1, h);
}

Mat SimulationTrace::omega_a() const {
  Mat out(samples(), delta_eta.cols() + omega.cols() + f_r.cols());
  out << delta_eta, omega, f_r;
  return out;
}

namespace {

Mat fault_derivatives(const Signal& fault, double t, int r) {
  Mat d(fault.dim(), r);
  for (int k = 0; k < r; ++k) {
    const auto v = fault.derivative(t, k);
    if (!v) throw ConfigError("the fault signal must be differentiable when r > 1");
    d.col(k) = *v;
  }
  return d;
}

void check_dim(const SignalSpec& s, int expected, const char* name) {
  if (s.dim != expected) {
    throw DimensionMismatch(std::string(name) + " signal has dimension " + std::to_string(s.dim) + ", expected " +
                            std::to_string(expected));
  }
}

struct PlantStepper {
  const PlantModel& p;
  const UncertaintyFn& eta;
  int n_eta;

  Vec eta_at(const Vec& x, const Vec& u, double t) const {
    if (!eta || n_eta == 0) return Vec::Zero(n_eta);
    return eta(p.V_eta * x, u, t);
  }
  Vec output(const Vec& x, const Vec& f, const Vec& nu) const { return p.C * x + p.D_f * f + p.D_nu * nu; }
  Vec xdot(const Vec& x, const Vec& u, const Vec& f, const Vec& w, double t) const {
    Vec dx = p.A * x + p.B_u * u + p.B_f * f + p.B_omega * w;
    if (p.S_g.cols() > 0) dx += p.S_g * p.g(p.V_g * x, u, t);
    if (n_eta > 0) dx += p.S_eta * eta_at(x, u, t);
    return dx;
  }
};

}  // namespace

int stable_substeps(const FilterRealization& fr, double step) {
  const auto radius = [](const Mat& M) { return M.size() ? Eigen::EigenSolver<Mat>(M, false).eigenvalues().cwiseAbs().maxCoeff() : 0.0; };
  const double rate = std::max(radius(fr.N), radius(fr.aug.A_a));
  int k = 1;
  while (step / k * rate > 1.0 && k < (1 << 20)) k *= 2;
  return k;
}

Vec manifold_initial_state(const FilterRealization& fr, const Vec& x0, const SignalSpec& fault, double t0) {
  const Signal f(fault, t0 + 1.0);
  return fr.M * stack_augmented_state(fr.aug, x0, fault_derivatives(f, t0, fr.aug.dims.r));
}

Rk4Trace simulate_plant(const ValidatedPlant& plant, const UncertaintyFn& true_eta, const SimulationInputs& in,
                        const Vec& x0, const SimulationOptions& opt) {
  const auto& d = plant.dims();
  check_dim(in.u, d.l, "input");
  check_dim(in.fault, d.n_f, "fault");
  check_dim(in.omega, d.n_omega, "disturbance");
  if (x0.size() != d.n) throw DimensionMismatch("x0");
  const double t1 = opt.t0 + opt.horizon;
  const Signal U(in.u, t1), F(in.fault, t1), W(in.omega, t1);
  const PlantStepper ps{plant.model(), true_eta, d.n_eta};
  return integrate_rk4(
      PlainRhs([&](double t, const Vec& x) { return ps.xdot(x, U.value(t), F.value(t), W.value(t), t); }), x0,
      opt.t0, t1, opt.step);
}

SimulationTrace simulate(const FilterRealization& fr, const UncertaintyFn& true_eta, const SimulationInputs& in,
                         const Vec& x0, const Vec& z0, const SimulationOptions& opt) {
  const AugmentedSystem& aug = fr.aug;
  const ValidatedPlant& plant = aug.plant;
  const PlantModel& p = plant.model();
  const auto& d = plant.dims();
  const auto& ad = aug.dims;
  check_dim(in.u, d.l, "input");
  check_dim(in.fault, d.n_f, "fault");
  check_dim(in.omega, d.n_omega, "disturbance");
  check_dim(in.nu, d.m_nu, "noise");
  if (x0.size() != d.n) throw DimensionMismatch("x0");
  if (z0.size() != ad.n_z) throw DimensionMismatch("z0");

  const double t1 = opt.t0 + opt.horizon;
  const Signal U(in.u, t1), F(in.fault, t1), W(in.omega, t1), NU(in.nu, t1);
  const bool held_noise = !NU.differentiable();
  if (!F.differentiable()) throw ConfigError("the fault signal must be differentiable");
  const PlantStepper ps{p, true_eta, d.n_eta};
  const int n = d.n;
  const int n_z = ad.n_z;

  const auto noise_at = [&](double t, double t_step) { return held_noise ? NU.value(t_step) : NU.value(t); };

  Vec s0(n + n_z);
  s0 << x0, z0;
  const StepRhs rhs = [&](double t, const Vec& s, double t_step) {
    const Vec x = s.head(n);
    const Vec z = s.tail(n_z);
    const Vec u = U.value(t);
    const Vec f = F.value(t);
    const Vec y = ps.output(x, f, noise_at(t, t_step));
    Vec out(n + n_z);
    out.head(n) = ps.xdot(x, u, f, W.value(t), t);
    out.tail(n_z) = filter_rhs(fr, z, aug.build_u_a(u, y, t), y, t);
    return out;
  };
  if (opt.substeps < 1) throw ConfigError("substeps must be at least 1");
  const long steps = rk4_step_count(opt.t0, t1, opt.step);
  const Rk4Trace raw = integrate_rk4(rhs, s0, opt.t0, t1, opt.step / opt.substeps);

  const auto N = static_cast<Eigen::Index>(steps + 1);
  SimulationTrace tr;
  tr.step = opt.step;
  tr.scenario_id = opt.scenario_id;
  tr.nu_dot_available = NU.differentiable();
  tr.t.resize(N);
  tr.x.resize(N, n);
  tr.x_a.resize(N, n_z);
  tr.z.resize(N, n_z);
  tr.xhat.resize(N, n_z);
  tr.y.resize(N, d.m);
  tr.u.resize(N, d.l);
  tr.f.resize(N, d.n_f);
  tr.fhat.resize(N, d.n_f);
  tr.e.resize(N, n_z);
  tr.e_f.resize(N, d.n_f);
  tr.omega.resize(N, d.n_omega);
  tr.nu.resize(N, d.m_nu);
  tr.nu_dot.resize(N, tr.nu_dot_available ? d.m_nu : 0);
  tr.delta_eta.resize(N, ad.n_deta);
  tr.f_r.resize(N, d.n_f);

  const SignalKind model_arg =
      aug.model.kind == UncertaintyKind::LinearOutput ? SignalKind::Output : SignalKind::State;
  for (Eigen::Index k = 0; k < N; ++k) {
    const auto idx = static_cast<std::size_t>(k * opt.substeps);
    const double t = opt.t0 + static_cast<double>(k) * opt.step;
    const Vec& s = raw.x[idx];
    const Vec x = s.head(n);
    const Vec z = s.tail(n_z);
    const Vec u = U.value(t);
    const Vec nu = NU.value(t);
    const Mat fd = fault_derivatives(F, t, ad.r);
    const Vec f = fd.col(0);
    const Vec y = ps.output(x, f, nu);
    const Vec x_a = stack_augmented_state(aug, x, fd);
    const Vec xhat = estimate_state(fr, z, y);
    tr.t(k) = t;
    tr.x.row(k) = x.transpose();
    tr.x_a.row(k) = x_a.transpose();
    tr.z.row(k) = z.transpose();
    tr.xhat.row(k) = xhat.transpose();
    tr.y.row(k) = y.transpose();
    tr.u.row(k) = u.transpose();
    tr.f.row(k) = f.transpose();
    tr.fhat.row(k) = (fr.C_bar * xhat).transpose();
    tr.e.row(k) = (xhat - x_a).transpose();
    tr.e_f.row(k) = (fr.C_bar * (xhat - x_a)).transpose();
    tr.omega.row(k) = W.value(t).transpose();
    tr.nu.row(k) = nu.transpose();
    if (tr.nu_dot_available) tr.nu_dot.row(k) = NU.derivative(t, 1)->transpose();
    if (ad.n_deta > 0) {
      const Vec eta = ps.eta_at(x, u, t);
      const Vec model = eval_uncertainty_model(aug.model, plant, model_arg,
                                               model_arg == SignalKind::Output ? y : x, u, t);
      tr.delta_eta.row(k) = (eta - model).transpose();
    }
    tr.f_r.row(k) = F.derivative(t, ad.r)->transpose();
  }
  for (const Signal* sig : {&U, &F, &W}) {
    for (double b : sig->breakpoints(opt.t0, t1)) tr.breakpoints.push_back(b);
  }
  if (NU.differentiable()) {
    for (double b : NU.breakpoints(opt.t0, t1)) tr.breakpoints.push_back(b);
  }
  std::sort(tr.breakpoints.begin(), tr.breakpoints.end());
  tr.metadata = {{"t0", opt.t0},
                 {"substeps", opt.substeps},
                 {"horizon", opt.horizon},
                 {"signals",
                  {{"u", in.u.to_json()}, {"fault", in.fault.to_json()}, {"omega", in.omega.to_json()},
                   {"nu", in.nu.to_json()}}},
                 {"x0", std::vector<double>(x0.data(), x0.data() + x0.size())},
                 {"z0", std::vector<double>(z0.data(), z0.data() + z0.size())},
                 {"uncertainty_model", to_string(aug.model.kind)},
                 {"r", ad.r}};
  return tr;
}

namespace {

struct Column {
  const char* name;
  Mat SimulationTrace::*field;
};

constexpr Column kColumns[] = {
    {"x", &SimulationTrace::x},         {"x_a", &SimulationTrace::x_a},       {"z", &SimulationTrace::z},
    {"xhat", &SimulationTrace::xhat},   {"y", &SimulationTrace::y},           {"u", &SimulationTrace::u},
    {"f", &SimulationTrace::f},         {"fhat", &SimulationTrace::fhat},     {"e", &SimulationTrace::e},
    {"e_f", &SimulationTrace::e_f},     {"omega", &SimulationTrace::omega},   {"nu", &SimulationTrace::nu},
    {"nu_dot", &SimulationTrace::nu_dot}, {"delta_eta", &SimulationTrace::delta_eta}, {"f_r", &SimulationTrace::f_r},
};

}  // namespace

nlohmann::json trace_metadata(const SimulationTrace& tr) {
  nlohmann::json j = tr.metadata;
  j["scenario_id"] = tr.scenario_id;
  j["step"] = tr.step;
  j["samples"] = tr.samples();
  j["nu_dot_available"] = tr.nu_dot_available;
  j["breakpoints"] = tr.breakpoints;
  nlohmann::json cols = nlohmann::json::array();
  cols.push_back({{"name", "t"}, {"width", 1}});
  for (const auto& c : kColumns) cols.push_back({{"name", c.name}, {"width", (tr.*c.field).cols()}});
  j["columns"] = cols;
  return j;
}

void write_trace_metadata(const SimulationTrace& tr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << trace_metadata(tr).dump(2) << "\n";
}

void write_trace_csv(const SimulationTrace& tr, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os << "# columns: t";
  for (const auto& c : kColumns) {
    const auto w = (tr.*c.field).cols();
    if (w > 0) os << ", " << c.name << "[" << w << "]";
  }
  os << "\n";
  os << "t";
  for (const auto& c : kColumns) {
    for (Eigen::Index i = 0; i < (tr.*c.field).cols(); ++i) os << "," << c.name << "_" << (i + 1);
  }
  os << "\n";
  os << std::setprecision(17);
  for (Eigen::Index k = 0; k < tr.samples(); ++k) {
    os << tr.t(k);
    for (const auto& c : kColumns) {
      const Mat& M = tr.*c.field;
      for (Eigen::Index i = 0; i < M.cols(); ++i) os << "," << M(k, i);
    }
    os << "\n";
  }
}

std::string trace_metadata_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  p.replace_extension(".meta.json");
  return p.string();
}

SimulationTrace read_trace_csv(const std::string& path, const std::string& metadata_path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read " + path);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
    break;
  }
  if (header.empty() || header[0] != "t") throw ConfigError(path + ": missing trace header");

  // name -> list of column positions in order
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const auto pos = header[i].rfind('_');
    if (pos == std::string::npos) throw ConfigError(path + ": bad column name '" + header[i] + "'");
    groups[header[i].substr(0, pos)].push_back(i);
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    row.reserve(header.size());
    std::size_t start = 0;
    while (start <= line.size()) {
      const auto end = line.find(',', start);
      const std::string cell = line.substr(start, end == std::string::npos ? std::string::npos : end - start);
      row.push_back(std::strtod(cell.c_str(), nullptr));
      if (end == std::string::npos) break;
      start = end + 1;
    }
    if (row.size() != header.size()) throw ConfigError(path + ": row has " + std::to_string(row.size()) + " cells");
    rows.push_back(std::move(row));
  }
  SimulationTrace tr;
  const auto N = static_cast<Eigen::Index>(rows.size());
  tr.t.resize(N);
  for (Eigen::Index k = 0; k < N; ++k) tr.t(k) = rows[static_cast<std::size_t>(k)][0];
  for (const auto& c : kColumns) {
    Mat& M = tr.*c.field;
    const auto it = groups.find(c.name);
    if (it == groups.end()) {
      M.resize(N, 0);
      continue;
    }
    M.resize(N, static_cast<Eigen::Index>(it->second.size()));
    for (Eigen::Index k = 0; k < N; ++k) {
      for (std::size_t i = 0; i < it->second.size(); ++i) {
        M(k, static_cast<Eigen::Index>(i)) = rows[static_cast<std::size_t>(k)][it->second[i]];
      }
    }
  }
  tr.nu_dot_available = tr.nu_dot.cols() > 0 || tr.nu.cols() == 0;
  if (tr.nu_dot.rows() != N) tr.nu_dot.resize(N, 0);
  tr.step = N > 1 ? tr.t(1) - tr.t(0) : 0.0;
  if (!metadata_path.empty() && std::filesystem::exists(metadata_path)) {
    std::ifstream ms(metadata_path);
    nlohmann::json meta;
    try {
      ms >> meta;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(metadata_path + ": " + e.what());
    }
    tr.step = meta.value("step", tr.step);
    tr.scenario_id = meta.value("scenario_id", std::string());
    tr.breakpoints = meta.value("breakpoints", std::vector<double>{});
    if (meta.contains("nu_dot_available")) {
      tr.nu_dot_available = meta.at("nu_dot_available").get<bool>() && tr.nu_dot.cols() == tr.nu.cols();
    }
    tr.metadata = meta;
  }
  return tr;
}

}  // namespace faultest
