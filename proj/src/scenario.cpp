#include "faultest/scenario.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <random>
#include <sstream>
#include <thread>

#include "faultest/config.hpp"

namespace faultest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec vec_from_json(const json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

double number_or_inf(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf" || s == "infinity" || s == "unbounded") return kUnbounded;
    throw ConfigError("expected a number or \"inf\", got \"" + s + "\"");
  }
  return j.get<double>();
}

json number_json(double x) { return std::isfinite(x) ? json(x) : json("inf"); }

std::vector<double> grid_from_json(const json& j) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) return log_grid(j.at("lo").get<double>(), j.at("hi").get<double>(), j.value("points", 5));
  throw ConfigError("grid must be a list or {lo, hi, points}");
}

const json& section(const json& doc, const char* key) {
  static const json empty = json::object();
  if (!doc.contains(key)) return empty;
  if (!doc.at(key).is_object()) throw ConfigError(std::string("section '") + key + "' must be a table");
  return doc.at(key);
}

void parallel_for(int count, int threads, const std::function<void(int)>& body) {
  int n = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n = std::min(n, count);
  if (n <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < n; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

Vec row_norms(const Mat& m) { return m.rowwise().norm(); }

void write_json(const json& j, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

bool signal_is_zero(const Mat& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() <= 1e-12; }

json table_json(const std::vector<LineSearchEntry>& table) {
  json out = json::array();
  for (const auto& e : table) {
    out.push_back({{"a", e.a},
                   {"b", e.b},
                   {"status", to_string(e.status)},
                   {"rho", number_json(e.rho)},
                   {"sigma", number_json(e.sigma)},
                   {"iterations", e.iterations}});
  }
  return out;
}

bool noise_free(const SimulationTrace& tr) { return signal_is_zero(tr.nu); }

}  // namespace

// ---------------------------------------------------------------------------
// config

ScenarioConfig scenario_from_json(const json& doc, const std::string& base_dir) {
  ScenarioConfig cfg;
  try {
    cfg.id = doc.value("id", cfg.id);

    const json& plant = section(doc, "plant");
    cfg.plant_source = plant.value("source", std::string("robot-arm"));
    if (cfg.plant_source == "robot-arm") {
      cfg.arm = RobotArmParams::from_json(plant.value("params", json::object()));
    } else if (plant.contains("document")) {
      cfg.plant_doc = plant.at("document");
    } else {
      fs::path p(cfg.plant_source);
      if (p.is_relative()) p = fs::path(base_dir) / p;
      cfg.plant_doc = load_config_file(p.string());
    }
    if (plant.contains("true_eta")) cfg.true_eta = plant.at("true_eta");

    const json& unc = section(doc, "uncertainty");
    cfg.uncertainty = uncertainty_kind_from_string(unc.value("kind", std::string("linear-state")));
    if (unc.contains("theta_x")) cfg.theta_x = matrix_from_json(unc.at("theta_x"));
    if (unc.contains("theta_y")) cfg.theta_y = matrix_from_json(unc.at("theta_y"));
    if (unc.contains("T_eta")) cfg.T_eta = matrix_from_json(unc.at("T_eta"));
    if (unc.contains("eta_lx")) cfg.eta_lx = unc.at("eta_lx");

    const json& design = section(doc, "design");
    cfg.r = design.value("r", cfg.r);
    cfg.mode = synthesis_mode_from_string(design.value("mode", to_string(cfg.mode)));
    if (design.contains("a_grid")) cfg.a_grid = grid_from_json(design.at("a_grid"));
    if (design.contains("b_grid")) cfg.b_grid = grid_from_json(design.at("b_grid"));
    if (design.contains("sigma_max")) {
      const json& s = design.at("sigma_max");
      if (!(s.is_string() && s.get<std::string>() == "auto")) cfg.sigma_max = number_or_inf(s);
    }
    cfg.epsilon = design.value("epsilon", cfg.epsilon);
    cfg.linf_form = linf_form_from_string(design.value("linf_form", to_string(cfg.linf_form)));
    cfg.threads = design.value("threads", cfg.threads);
    if (design.contains("solver")) {
      const json& s = design.at("solver");
      cfg.solver.tol_feas = s.value("tol_feas", cfg.solver.tol_feas);
      cfg.solver.tol_gap = s.value("tol_gap", cfg.solver.tol_gap);
      cfg.solver.max_iter = s.value("max_iter", cfg.solver.max_iter);
    }

    const json& sig = section(doc, "signals");
    if (sig.contains("u")) cfg.u = SignalSpec::from_json(sig.at("u"));
    if (sig.contains("fault")) cfg.fault = SignalSpec::from_json(sig.at("fault"));
    if (sig.contains("omega")) cfg.omega = SignalSpec::from_json(sig.at("omega"));
    if (sig.contains("nu")) cfg.nu = SignalSpec::from_json(sig.at("nu"));
    cfg.noise_fraction = sig.value("noise_fraction", cfg.noise_fraction);
    cfg.noise_seed = sig.value("noise_seed", cfg.noise_seed);

    const json& sim = section(doc, "simulation");
    if (sim.contains("x0")) {
      cfg.x0 = vec_from_json(sim.at("x0"));
    } else if (cfg.plant_source != "robot-arm") {
      cfg.x0 = Vec::Zero(matrix_from_json(cfg.plant_doc.at("A")).rows());
    }
    const std::string z0 = sim.value("z0", std::string("zero"));
    if (z0 != "zero" && z0 != "manifold") throw ConfigError("simulation.z0 must be \"zero\" or \"manifold\"");
    cfg.z0_on_manifold = z0 == "manifold";
    cfg.horizon = sim.value("horizon", cfg.horizon);
    cfg.step = sim.value("step", cfg.step);
    cfg.metrics_from = sim.value("metrics_from", cfg.metrics_from);

    const json& ver = section(doc, "verification");
    cfg.l2_members = ver.value("l2_members", cfg.l2_members);
    cfg.l2_seed = ver.value("l2_seed", cfg.l2_seed);
    cfg.e2p_members = ver.value("e2p_members", cfg.e2p_members);
    cfg.e2p_seed = ver.value("e2p_seed", cfg.e2p_seed);
    cfg.corrupt_gain_scale = ver.value("corrupt_gain_scale", cfg.corrupt_gain_scale);

    cfg.output_dir = doc.value("output_dir", cfg.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }

  if (cfg.r < 1) throw ConfigError("design.r must be at least 1");
  if (cfg.a_grid.empty() || cfg.b_grid.empty()) throw ConfigError("line-search grids must be nonempty");
  for (double a : cfg.a_grid)
    if (!(a > 0)) throw ConfigError("a_grid entries must be positive");
  for (double b : cfg.b_grid)
    if (b == 0) throw ConfigError("b_grid entries must be nonzero");
  if (cfg.sigma_max && !(*cfg.sigma_max > 0)) throw ConfigError("sigma_max must be positive");
  if (!(cfg.step > 0) || !(cfg.horizon > 0)) throw ConfigError("simulation step and horizon must be positive");
  rk4_step_count(0.0, cfg.horizon, cfg.step);
  if (cfg.l2_members < 0 || cfg.e2p_members < 0) throw ConfigError("ensemble sizes must be nonnegative");
  return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
  const json doc = load_config_file(path);
  return scenario_from_json(doc, fs::path(path).parent_path().string().empty()
                                     ? std::string(".")
                                     : fs::path(path).parent_path().string());
}

json scenario_to_json(const ScenarioConfig& cfg) {
  json plant{{"source", cfg.plant_source}};
  if (cfg.plant_source == "robot-arm") {
    plant["params"] = cfg.arm.to_json();
  } else {
    plant["document"] = cfg.plant_doc;
  }
  if (cfg.true_eta) plant["true_eta"] = *cfg.true_eta;

  json unc{{"kind", to_string(cfg.uncertainty)}};
  if (cfg.theta_x.size()) unc["theta_x"] = matrix_to_json(cfg.theta_x);
  if (cfg.theta_y.size()) unc["theta_y"] = matrix_to_json(cfg.theta_y);
  if (cfg.T_eta.size()) unc["T_eta"] = matrix_to_json(cfg.T_eta);
  if (cfg.eta_lx) unc["eta_lx"] = *cfg.eta_lx;

  json design{{"r", cfg.r},
              {"mode", to_string(cfg.mode)},
              {"a_grid", cfg.a_grid},
              {"b_grid", cfg.b_grid},
              {"sigma_max", cfg.sigma_max ? number_json(*cfg.sigma_max) : json("auto")},
              {"epsilon", cfg.epsilon},
              {"linf_form", to_string(cfg.linf_form)},
              {"threads", cfg.threads},
              {"solver",
               {{"tol_feas", cfg.solver.tol_feas}, {"tol_gap", cfg.solver.tol_gap}, {"max_iter", cfg.solver.max_iter}}}};

  json signals{{"u", cfg.u.to_json()},
               {"fault", cfg.fault.to_json()},
               {"omega", cfg.omega.to_json()},
               {"noise_fraction", cfg.noise_fraction},
               {"noise_seed", cfg.noise_seed}};
  if (cfg.nu) signals["nu"] = cfg.nu->to_json();

  json sim{{"x0", vec_json(cfg.x0)},
           {"z0", cfg.z0_on_manifold ? "manifold" : "zero"},
           {"horizon", cfg.horizon},
           {"step", cfg.step},
           {"metrics_from", cfg.metrics_from}};

  json ver{{"l2_members", cfg.l2_members},
           {"l2_seed", cfg.l2_seed},
           {"e2p_members", cfg.e2p_members},
           {"e2p_seed", cfg.e2p_seed},
           {"corrupt_gain_scale", cfg.corrupt_gain_scale}};

  json doc{{"id", cfg.id},         {"plant", plant},     {"uncertainty", unc},  {"design", design},
           {"signals", signals},   {"simulation", sim},  {"verification", ver}};
  if (!cfg.output_dir.empty()) doc["output_dir"] = cfg.output_dir;
  return doc;
}

std::string config_hash(const ScenarioConfig& cfg) {
  json doc = scenario_to_json(cfg);
  doc.erase("output_dir");
  const std::string text = doc.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScenarioConfig robot_arm_benchmark(SynthesisMode mode) {
  ScenarioConfig cfg;
  cfg.mode = mode;
  cfg.id = "robot-arm-" + to_string(mode);
  return cfg;
}

// ---------------------------------------------------------------------------
// model and synthesis

ScenarioModel build_scenario_model(const ScenarioConfig& cfg) {
  const bool arm = cfg.plant_source == "robot-arm";
  ValidatedPlant plant = arm ? build_robot_arm(cfg.arm) : validate_plant(plant_from_json(cfg.plant_doc));

  UncertaintyFn true_eta;
  if (arm) {
    true_eta = robot_arm_true_eta(cfg.arm).fn;
  } else if (cfg.true_eta) {
    true_eta = make_nonlinearity(cfg.true_eta->at("name").get<std::string>(),
                                 cfg.true_eta->value("params", json::object()))
                   .fn;
  }

  UncertaintyModel model;
  switch (cfg.uncertainty) {
    case UncertaintyKind::None: model = UncertaintyModel::none(); break;
    case UncertaintyKind::LinearState: {
      Mat theta = cfg.theta_x;
      if (theta.size() == 0) {
        if (!arm) throw ConfigError("uncertainty.theta_x is required for linear-state models");
        theta = robot_arm_theta_x(cfg.arm);
      }
      model = UncertaintyModel::linear_state(theta);
      break;
    }
    case UncertaintyKind::LinearOutput:
      if (cfg.theta_y.size() == 0 || cfg.T_eta.size() == 0)
        throw ConfigError("linear-output models need uncertainty.theta_y and uncertainty.T_eta");
      model = UncertaintyModel::linear_output(cfg.theta_y, cfg.T_eta);
      break;
    case UncertaintyKind::NonlinearState: {
      if (cfg.eta_lx) {
        model = UncertaintyModel::nonlinear_state(make_nonlinearity(
            cfg.eta_lx->at("name").get<std::string>(), cfg.eta_lx->value("params", json::object())));
      } else {
        Mat theta = cfg.theta_x;
        if (theta.size() == 0) {
          if (!arm) throw ConfigError("nonlinear-state models need uncertainty.eta_lx or theta_x");
          theta = robot_arm_theta_x(cfg.arm);
        }
        model = UncertaintyModel::nonlinear_state(make_nonlinearity("linear", {{"matrix", matrix_to_json(theta)}}));
      }
      break;
    }
  }
  validate_uncertainty_model(model, plant);
  AugmentedSystem aug = augment(plant, model, cfg.r);
  return ScenarioModel{std::move(plant), std::move(model), std::move(aug), std::move(true_eta)};
}

SynthesisOutcome synthesize_scenario(const ScenarioConfig& cfg, const ScenarioModel& sm) {
  SynthesisParams base;
  base.mode = cfg.mode;
  base.epsilon = cfg.epsilon;
  base.linf_form = cfg.linf_form;

  SynthesisOutcome out;
  if (cfg.sigma_max) {
    base.sigma_max = *cfg.sigma_max;
  } else if (cfg.mode == SynthesisMode::Tradeoff) {
    SynthesisParams p = base;
    p.mode = SynthesisMode::L2Linf;
    const double lo = line_search(sm.aug, cfg.a_grid, cfg.b_grid, p, cfg.solver, cfg.threads).best.sigma;
    p.mode = SynthesisMode::L2;
    const double hi = line_search(sm.aug, cfg.a_grid, cfg.b_grid, p, cfg.solver, cfg.threads).best.sigma;
    base.sigma_max = std::sqrt(std::max(lo, 0.0) * hi);
    out.sigma_range = std::make_pair(lo, hi);
  }
  out.sigma_max = base.sigma_max;
  auto ls = line_search(sm.aug, cfg.a_grid, cfg.b_grid, base, cfg.solver, cfg.threads);
  out.result = std::move(ls.best);
  out.table = std::move(ls.table);
  return out;
}

json gains_document(const ScenarioConfig& cfg, const SynthesisOutcome& out, const FilterRealization& fr) {
  const SynthesisResult& r = out.result;
  json doc = gains_to_json(fr);
  json cert{{"P", matrix_to_json(r.P)},
            {"rho", number_json(r.rho)},
            {"sigma", number_json(r.sigma)},
            {"a", r.params.a},
            {"b", r.params.b},
            {"epsilon", r.epsilon},
            {"alpha", r.alpha},
            {"mode", to_string(r.params.mode)},
            {"sigma_max", number_json(out.sigma_max)},
            {"linf_reduced", r.linf_reduced},
            {"l2_bound", number_json(r.l2_bound())},
            {"linf_bound", number_json(r.linf_bound())}};
  if (out.sigma_range) cert["sigma_range"] = {out.sigma_range->first, out.sigma_range->second};
  doc["certificate"] = cert;
  doc["line_search"] = table_json(out.table);
  doc["config"] = scenario_to_json(cfg);
  return doc;
}

LyapunovCertificate certificate_from_document(const json& gains_doc) {
  if (!gains_doc.contains("certificate")) throw ConfigError("gains document has no certificate block");
  const json& c = gains_doc.at("certificate");
  LyapunovCertificate cert;
  cert.P = matrix_from_json(c.at("P"));
  cert.rho = number_or_inf(c.at("rho"));
  cert.a = c.at("a").get<double>();
  cert.alpha = c.at("alpha").get<double>();
  return cert;
}

namespace {

SynthesisOutcome outcome_from_document(const json& gains_doc) {
  const json& c = gains_doc.at("certificate");
  SynthesisOutcome out;
  SynthesisResult& r = out.result;
  r.status = SdpStatus::Optimal;
  r.params.a = c.at("a").get<double>();
  r.params.b = c.at("b").get<double>();
  r.params.mode = synthesis_mode_from_string(c.at("mode").get<std::string>());
  r.params.sigma_max = number_or_inf(c.value("sigma_max", json("inf")));
  r.epsilon = c.value("epsilon", 0.0);
  r.alpha = c.at("alpha").get<double>();
  r.linf_reduced = c.value("linf_reduced", false);
  r.rho = number_or_inf(c.at("rho"));
  r.sigma = number_or_inf(c.at("sigma"));
  r.P = matrix_from_json(c.at("P"));
  out.sigma_max = r.params.sigma_max;
  if (c.contains("sigma_range")) out.sigma_range = std::make_pair(c["sigma_range"][0].get<double>(), c["sigma_range"][1].get<double>());
  if (gains_doc.contains("line_search")) {
    for (const auto& e : gains_doc.at("line_search")) {
      LineSearchEntry entry;
      entry.a = e.at("a").get<double>();
      entry.b = e.at("b").get<double>();
      const std::string s = e.at("status").get<std::string>();
      for (SdpStatus st : {SdpStatus::Optimal, SdpStatus::Infeasible, SdpStatus::Unbounded, SdpStatus::MaxIterations,
                           SdpStatus::NumericalFailure})
        if (to_string(st) == s) entry.status = st;
      entry.rho = number_or_inf(e.at("rho"));
      entry.sigma = number_or_inf(e.at("sigma"));
      entry.iterations = e.value("iterations", 0);
      out.table.push_back(entry);
    }
  }
  return out;
}

}  // namespace

FilterRealization filter_from_document(const json& gains_doc) {
  if (!gains_doc.contains("config")) throw ConfigError("gains document has no embedded config");
  const ScenarioConfig cfg = scenario_from_json(gains_doc.at("config"));
  const ScenarioModel sm = build_scenario_model(cfg);
  return build_filter(sm.aug, gains_from_json(gains_doc));
}

// ---------------------------------------------------------------------------
// simulation

RunMetrics run_metrics(const SimulationTrace& trace, double from) {
  RunMetrics m;
  const double cutoff = from - 1e-9 * std::max(1.0, std::abs(from));
  double sum = 0.0;
  int count = 0;
  const Vec norms = row_norms(trace.e_f);
  for (Eigen::Index k = 0; k < trace.samples(); ++k) {
    if (trace.t(k) < cutoff) continue;
    m.peak_error = std::max(m.peak_error, norms(k));
    sum += norms(k) * norms(k);
    ++count;
  }
  m.rms_error = count ? std::sqrt(sum / count) : 0.0;
  return m;
}

namespace {

SimulationOptions options_for(const ScenarioConfig& cfg, const FilterRealization& fr, const std::string& suffix) {
  SimulationOptions o;
  o.horizon = cfg.horizon;
  o.step = cfg.step;
  o.substeps = stable_substeps(fr, cfg.step);
  o.scenario_id = cfg.id + "/" + suffix;
  return o;
}

}  // namespace

DemoRuns simulate_scenario(const ScenarioConfig& cfg, const ScenarioModel& sm, const FilterRealization& fr) {
  const auto& dims = sm.aug.dims;
  SimulationInputs in{cfg.u, cfg.fault, cfg.omega, SignalSpec::zero(dims.m_nu)};
  const Vec z0 = cfg.z0_on_manifold ? manifold_initial_state(fr, cfg.x0, cfg.fault) : Vec::Zero(dims.n_z);

  DemoRuns runs;
  runs.clean = simulate(fr, sm.true_eta, in, cfg.x0, z0, options_for(cfg, fr, "clean"));

  if (cfg.nu) {
    in.nu = *cfg.nu;
    runs.noise_amplitude = in.nu.amplitude;
  } else {
    const Vec peak_y = runs.clean.y.cwiseAbs().colwise().maxCoeff().transpose();
    Vec amp(dims.m_nu);
    for (int i = 0; i < dims.m_nu; ++i)
      amp(i) = cfg.noise_fraction * (dims.m_nu == dims.m ? peak_y(i) : peak_y.maxCoeff());
    runs.noise_amplitude = amp;
    if (amp.size() && amp.maxCoeff() > 0) in.nu = SignalSpec::uniform_noise(amp, cfg.step, cfg.noise_seed);
  }
  runs.noisy = simulate(fr, sm.true_eta, in, cfg.x0, z0, options_for(cfg, fr, "noisy"));

  runs.clean_metrics = run_metrics(runs.clean, cfg.metrics_start());
  runs.noisy_metrics = run_metrics(runs.noisy, cfg.metrics_start());
  return runs;
}

// ---------------------------------------------------------------------------
// ensembles

bool EnsembleReport::all_within_bound() const {
  for (const auto& m : members) {
    if (m.diverged) return false;
    if (m.ratio && *m.ratio > m.bound) return false;
  }
  return true;
}

int EnsembleReport::total_violations() const {
  int n = 0;
  for (const auto& m : members) n += m.diverged ? 1 : m.lyapunov.total_violations();
  return n;
}

json EnsembleReport::to_json() const {
  json list = json::array();
  double worst = 0.0;
  for (const auto& m : members) {
    json j{{"seed", m.seed}, {"bound", number_json(m.bound)}, {"diverged", m.diverged}};
    j["ratio"] = m.ratio ? json(*m.ratio) : json(nullptr);
    if (m.ratio) worst = std::max(worst, *m.ratio);
    if (!m.diverged && m.lyapunov.points > 0) j["lyapunov"] = m.lyapunov.to_json();
    list.push_back(j);
  }
  return {{"members", list},
          {"count", members.size()},
          {"worst_ratio", worst},
          {"all_within_bound", all_within_bound()},
          {"lyapunov_violations", total_violations()}};
}

EnsembleReport l2_ensemble(const ScenarioConfig& cfg, const ScenarioModel& sm, const FilterRealization& fr,
                           const LyapunovCertificate& cert) {
  const auto& dims = sm.aug.dims;
  const bool arm = cfg.plant_source == "robot-arm";
  const double bound = std::sqrt(std::max(cert.rho, 0.0));
  EnsembleReport report;
  report.members.resize(cfg.l2_members);
  const SimulationOptions opt = options_for(cfg, fr, "l2-ensemble");

  parallel_for(cfg.l2_members, cfg.threads, [&](int i) {
    EnsembleMember& member = report.members[i];
    member.seed = cfg.l2_seed + static_cast<std::uint64_t>(i);
    member.bound = bound;
    std::mt19937_64 rng(member.seed);

    UncertaintyFn eta = sm.true_eta;
    if (arm) {
      RobotArmParams tp = cfg.arm;
      tp.dk_s *= uniform(rng, 0.5, 1.5);
      tp.dc *= uniform(rng, 0.5, 1.5);
      eta = robot_arm_true_eta(tp).fn;
    }
    Vec wa(dims.n_omega), ww(dims.n_omega), wp(dims.n_omega);
    for (int c = 0; c < dims.n_omega; ++c) {
      wa(c) = uniform(rng, 0.01, 0.05);
      ww(c) = uniform(rng, 0.05, 2.5);
      wp(c) = uniform(rng, 0.0, 2 * std::numbers::pi);
    }
    Vec fa(dims.n_f), fw(dims.n_f);
    for (int c = 0; c < dims.n_f; ++c) {
      fa(c) = uniform(rng, 0.05, 0.2);
      fw(c) = uniform(rng, 0.05, 2.5);
    }
    // a delayed onset leaves f' discontinuous, which only a first-order fault model absorbs
    const double delay = uniform(rng, 0.0, 0.25 * cfg.horizon) * (cfg.r == 1 ? 1.0 : 0.0);

    SimulationInputs in{cfg.u, SignalSpec::sinusoid(fa, fw, delay),
                        dims.n_omega ? SignalSpec::sinusoid(wa, ww, 0.0, wp) : SignalSpec::zero(0),
                        SignalSpec::zero(dims.m_nu)};
    try {
      const auto tr = simulate(fr, eta, in, cfg.x0, manifold_initial_state(fr, cfg.x0, in.fault), opt);
      member.ratio = empirical_l2_gain(tr);
      member.lyapunov = lyapunov_spot_check(tr, fr, cert);
    } catch (const NonFiniteState&) {
      member.diverged = true;
    }
  });
  return report;
}

EnsembleReport energy_to_peak_ensemble(const ScenarioConfig& cfg, const ScenarioModel& sm,
                                       const FilterRealization& fr, double bound) {
  const auto& dims = sm.aug.dims;
  EnsembleReport report;
  UncertaintyFn eta;
  switch (sm.model.kind) {
    case UncertaintyKind::None: break;
    case UncertaintyKind::LinearState: {
      const Mat theta = sm.model.theta_x;
      eta = [theta](const Vec& v, const Vec&, double) { return (theta * v).eval(); };
      break;
    }
    case UncertaintyKind::NonlinearState: eta = sm.model.eta_lx->fn; break;
    case UncertaintyKind::LinearOutput: return report;
  }
  report.members.resize(cfg.e2p_members);
  const SimulationOptions opt = options_for(cfg, fr, "energy-to-peak-ensemble");

  parallel_for(cfg.e2p_members, cfg.threads, [&](int i) {
    EnsembleMember& member = report.members[i];
    member.seed = cfg.e2p_seed + static_cast<std::uint64_t>(i);
    member.bound = bound;
    std::mt19937_64 rng(member.seed);
    Vec amp(dims.m_nu), freq(dims.m_nu);
    for (int c = 0; c < dims.m_nu; ++c) {
      amp(c) = uniform(rng, 0.001, 0.011);
      freq(c) = uniform(rng, 0.1, 10.1);
    }
    SimulationInputs in{cfg.u, SignalSpec::zero(dims.n_f), SignalSpec::zero(dims.n_omega),
                        SignalSpec::sinusoid(amp, freq)};
    try {
      const auto tr = simulate(fr, eta, in, cfg.x0, manifold_initial_state(fr, cfg.x0, in.fault), opt);
      member.ratio = empirical_energy_to_peak(tr).ratio;
    } catch (const NonFiniteState&) {
      member.diverged = true;
    }
  });
  return report;
}

// ---------------------------------------------------------------------------
// artifacts

void write_fault_plot_csv(const SimulationTrace& trace, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path);
  os.precision(17);
  os << "t";
  for (Eigen::Index i = 0; i < trace.f.cols(); ++i) os << ",f_" << i + 1;
  for (Eigen::Index i = 0; i < trace.fhat.cols(); ++i) os << ",fhat_" << i + 1;
  os << "\n";
  for (Eigen::Index k = 0; k < trace.samples(); ++k) {
    os << trace.t(k);
    for (Eigen::Index i = 0; i < trace.f.cols(); ++i) os << "," << trace.f(k, i);
    for (Eigen::Index i = 0; i < trace.fhat.cols(); ++i) os << "," << trace.fhat(k, i);
    os << "\n";
  }
}

namespace {

json metrics_json(const RunMetrics& m) { return {{"peak_error", m.peak_error}, {"rms_error", m.rms_error}}; }

void finish_report(ScenarioReport& rep, const ScenarioModel& sm, const json& gains_doc) {
  const ScenarioConfig& cfg = rep.config;
  const FilterRealization& fr = *rep.filter;
  const SynthesisResult& res = rep.synthesis.result;
  const LyapunovCertificate cert{res.P, res.rho, res.params.a, sm.aug.alpha};

  rep.runs = simulate_scenario(cfg, sm, fr);
  rep.l2 = l2_ensemble(cfg, sm, fr, cert);
  if (cfg.corrupt_gain_scale > 0) {
    ObserverGains bad = rep.gains;
    bad.K *= cfg.corrupt_gain_scale;
    rep.l2_corrupted = l2_ensemble(cfg, sm, build_filter(sm.aug, bad), cert);
  }
  rep.e2p = energy_to_peak_ensemble(cfg, sm, fr, res.linf_bound());

  const IdentityResiduals ir = fr.residuals();
  const Vec noise_effect = row_norms(rep.runs.noisy.e_f - rep.runs.clean.e_f);
  json design{{"mode", to_string(res.params.mode)},
              {"a", res.params.a},
              {"b", res.params.b},
              {"rho", number_json(res.rho)},
              {"sigma", number_json(res.sigma)},
              {"sigma_max", number_json(rep.synthesis.sigma_max)},
              {"epsilon", res.epsilon},
              {"alpha", res.alpha},
              {"linf_form", res.linf_reduced ? "reduced" : "full"},
              {"l2_bound", number_json(res.l2_bound())},
              {"linf_bound", number_json(res.linf_bound())},
              {"line_search", table_json(rep.synthesis.table)}};
  if (rep.synthesis.sigma_range)
    design["sigma_range"] = {rep.synthesis.sigma_range->first, rep.synthesis.sigma_range->second};

  std::vector<std::uint64_t> l2_seeds, e2p_seeds;
  for (const auto& m : rep.l2.members) l2_seeds.push_back(m.seed);
  for (const auto& m : rep.e2p.members) e2p_seeds.push_back(m.seed);

  json checks{{"identities", ir.max() <= 1e-10},
              {"l2_certificate", rep.l2.all_within_bound()},
              {"lyapunov_certified", rep.l2.total_violations() == 0},
              {"energy_to_peak_certificate", rep.e2p.members.empty() ? json(nullptr) : json(rep.e2p.all_within_bound())}};
  if (cfg.corrupt_gain_scale > 0) checks["negative_control_detected"] = rep.l2_corrupted.total_violations() > 0;

  rep.summary = {
      {"id", cfg.id},
      {"config_hash", config_hash(cfg)},
      {"seeds", {{"noise", cfg.noise_seed}, {"l2_ensemble", l2_seeds}, {"energy_to_peak_ensemble", e2p_seeds}}},
      {"design", design},
      {"identity_residuals", {{"g", ir.g}, {"nm", ir.nm}, {"ne", ir.ne}}},
      {"simulation",
       {{"horizon", cfg.horizon},
        {"step", cfg.step},
        {"substeps", stable_substeps(fr, cfg.step)},
        {"metrics_from", cfg.metrics_start()},
        {"z0", cfg.z0_on_manifold ? "manifold" : "zero"}}},
      {"runs",
       {{"clean", metrics_json(rep.runs.clean_metrics)},
        {"noisy", metrics_json(rep.runs.noisy_metrics)},
        {"noise_amplitude", vec_json(rep.runs.noise_amplitude)},
        {"noise_effect_peak", noise_effect.size() ? noise_effect.maxCoeff() : 0.0}}},
      {"l2_ensemble", rep.l2.to_json()},
      {"energy_to_peak_ensemble", rep.e2p.to_json()},
      {"checks", checks}};
  if (cfg.corrupt_gain_scale > 0) {
    rep.summary["negative_control"] = rep.l2_corrupted.to_json();
    rep.summary["negative_control"]["gain_scale"] = cfg.corrupt_gain_scale;
  }

  if (cfg.output_dir.empty()) return;
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_json(gains_doc, dir / "gains.json");
  for (const auto& [name, tr] : {std::pair<const char*, const SimulationTrace*>{"clean", &rep.runs.clean},
                                 {"noisy", &rep.runs.noisy}}) {
    const std::string csv = (dir / (std::string("trace_") + name + ".csv")).string();
    write_trace_csv(*tr, csv);
    write_trace_metadata(*tr, trace_metadata_path(csv));
    write_fault_plot_csv(*tr, (dir / (std::string("fault_") + name + ".csv")).string());
  }
  write_json(rep.summary, dir / "summary.json");
}

}  // namespace

ScenarioReport run_scenario(const ScenarioConfig& cfg) {
  ScenarioReport rep;
  rep.config = cfg;
  const ScenarioModel sm = build_scenario_model(cfg);
  rep.synthesis = synthesize_scenario(cfg, sm);
  rep.gains = recover_gains(rep.synthesis.result);
  rep.filter = build_filter(sm.aug, rep.gains);
  if (!cfg.output_dir.empty()) {
    fs::create_directories(cfg.output_dir);
    const auto problem = assemble_synthesis_problem(sm.aug, rep.synthesis.result.params);
    write_sdpa_file(problem.to_sdp(), (fs::path(cfg.output_dir) / "problem.dat-s").string());
  }
  finish_report(rep, sm, gains_document(cfg, rep.synthesis, *rep.filter));
  return rep;
}

ScenarioReport run_scenario_with_gains(const ScenarioConfig& cfg, const json& gains_doc) {
  ScenarioReport rep;
  rep.config = cfg;
  const ScenarioModel sm = build_scenario_model(cfg);
  rep.synthesis = outcome_from_document(gains_doc);
  rep.gains = gains_from_json(gains_doc);
  rep.filter = build_filter(sm.aug, rep.gains);
  finish_report(rep, sm, gains_doc);
  return rep;
}

json verify_trace(const json& gains_doc, const SimulationTrace& trace) {
  const FilterRealization fr = filter_from_document(gains_doc);
  const LyapunovCertificate cert = certificate_from_document(gains_doc);
  const SynthesisOutcome out = outcome_from_document(gains_doc);
  const auto& dims = fr.aug.dims;
  if (trace.e.cols() != dims.n_z || trace.e_f.cols() != dims.n_f || trace.omega_a().cols() != dims.n_omega_a())
    throw DimensionMismatch("trace columns vs gains document");

  const IdentityResiduals ir = fr.residuals();
  const double ef_consistency =
      trace.samples() ? (trace.e * fr.C_bar.transpose() - trace.e_f).cwiseAbs().maxCoeff() : 0.0;

  json report{{"identity_residuals", {{"g", ir.g}, {"nm", ir.nm}, {"ne", ir.ne}}},
              {"error_output_consistency", ef_consistency},
              {"samples", trace.samples()},
              {"scenario_id", trace.scenario_id}};
  bool passed = ir.max() <= 1e-10 && ef_consistency <= 1e-12 * std::max(1.0, trace.e.cwiseAbs().maxCoeff());

  if (noise_free(trace)) {
    const auto g = empirical_l2_gain(trace);
    const double bound = out.result.l2_bound();
    report["l2_gain"] = {{"ratio", g ? json(*g) : json(nullptr)}, {"bound", number_json(bound)}};
    if (g && *g > bound) passed = false;
  } else {
    report["l2_gain"] = {{"skipped", "measurement noise present"}};
  }

  const bool disturbance_free =
      signal_is_zero(trace.delta_eta) && signal_is_zero(trace.omega) && signal_is_zero(trace.f_r);
  if (disturbance_free) {
    const auto e2p = empirical_energy_to_peak(trace);
    const double bound = out.result.linf_bound();
    report["energy_to_peak"] = {{"ratio", e2p.ratio ? json(*e2p.ratio) : json(nullptr)},
                                {"bound", number_json(bound)},
                                {"peak", e2p.peak},
                                {"energy", e2p.energy},
                                {"derivative_used", e2p.derivative_used}};
    if (e2p.ratio && e2p.derivative_used && *e2p.ratio > bound) passed = false;
  } else {
    report["energy_to_peak"] = {{"skipped", "disturbances present"}};
  }

  const LyapunovReport ly = lyapunov_spot_check(trace, fr, cert);
  report["lyapunov"] = ly.to_json();
  if (ly.total_violations() > 0) passed = false;
  report["passed"] = passed;
  return report;
}

// ---------------------------------------------------------------------------
// three-way comparison

json BenchmarkComparison::to_json() const {
  json list = json::array();
  for (const auto& r : runs) {
    list.push_back({{"mode", to_string(r.config.mode)},
                    {"rho", number_json(r.synthesis.result.rho)},
                    {"sigma", number_json(r.synthesis.result.sigma)},
                    {"a", r.synthesis.result.params.a},
                    {"b", r.synthesis.result.params.b},
                    {"noisy_peak_error", r.runs.noisy_metrics.peak_error},
                    {"clean_rms_error", r.runs.clean_metrics.rms_error},
                    {"checks", r.summary.value("checks", json::object())}});
  }
  return {{"designs", list},
          {"peak_ordering", peak_ordering},
          {"tracking_ordering", tracking_ordering},
          {"metrics_from", runs.empty() ? 0.0 : runs.front().config.metrics_start()}};
}

BenchmarkComparison run_benchmark_comparison(const ScenarioConfig& base) {
  auto with_mode = [&](SynthesisMode mode) {
    ScenarioConfig cfg = base;
    cfg.mode = mode;
    cfg.id = base.id + "-" + to_string(mode);
    if (!base.output_dir.empty()) cfg.output_dir = (fs::path(base.output_dir) / to_string(mode)).string();
    return cfg;
  };

  BenchmarkComparison cmp;
  ScenarioReport l2 = run_scenario(with_mode(SynthesisMode::L2));
  ScenarioReport linf = run_scenario(with_mode(SynthesisMode::L2Linf));
  ScenarioConfig trade_cfg = with_mode(SynthesisMode::Tradeoff);
  std::optional<std::pair<double, double>> range;
  if (!base.sigma_max) {
    const double lo = linf.synthesis.result.sigma, hi = l2.synthesis.result.sigma;
    trade_cfg.sigma_max = std::sqrt(std::max(lo, 0.0) * hi);
    range = std::make_pair(lo, hi);
  }
  ScenarioReport trade = run_scenario(trade_cfg);
  if (range) {
    trade.synthesis.sigma_range = range;
    trade.summary["design"]["sigma_range"] = {range->first, range->second};
    if (!trade_cfg.output_dir.empty()) write_json(trade.summary, fs::path(trade_cfg.output_dir) / "summary.json");
  }

  const auto peak = [](const ScenarioReport& r) { return r.runs.noisy_metrics.peak_error; };
  const auto rms = [](const ScenarioReport& r) { return r.runs.clean_metrics.rms_error; };
  cmp.peak_ordering = peak(l2) > peak(trade) && peak(trade) > peak(linf);
  cmp.tracking_ordering = rms(l2) < rms(trade) && rms(trade) < rms(linf);
  cmp.runs.push_back(std::move(l2));
  cmp.runs.push_back(std::move(trade));
  cmp.runs.push_back(std::move(linf));
  if (!base.output_dir.empty()) write_json(cmp.to_json(), fs::path(base.output_dir) / "comparison.json");
  return cmp;
}

}  // namespace faultest
