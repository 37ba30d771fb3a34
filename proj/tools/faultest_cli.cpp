#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "faultest/config.hpp"
#include "faultest/scenario.hpp"

namespace fs = std::filesystem;
using namespace faultest;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitNumerical = 3;

void print_design(const SynthesisOutcome& out) {
  const auto& r = out.result;
  std::cout << "design " << to_string(r.params.mode) << ": a = " << r.params.a << ", b = " << r.params.b
            << ", rho = " << r.rho << " (L2 bound " << r.l2_bound() << "), sigma = " << r.sigma
            << " (peak bound " << r.linf_bound() << (r.linf_reduced ? ", reduced form" : "") << ")\n";
  if (out.sigma_range)
    std::cout << "sigma_max = " << out.sigma_max << " from [" << out.sigma_range->first << ", "
              << out.sigma_range->second << "]\n";
}

void print_checks(const ScenarioReport& rep) {
  const auto& s = rep.summary;
  std::cout << "clean run: peak |e_f| " << rep.runs.clean_metrics.peak_error << ", rms "
            << rep.runs.clean_metrics.rms_error << "\n";
  std::cout << "noisy run: peak |e_f| " << rep.runs.noisy_metrics.peak_error << ", rms "
            << rep.runs.noisy_metrics.rms_error << "\n";
  std::cout << "checks: " << s.at("checks").dump() << "\n";
}

void write_file(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open " + path);
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

int cmd_synthesize(const std::string& config_path, const std::string& output, const std::string& sdpa) {
  ScenarioConfig cfg = load_scenario(config_path);
  if (!output.empty()) cfg.output_dir = output;
  const ScenarioModel sm = build_scenario_model(cfg);
  const SynthesisOutcome out = synthesize_scenario(cfg, sm);
  const FilterRealization fr = build_filter(sm.aug, recover_gains(out.result));
  print_design(out);
  const fs::path dir = cfg.output_dir.empty() ? fs::path(".") : fs::path(cfg.output_dir);
  write_file(dir / "gains.json", gains_document(cfg, out, fr));
  std::cout << "wrote " << (dir / "gains.json").string() << "\n";
  if (!sdpa.empty()) {
    write_sdpa_file(assemble_synthesis_problem(sm.aug, out.result.params).to_sdp(), sdpa);
    std::cout << "wrote " << sdpa << "\n";
  }
  return kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& gains_path, const std::string& output) {
  ScenarioConfig cfg = load_scenario(config_path);
  if (!output.empty()) cfg.output_dir = output;
  if (cfg.output_dir.empty()) cfg.output_dir = ".";
  const ScenarioReport rep = run_scenario_with_gains(cfg, read_json(gains_path));
  print_design(rep.synthesis);
  print_checks(rep);
  std::cout << "wrote traces and summary to " << cfg.output_dir << "\n";
  return kExitOk;
}

int cmd_verify(const std::string& gains_path, const std::string& trace_path, const std::string& meta_path) {
  const std::string meta = meta_path.empty() ? trace_metadata_path(trace_path) : meta_path;
  const SimulationTrace trace = read_trace_csv(trace_path, fs::exists(meta) ? meta : "");
  const json report = verify_trace(read_json(gains_path), trace);
  std::cout << report.dump(2) << "\n";
  return report.at("passed").get<bool>() ? kExitOk : kExitFailed;
}

int cmd_benchmark(const std::string& mode, const std::string& config_path, const std::string& output) {
  ScenarioConfig cfg = config_path.empty() ? ScenarioConfig{} : load_scenario(config_path);
  if (!output.empty()) cfg.output_dir = output;
  if (mode == "all") {
    if (config_path.empty()) cfg.id = "robot-arm";
    const BenchmarkComparison cmp = run_benchmark_comparison(cfg);
    for (const auto& r : cmp.runs) {
      print_design(r.synthesis);
      print_checks(r);
    }
    std::cout << "peak ordering l2 > tradeoff > l2linf: " << (cmp.peak_ordering ? "holds" : "fails") << "\n";
    std::cout << "tracking ordering l2 < tradeoff < l2linf: " << (cmp.tracking_ordering ? "holds" : "fails") << "\n";
    return kExitOk;
  }
  cfg.mode = synthesis_mode_from_string(mode);
  if (config_path.empty()) cfg.id = "robot-arm-" + mode;
  const ScenarioReport rep = run_scenario(cfg);
  print_design(rep.synthesis);
  print_checks(rep);
  if (!cfg.output_dir.empty()) std::cout << "wrote artifacts to " << cfg.output_dir << "\n";
  return kExitOk;
}

int infeasibility_exit(const AllInfeasible& e) {
  for (const auto& entry : e.table())
    if (entry.status == SdpStatus::Infeasible || entry.status == SdpStatus::Unbounded) return kExitInfeasible;
  return kExitNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust fault estimation: LMI synthesis, simulation and certificate checks"};
  app.require_subcommand(1);

  std::string config, gains, trace, meta, output, sdpa, mode = "all";

  auto* syn = app.add_subcommand("synthesize", "solve the design program and write gains.json");
  syn->add_option("config", config, "scenario config (.toml or .json)")->required()->check(CLI::ExistingFile);
  syn->add_option("-o,--output", output, "output directory");
  syn->add_option("--sdpa", sdpa, "also export the program in SDPA format");

  auto* sim = app.add_subcommand("simulate", "simulate a scenario with given gains");
  sim->add_option("config", config, "scenario config (.toml or .json)")->required()->check(CLI::ExistingFile);
  sim->add_option("--gains", gains, "gains document")->required()->check(CLI::ExistingFile);
  sim->add_option("-o,--output", output, "output directory");

  auto* ver = app.add_subcommand("verify", "check a recorded trace against a gains document");
  ver->add_option("--gains", gains, "gains document")->required()->check(CLI::ExistingFile);
  ver->add_option("--trace", trace, "trace CSV")->required()->check(CLI::ExistingFile);
  ver->add_option("--meta", meta, "metadata sidecar (default: <trace>.meta.json)");

  auto* bench = app.add_subcommand("benchmark", "run the robot-arm study");
  bench->add_option("--mode", mode, "design mode")->check(CLI::IsMember({"l2", "l2linf", "tradeoff", "all"}));
  bench->add_option("--config", config, "override the default scenario")->check(CLI::ExistingFile);
  bench->add_option("-o,--output", output, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*syn) return cmd_synthesize(config, output, sdpa);
    if (*sim) return cmd_simulate(config, gains, output);
    if (*ver) return cmd_verify(gains, trace, meta);
    if (*bench) return cmd_benchmark(mode, config, output);
  } catch (const AllInfeasible& e) {
    std::cerr << "error: " << e.what() << "\n";
    for (const auto& entry : e.table())
      std::cerr << "  a = " << entry.a << ", b = " << entry.b << ": " << to_string(entry.status) << "\n";
    return infeasibility_exit(e);
  } catch (const IllConditioned& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const NonFiniteState& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  }
  return kExitFailed;
}
