#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "faultest/config.hpp"
#include "faultest/robot_arm.hpp"
#include "faultest/scenario.hpp"
#include "faultest/sdp.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

std::string robot_arm_plant(const std::string& params) {
  const auto p = faultest::RobotArmParams::from_json(params.empty() ? json::object() : json::parse(params));
  return faultest::plant_to_json(faultest::build_robot_arm(p).model()).dump();
}

std::string normalize_config(const std::string& config, const std::string& base_dir) {
  return faultest::scenario_to_json(faultest::scenario_from_json(json::parse(config), base_dir)).dump();
}

std::string synthesize(const std::string& config, const std::string& base_dir) {
  py::gil_scoped_release release;
  const auto cfg = faultest::scenario_from_json(json::parse(config), base_dir);
  const auto sm = faultest::build_scenario_model(cfg);
  const auto out = faultest::synthesize_scenario(cfg, sm);
  const auto fr = faultest::build_filter(sm.aug, faultest::recover_gains(out.result));
  return faultest::gains_document(cfg, out, fr).dump();
}

std::string run_scenario(const std::string& config, const std::string& base_dir) {
  py::gil_scoped_release release;
  return faultest::run_scenario(faultest::scenario_from_json(json::parse(config), base_dir)).summary.dump();
}

std::string verify_trace(const std::string& gains, const std::string& csv_path, const std::string& meta_path) {
  py::gil_scoped_release release;
  const auto trace = faultest::read_trace_csv(csv_path, meta_path.empty() ? faultest::trace_metadata_path(csv_path)
                                                                          : meta_path);
  return faultest::verify_trace(json::parse(gains), trace).dump();
}

py::dict solve_sdpa(const std::string& text) {
  std::istringstream is(text);
  const auto problem = faultest::read_sdpa(is);
  faultest::SdpSolution sol;
  {
    py::gil_scoped_release release;
    sol = faultest::solve(problem);
  }
  py::dict out;
  out["status"] = faultest::to_string(sol.status);
  out["objective"] = sol.objective;
  out["dual_objective"] = sol.dual_objective;
  out["iterations"] = sol.iterations;
  out["x"] = std::vector<double>(sol.x.data(), sol.x.data() + sol.x.size());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  static py::exception<faultest::Error> base(m, "FaultestError");
  static py::exception<faultest::ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<faultest::AllInfeasible> infeasible(m, "InfeasibleError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const faultest::ConfigError& e) {
      config_error(e.what());
    } catch (const faultest::AllInfeasible& e) {
      infeasible(e.what());
    } catch (const faultest::Error& e) {
      base(e.what());
    } catch (const json::exception& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    }
  });

  m.attr("__version__") = FAULTEST_VERSION;
  m.def("robot_arm_plant", &robot_arm_plant, py::arg("params") = "");
  m.def("load_config", [](const std::string& path) {
    return faultest::scenario_to_json(faultest::load_scenario(path)).dump();
  });
  m.def("normalize_config", &normalize_config, py::arg("config"), py::arg("base_dir") = ".");
  m.def("synthesize", &synthesize, py::arg("config"), py::arg("base_dir") = ".");
  m.def("run_scenario", &run_scenario, py::arg("config"), py::arg("base_dir") = ".");
  m.def("verify_trace", &verify_trace, py::arg("gains"), py::arg("csv_path"), py::arg("meta_path") = "");
  m.def("solve_sdpa", &solve_sdpa, py::arg("text"));
}
