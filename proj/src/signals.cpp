#include "faultest/signals.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "faultest/errors.hpp"

namespace faultest {

std::string to_string(WaveformKind k) {
  switch (k) {
    case WaveformKind::Zero: return "zero";
    case WaveformKind::Constant: return "constant";
    case WaveformKind::Sinusoid: return "sinusoid";
    case WaveformKind::Polynomial: return "polynomial";
    case WaveformKind::UniformNoise: return "uniform-noise";
  }
  return "?";
}

WaveformKind waveform_kind_from_string(const std::string& s) {
  if (s == "zero") return WaveformKind::Zero;
  if (s == "constant") return WaveformKind::Constant;
  if (s == "sinusoid") return WaveformKind::Sinusoid;
  if (s == "polynomial") return WaveformKind::Polynomial;
  if (s == "uniform-noise" || s == "piecewise-constant-uniform") return WaveformKind::UniformNoise;
  throw ConfigError("unknown signal kind '" + s + "'");
}

SignalSpec SignalSpec::zero(int dim) {
  SignalSpec s;
  s.dim = dim;
  return s;
}

SignalSpec SignalSpec::constant(Vec value) {
  SignalSpec s;
  s.kind = WaveformKind::Constant;
  s.dim = static_cast<int>(value.size());
  s.amplitude = std::move(value);
  return s;
}

SignalSpec SignalSpec::sinusoid(Vec amplitude, Vec frequency, double delay, Vec phase) {
  SignalSpec s;
  s.kind = WaveformKind::Sinusoid;
  s.dim = static_cast<int>(amplitude.size());
  s.amplitude = std::move(amplitude);
  s.frequency = std::move(frequency);
  s.delay = delay;
  s.phase = phase.size() ? std::move(phase) : Vec::Zero(s.dim);
  return s;
}

SignalSpec SignalSpec::polynomial(Mat coefficients) {
  SignalSpec s;
  s.kind = WaveformKind::Polynomial;
  s.dim = static_cast<int>(coefficients.rows());
  s.coefficients = std::move(coefficients);
  return s;
}

SignalSpec SignalSpec::uniform_noise(Vec amplitude, double hold, std::uint64_t seed) {
  SignalSpec s;
  s.kind = WaveformKind::UniformNoise;
  s.dim = static_cast<int>(amplitude.size());
  s.amplitude = std::move(amplitude);
  s.hold = hold;
  s.seed = seed;
  return s;
}

void SignalSpec::validate() const {
  if (dim < 0) throw ConfigError("signal dimension must be non-negative");
  const auto need = [&](const Vec& v, const char* name) {
    if (v.size() != dim) throw ConfigError(std::string("signal field '") + name + "' must have length " + std::to_string(dim));
  };
  switch (kind) {
    case WaveformKind::Zero: break;
    case WaveformKind::Constant: need(amplitude, "value"); break;
    case WaveformKind::Sinusoid:
      need(amplitude, "amplitude");
      need(frequency, "frequency");
      need(phase, "phase");
      break;
    case WaveformKind::Polynomial:
      if (coefficients.rows() != dim) throw ConfigError("polynomial coefficients need one row per channel");
      break;
    case WaveformKind::UniformNoise:
      need(amplitude, "amplitude");
      if (!(hold > 0.0)) throw ConfigError("uniform-noise hold interval must be positive");
      if ((amplitude.array() < 0.0).any()) throw ConfigError("uniform-noise amplitude must be non-negative");
      break;
  }
}

namespace {

Vec vec_field(const nlohmann::json& j, const char* key, int dim, double fill) {
  if (!j.contains(key)) return Vec::Constant(dim, fill);
  const auto& v = j.at(key);
  if (v.is_number()) return Vec::Constant(dim, v.get<double>());
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i].get<double>();
  return out;
}

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

SignalSpec SignalSpec::from_json(const nlohmann::json& j) {
  SignalSpec s;
  s.kind = waveform_kind_from_string(j.value("kind", std::string("zero")));
  s.dim = j.value("dim", -1);
  if (s.dim < 0) {
    for (const char* key : {"amplitude", "value", "frequency"}) {
      if (j.contains(key) && j.at(key).is_array()) {
        s.dim = static_cast<int>(j.at(key).size());
        break;
      }
    }
    if (s.dim < 0 && j.contains("coefficients")) s.dim = static_cast<int>(j.at("coefficients").size());
    if (s.dim < 0) throw ConfigError("signal needs 'dim' or a vector-valued field");
  }
  switch (s.kind) {
    case WaveformKind::Zero: break;
    case WaveformKind::Constant: s.amplitude = vec_field(j, "value", s.dim, 0.0); break;
    case WaveformKind::Sinusoid:
      s.amplitude = vec_field(j, "amplitude", s.dim, 0.0);
      s.frequency = vec_field(j, "frequency", s.dim, 0.0);
      s.phase = vec_field(j, "phase", s.dim, 0.0);
      s.delay = j.value("delay", 0.0);
      break;
    case WaveformKind::Polynomial: s.coefficients = matrix_from_json(j.at("coefficients")); break;
    case WaveformKind::UniformNoise:
      s.amplitude = vec_field(j, "amplitude", s.dim, 0.0);
      s.hold = j.value("hold", 0.0);
      s.seed = j.value("seed", std::uint64_t{0});
      break;
  }
  s.validate();
  return s;
}

nlohmann::json SignalSpec::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)}, {"dim", dim}};
  switch (kind) {
    case WaveformKind::Zero: break;
    case WaveformKind::Constant: j["value"] = vec_json(amplitude); break;
    case WaveformKind::Sinusoid:
      j["amplitude"] = vec_json(amplitude);
      j["frequency"] = vec_json(frequency);
      j["phase"] = vec_json(phase);
      j["delay"] = delay;
      break;
    case WaveformKind::Polynomial: j["coefficients"] = matrix_to_json(coefficients); break;
    case WaveformKind::UniformNoise:
      j["amplitude"] = vec_json(amplitude);
      j["hold"] = hold;
      j["seed"] = seed;
      break;
  }
  return j;
}

Signal::Signal(SignalSpec spec, double horizon) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == WaveformKind::UniformNoise) {
    const auto count = static_cast<std::size_t>(std::ceil(std::max(horizon, 0.0) / spec_.hold)) + 2;
    std::mt19937_64 rng(spec_.seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    samples_.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      Vec v(spec_.dim);
      for (int i = 0; i < spec_.dim; ++i) v(i) = spec_.amplitude(i) * unit(rng);
      samples_.push_back(std::move(v));
    }
  }
}

Vec Signal::value(double t) const {
  switch (spec_.kind) {
    case WaveformKind::Zero: return Vec::Zero(spec_.dim);
    case WaveformKind::Constant: return spec_.amplitude;
    case WaveformKind::UniformNoise: {
      const double idx = std::floor(t / spec_.hold + 1e-9);
      if (idx < 0.0 || idx >= static_cast<double>(samples_.size())) {
        throw Error("noise signal evaluated outside its horizon at t = " + std::to_string(t));
      }
      return samples_[static_cast<std::size_t>(idx)];
    }
    default: return *derivative(t, 0);
  }
}

std::optional<Vec> Signal::derivative(double t, int k) const {
  const int d = spec_.dim;
  switch (spec_.kind) {
    case WaveformKind::Zero: return Vec::Zero(d);
    case WaveformKind::Constant: return k == 0 ? spec_.amplitude : Vec::Zero(d);
    case WaveformKind::UniformNoise:
      if (k == 0) return value(t);
      return std::nullopt;
    case WaveformKind::Sinusoid: {
      Vec out = Vec::Zero(d);
      if (t < spec_.delay) return out;
      for (int i = 0; i < d; ++i) {
        const double w = spec_.frequency(i);
        out(i) = spec_.amplitude(i) * std::pow(w, k) *
                 std::sin(w * (t - spec_.delay) + spec_.phase(i) + k * std::numbers::pi / 2.0);
      }
      return out;
    }
    case WaveformKind::Polynomial: {
      Vec out = Vec::Zero(d);
      const Mat& c = spec_.coefficients;
      for (Eigen::Index p = k; p < c.cols(); ++p) {
        double fall = 1.0;
        for (Eigen::Index q = p - k + 1; q <= p; ++q) fall *= static_cast<double>(q);
        out += c.col(p) * fall * std::pow(t, static_cast<double>(p - k));
      }
      return out;
    }
  }
  return std::nullopt;
}

std::vector<double> Signal::breakpoints(double t0, double t1) const {
  std::vector<double> out;
  if (spec_.kind == WaveformKind::Sinusoid && spec_.delay > t0 && spec_.delay < t1) out.push_back(spec_.delay);
  if (spec_.kind == WaveformKind::UniformNoise) {
    for (double t = std::ceil(t0 / spec_.hold) * spec_.hold; t < t1; t += spec_.hold) {
      if (t > t0) out.push_back(t);
    }
  }
  return out;
}

bool Signal::identically_zero() const {
  switch (spec_.kind) {
    case WaveformKind::Zero: return true;
    case WaveformKind::Constant:
    case WaveformKind::Sinusoid:
    case WaveformKind::UniformNoise: return spec_.amplitude.size() == 0 || spec_.amplitude.cwiseAbs().maxCoeff() == 0.0;
    case WaveformKind::Polynomial: return spec_.coefficients.size() == 0 || spec_.coefficients.cwiseAbs().maxCoeff() == 0.0;
  }
  return false;
}

}  // namespace faultest
