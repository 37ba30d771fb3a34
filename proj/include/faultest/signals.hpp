#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "faultest/plant.hpp"

namespace faultest {

enum class WaveformKind { Zero, Constant, Sinusoid, Polynomial, UniformNoise };

std::string to_string(WaveformKind k);
WaveformKind waveform_kind_from_string(const std::string& s);

/// Description of a vector-valued exogenous signal.
///   constant:      value = amplitude
///   sinusoid:      amplitude_i sin(frequency_i (t - delay) + phase_i) for t >= delay, 0 before
///   polynomial:    sum_k coefficients(i, k) t^k
///   uniform-noise: piecewise constant, each hold interval drawn from U[-amplitude_i, amplitude_i]
struct SignalSpec {
  WaveformKind kind = WaveformKind::Zero;
  int dim = 0;
  Vec amplitude;
  Vec frequency;
  Vec phase;
  double delay = 0.0;
  Mat coefficients;
  double hold = 0.0;
  std::uint64_t seed = 0;

  static SignalSpec zero(int dim);
  static SignalSpec constant(Vec value);
  static SignalSpec sinusoid(Vec amplitude, Vec frequency, double delay = 0.0, Vec phase = Vec());
  static SignalSpec polynomial(Mat coefficients);
  static SignalSpec uniform_noise(Vec amplitude, double hold, std::uint64_t seed);

  bool differentiable() const { return kind != WaveformKind::UniformNoise; }
  /// Throws ConfigError on inconsistent fields.
  void validate() const;

  static SignalSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// A realized signal. Noise samples are drawn once at construction for
/// [0, horizon], so evaluation is pure and repeatable.
class Signal {
 public:
  Signal() = default;
  Signal(SignalSpec spec, double horizon);

  const SignalSpec& spec() const { return spec_; }
  int dim() const { return spec_.dim; }
  bool differentiable() const { return spec_.differentiable(); }

  Vec value(double t) const;
  /// k-th time derivative; empty for non-differentiable signals.
  std::optional<Vec> derivative(double t, int k) const;
  /// Times where the signal or its first derivative may jump.
  std::vector<double> breakpoints(double t0, double t1) const;
  /// True when all values are exactly zero for every t.
  bool identically_zero() const;

 private:
  SignalSpec spec_;
  std::vector<Vec> samples_;
};

}  // namespace faultest
