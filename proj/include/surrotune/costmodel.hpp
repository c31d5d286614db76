#pragma once

// Synthetic stand-in for on-device profiling: a parametric model of how
// latency, power and accuracy respond to (b, h), plus an approximate
// per-module parameter count of the width-scaled encoder/decoder network.

#include <cstdint>
#include <span>
#include <vector>

#include "surrotune/designspace.hpp"
#include "surrotune/optimizer.hpp"
#include "surrotune/surrogate.hpp"

namespace surrotune {

struct NoiseSigma {
  double latency_ms = 2.0;
  double power_w = 0.05;
  double miou = 0.5;

  friend bool operator==(const NoiseSigma&, const NoiseSigma&) = default;
};

struct CostModelParams {
  std::array<double, 6> latency{};  // quadratic basis, ms
  std::array<double, 6> power{};    // quadratic basis, W
  RationalSurrogate miou;           // percent
  NoiseSigma sigma;
  std::uint64_t seed = 0;

  /// Calibrated defaults (mirrored by data/costmodel_defaults.json).
  static CostModelParams defaults();

  SurrogateSet models() const;

  /// Positivity of latency/power and of the mIoU denominator over `box`
  /// (checked on a 1-channel grid), non-negative noise. Throws domain errors.
  void validate(const Box& box = {}) const;

  friend bool operator==(const CostModelParams&, const CostModelParams&) = default;
};

/// Noiseless model value of each metric at c.
Sample model_sample(Config c, const CostModelParams& params);

/// Deterministic in (seed, config, draw_index): each metric receives its own
/// Gaussian draw from a generator keyed on those values.
Sample synth_sample(Config c, const CostModelParams& params, std::uint64_t draw_index);

/// `repeats` samples per config, in grid order, draw indices 0..repeats-1.
std::vector<Sample> generate_dataset(std::span<const Config> grid, const CostModelParams& params,
                                     int repeats);

/// b in {16, 32, 48, 64} x h in {4, 8, 16, 32}.
std::vector<Config> default_sampling_grid();

struct ModuleParamBreakdown {
  std::int64_t encoder = 0;
  std::int64_t bridge = 0;   // multi-scale attention + fusion
  std::int64_t decoder = 0;  // selective-scan decoder stages
  std::int64_t head = 0;

  std::int64_t total() const { return encoder + bridge + decoder + head; }

  friend bool operator==(const ModuleParamBreakdown&, const ModuleParamBreakdown&) = default;
};

inline constexpr int kDefaultClassCount = 6;

ModuleParamBreakdown param_count(Config c, int num_classes = kDefaultClassCount);

}  // namespace surrotune
