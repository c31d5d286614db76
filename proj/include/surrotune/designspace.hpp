#pragma once

// Core domain types for the two-variable width design space:
// b = encoder base width, h = decoder bottleneck width (both in channels).

#include <compare>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace surrotune {

struct Config {
  int b = 0;
  int h = 0;

  friend auto operator<=>(const Config&, const Config&) = default;
};

/// Throws ErrorKind::domain unless b >= 1 and h >= 1.
Config make_config(int b, int h);

struct ContinuousPoint {
  double b = 0.0;
  double h = 0.0;

  friend bool operator==(const ContinuousPoint&, const ContinuousPoint&) = default;
};

inline ContinuousPoint to_point(Config c) {
  return {static_cast<double>(c.b), static_cast<double>(c.h)};
}

/// Closed rectangle [b_lo, b_hi] x [h_lo, h_hi].
struct Box {
  double b_lo = 16.0;
  double b_hi = 64.0;
  double h_lo = 4.0;
  double h_hi = 32.0;

  void validate() const;
  bool contains(ContinuousPoint p, double slack = 0.0) const;
  ContinuousPoint clamp(ContinuousPoint p) const;

  friend bool operator==(const Box&, const Box&) = default;
};

/// Valid discrete configurations: b in {b_lo, b_lo + b_step, ..., b_hi}, likewise h.
struct Lattice {
  int b_step = 8;
  int b_lo = 16;
  int b_hi = 64;
  int h_step = 4;
  int h_lo = 4;
  int h_hi = 32;

  void validate() const;
  bool contains(Config c) const;
  Box box() const;
  std::vector<Config> points() const;

  friend bool operator==(const Lattice&, const Lattice&) = default;
};

struct Sample {
  Config config;
  double miou = 0.0;        // percent
  double latency_ms = 0.0;  // per image
  double power_w = 0.0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Validates the Sample invariants (positive latency/power, mIoU in [0,100]).
Sample make_sample(Config c, double miou, double latency_ms, double power_w);

class SampleSet {
 public:
  SampleSet() = default;
  explicit SampleSet(std::vector<Sample> samples);

  const std::vector<Sample>& samples() const noexcept { return samples_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  bool distinct_configs() const noexcept { return distinct_; }

  /// Distinct configurations, sorted by (b, h).
  std::vector<Config> configs() const;
  std::size_t distinct_count() const;

  friend bool operator==(const SampleSet&, const SampleSet&) = default;

 private:
  std::vector<Sample> samples_;
  bool distinct_ = true;
};

struct DerivedMetrics {
  double energy_mj = 0.0;
  double fps = 0.0;
  double fps_per_watt = 0.0;
};

DerivedMetrics derive_metrics(double latency_ms, double power_w);

/// One sample per distinct config, each field the arithmetic mean of its
/// repeats. Output is ordered by (b, h).
SampleSet aggregate_repeats(std::span<const Sample> raw);

using ConfigScorer = std::function<double(Config)>;

/// Nearest lattice point in step-scaled Euclidean distance. Exact ties go to
/// the lower scorer value when a scorer is given, then to lower b, then lower h.
Config snap_to_lattice(ContinuousPoint p, const Lattice& lattice,
                       const ConfigScorer& tiebreak = {});

}  // namespace surrotune
