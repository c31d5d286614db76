#pragma once

// Normalized weighted objective over the surrogate set and its box-constrained
// minimization:
//   F(b,h) = wL * norm(L) + wP * norm(P) - wm * norm(m),
//   norm(x) = (x - x_min) / (x_max - x_min).

#include <span>
#include <string>
#include <vector>

#include "surrotune/designspace.hpp"
#include "surrotune/surrogate.hpp"

namespace surrotune {

struct SurrogateSet {
  QuadraticSurrogate latency{{}, Target::latency_ms};
  QuadraticSurrogate power{{}, Target::power_w};
  RationalSurrogate miou;

  friend bool operator==(const SurrogateSet&, const SurrogateSet&) = default;
};

struct Weights {
  double latency = 1.0;
  double power = 1.0;
  double miou = 1.0;

  friend bool operator==(const Weights&, const Weights&) = default;
};

struct NormalizationBounds {
  double latency_min = 0.0, latency_max = 1.0;
  double power_min = 0.0, power_max = 1.0;
  double miou_min = 0.0, miou_max = 1.0;

  bool latency_degenerate() const { return !(latency_min < latency_max); }
  bool power_degenerate() const { return !(power_min < power_max); }
  bool miou_degenerate() const { return !(miou_min < miou_max); }

  friend bool operator==(const NormalizationBounds&, const NormalizationBounds&) = default;
};

/// Min/max of each surrogate's prediction over the given configurations.
NormalizationBounds compute_bounds(const SurrogateSet& models, std::span<const Config> configs);

struct ObjectiveSpec {
  Weights weights;
  NormalizationBounds bounds;
  Box box;

  /// Throws ErrorKind::domain on negative/non-finite weights, all-zero
  /// weights, a degenerate box, or a degenerate bound with a nonzero weight.
  void validate() const;
};

/// Throws ErrorKind::domain when p lies outside spec.box.
double objective(ContinuousPoint p, const SurrogateSet& models, const ObjectiveSpec& spec);
Gradient objective_gradient(ContinuousPoint p, const SurrogateSet& models,
                            const ObjectiveSpec& spec);

struct MinimizeSettings {
  Lattice lattice;
  double coarse_spacing = 1.0;  // channels, seed-evaluation lattice
  int top_seeds = 5;
  double armijo = 1e-4;
  double shrink = 0.5;
  double initial_step = 1.0;          // in box-normalized coordinates
  double gradient_tolerance = 1e-8;   // projected-gradient norm, normalized coordinates
  int max_iterations = 500;
};

struct PredictedMetrics {
  double miou = 0.0;
  double latency_ms = 0.0;
  double power_w = 0.0;
  double energy_mj = 0.0;
  double fps = 0.0;
  double fps_per_watt = 0.0;

  friend bool operator==(const PredictedMetrics&, const PredictedMetrics&) = default;
};

PredictedMetrics predict_metrics(const SurrogateSet& models, ContinuousPoint p);

struct StartRecord {
  ContinuousPoint seed;
  ContinuousPoint terminal;
  double seed_value = 0.0;
  double terminal_value = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string failure;  // non-empty when the start errored

  friend bool operator==(const StartRecord&, const StartRecord&) = default;
};

struct OptimizationResult {
  ContinuousPoint continuous_opt;
  double objective_value = 0.0;
  Config snapped;
  double snapped_objective = 0.0;
  PredictedMetrics predicted_continuous;
  PredictedMetrics predicted_snapped;
  std::vector<StartRecord> trace;

  friend bool operator==(const OptimizationResult&, const OptimizationResult&) = default;
};

/// Multi-start projected gradient descent with Armijo backtracking, followed
/// by snapping to the lattice (objective used as tie-break).
OptimizationResult minimize(const SurrogateSet& models, const ObjectiveSpec& spec,
                            const MinimizeSettings& settings = {});

}  // namespace surrotune
