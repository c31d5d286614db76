#pragma once

// Surrogate models over the (b, h) design space:
//   quadratic  y = c0 + c1 b + c2 h + c3 b^2 + c4 bh + c5 h^2   (latency, power)
//   rational   m = (a3 + a4 b + a5 h + a6 bh) / (a0 + a1 b + a2 h + bh)   (mIoU)

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "surrotune/designspace.hpp"

namespace surrotune {

enum class Target { latency_ms, power_w, miou };

std::string_view to_string(Target t);
Target target_from_string(std::string_view name);

/// Metric value of a sample for the given target.
double target_value(const Sample& s, Target t);

struct Gradient {
  double db = 0.0;
  double dh = 0.0;
};

std::array<double, 6> quad_features(double b, double h);

struct QuadraticSurrogate {
  std::array<double, 6> coeffs{};
  Target target = Target::latency_ms;

  double predict(ContinuousPoint p) const;
  Gradient gradient(ContinuousPoint p) const;

  friend bool operator==(const QuadraticSurrogate&, const QuadraticSurrogate&) = default;
};

inline constexpr double kPoleThreshold = 1e-9;

struct RationalSurrogate {
  std::array<double, 4> numerator{};    // a3, a4, a5, a6 over [1, b, h, bh]
  std::array<double, 3> denominator{};  // a0, a1, a2 over [1, b, h]; bh coefficient is 1

  double denominator_at(ContinuousPoint p) const;
  double numerator_at(ContinuousPoint p) const;

  /// Throws ErrorKind::pole when |denominator| < kPoleThreshold.
  double predict(ContinuousPoint p) const;
  Gradient gradient(ContinuousPoint p) const;

  /// Packed as a0..a6.
  std::array<double, 7> packed() const;
  static RationalSurrogate from_packed(const std::array<double, 7>& a);

  friend bool operator==(const RationalSurrogate&, const RationalSurrogate&) = default;
};

struct FitDiagnostics {
  double r_squared = 0.0;
  double rmse = 0.0;
  std::vector<double> residuals;  // observed - predicted, in sample order
  std::optional<double> loo_press;
  std::optional<double> loo_q_squared;
  std::vector<double> loo_residuals;  // held-out errors when LOO ran

  friend bool operator==(const FitDiagnostics&, const FitDiagnostics&) = default;
};

/// R^2 = 1 - SS_res/SS_tot; when SS_tot == 0 it is 1 if SS_res == 0, else 0.
double r_squared(std::span<const double> observed, std::span<const double> residuals);

struct QuadraticFit {
  QuadraticSurrogate model;
  FitDiagnostics diagnostics;
};

/// Ordinary least squares on the quadratic basis via column-pivoted QR.
/// Needs at least 6 distinct configurations and a full-rank design.
QuadraticFit fit_quadratic(const SampleSet& data, Target target);

struct RationalFitOptions {
  Box check_box{};             // denominator positivity is verified over this box
  int check_resolution_b = 65;
  int check_resolution_h = 57;
  int max_iterations = 200;
  double tolerance = 1e-10;    // relative residual-norm improvement
  double initial_damping = 1e-3;
  // The fit keeps a0 + a1 b + a2 h + bh >= margin * bh at the box corners
  // (hence over the whole box, the difference being bilinear). A positive
  // linearized solution below the margin is kept and refined at half its own
  // corner ratio instead.
  double denominator_margin = 0.05;
};

struct RationalFit {
  RationalSurrogate model;
  FitDiagnostics diagnostics;
  double linearized_ss = 0.0;  // true-residual SS of the linearized initializer
  bool constrained_init = false;  // unconstrained initializer violated the margin
  double final_ss = 0.0;
  int iterations = 0;
  bool refined = false;  // false when the initializer was kept
};

/// Two-stage fit: linearized least squares (re-solved with the denominator
/// margin as corner constraints when the unconstrained solution violates it),
/// then Levenberg-Marquardt on the true residuals with margin-violating steps
/// rejected. Throws underdetermined/rank/pole errors.
RationalFit fit_rational(const SampleSet& data, const RationalFitOptions& options = {});

/// Verifies the denominator stays >= kPoleThreshold on an evenly spaced grid.
/// Throws ErrorKind::pole otherwise.
void check_denominator(const RationalSurrogate& model, const Box& box, int resolution_b,
                       int resolution_h);

struct Fitter {
  enum class Kind { quadratic, rational };
  Kind kind = Kind::quadratic;
  Target target = Target::latency_ms;
  RationalFitOptions rational_options{};

  static Fitter quadratic(Target t) { return {Kind::quadratic, t, {}}; }
  static Fitter rational(RationalFitOptions options = {}) {
    return {Kind::rational, Target::miou, options};
  }
  std::size_t minimum_configs() const { return kind == Kind::quadratic ? 6 : 7; }
};

/// Full-data diagnostics plus leave-one-out PRESS and Q^2.
FitDiagnostics loo_cross_validate(const SampleSet& data, const Fitter& fitter);

}  // namespace surrotune
