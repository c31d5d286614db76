#include "surrotune/surrogate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "surrotune/error.hpp"

namespace surrotune {

namespace {

constexpr std::array<const char*, 6> kQuadTermNames{"1", "b", "h", "b^2", "b*h", "h^2"};
constexpr std::array<const char*, 4> kRationalBasisNames{"1", "b", "h", "b*h"};

// Column norms used to equilibrate design matrices before factorization.
Eigen::VectorXd column_scales(const Eigen::MatrixXd& x) {
  Eigen::VectorXd s = x.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < s.size(); ++j) {
    if (s[j] == 0.0) s[j] = 1.0;
  }
  return s;
}

// Null-space directions of a column-scaled design, expressed in the original
// (unscaled) coefficient space.
template <std::size_t N>
std::string describe_null_space(const Eigen::MatrixXd& scaled, const Eigen::VectorXd& scales,
                                const std::array<const char*, N>& names) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(scaled, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double tol = 1e-10 * std::max(1.0, sv.size() > 0 ? sv[0] : 1.0);
  std::ostringstream os;
  bool first_dir = true;
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(N); ++k) {
    const double s = k < sv.size() ? sv[k] : 0.0;
    if (s > tol) continue;
    Eigen::VectorXd dir = svd.matrixV().col(k).cwiseQuotient(scales);
    dir /= dir.cwiseAbs().maxCoeff();
    if (!first_dir) os << "; ";
    first_dir = false;
    bool first_term = true;
    for (std::size_t j = 0; j < N; ++j) {
      if (std::abs(dir[j]) < 1e-9) continue;
      if (!first_term) os << " + ";
      first_term = false;
      os << dir[j] << "*" << names[j];
    }
  }
  return os.str();
}

double sum_squares(std::span<const double> v) {
  return std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
}

FitDiagnostics diagnostics_from(std::span<const double> observed,
                                std::span<const double> predicted) {
  FitDiagnostics d;
  d.residuals.resize(observed.size());
  for (std::size_t i = 0; i < observed.size(); ++i) d.residuals[i] = observed[i] - predicted[i];
  d.r_squared = r_squared(observed, d.residuals);
  d.rmse = observed.empty() ? 0.0
                            : std::sqrt(sum_squares(d.residuals) /
                                        static_cast<double>(observed.size()));
  return d;
}

double zero_variance_ratio(double ss_res, double ss_tot) {
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

double total_sum_squares(std::span<const double> observed) {
  if (observed.empty()) return 0.0;
  const double mean =
      std::accumulate(observed.begin(), observed.end(), 0.0) / static_cast<double>(observed.size());
  double ss = 0.0;
  for (double y : observed) ss += (y - mean) * (y - mean);
  return ss;
}

std::vector<double> targets_of(const SampleSet& data, Target t) {
  std::vector<double> y;
  y.reserve(data.size());
  for (const auto& s : data.samples()) y.push_back(target_value(s, t));
  return y;
}

void require_distinct(const SampleSet& data, std::size_t needed, const char* what) {
  const std::size_t have = data.distinct_count();
  if (have < needed) {
    throw Error(ErrorKind::underdetermined, std::string(what) + " needs at least " +
                                                std::to_string(needed) +
                                                " distinct configs, got " + std::to_string(have));
  }
}

// ---- rational refinement helpers -------------------------------------------

using Packed = std::array<double, 7>;

// True-residual SS; +inf when any data point hits the pole threshold.
double rational_ss(const Packed& a, const SampleSet& data, std::span<const double> y) {
  const auto model = RationalSurrogate::from_packed(a);
  double ss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto p = to_point(data.samples()[i].config);
    const double den = model.denominator_at(p);
    if (!(den >= kPoleThreshold) && !(den <= -kPoleThreshold)) {
      return std::numeric_limits<double>::infinity();
    }
    const double r = y[i] - model.numerator_at(p) / den;
    ss += r * r;
  }
  return std::isfinite(ss) ? ss : std::numeric_limits<double>::infinity();
}

bool denominator_positive(const RationalSurrogate& model, const Box& box, int nb, int nh) {
  for (int i = 0; i < nb; ++i) {
    const double b = i == nb - 1 ? box.b_hi : box.b_lo + (box.b_hi - box.b_lo) * i / (nb - 1);
    for (int j = 0; j < nh; ++j) {
      const double h = j == nh - 1 ? box.h_hi : box.h_lo + (box.h_hi - box.h_lo) * j / (nh - 1);
      if (!(model.denominator_at({b, h}) >= kPoleThreshold)) return false;
    }
  }
  return true;
}

struct LinearizedSystem {
  Eigen::MatrixXd a;
  Eigen::VectorXd rhs;
};

// m (a0 + a1 b + a2 h + bh) = a3 + a4 b + a5 h + a6 bh, rearranged so the
// unknowns a0..a6 appear linearly with -m b h on the right.
LinearizedSystem linearized_system(const SampleSet& data, std::span<const double> m) {
  const auto n = static_cast<Eigen::Index>(data.size());
  LinearizedSystem sys{Eigen::MatrixXd(n, 7), Eigen::VectorXd(n)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = data.samples()[static_cast<std::size_t>(i)].config;
    const double b = c.b, h = c.h, mi = m[static_cast<std::size_t>(i)];
    sys.a.row(i) << mi, mi * b, mi * h, -1.0, -b, -h, -b * h;
    sys.rhs[i] = -mi * b * h;
  }
  return sys;
}

Packed to_packed(const Eigen::VectorXd& x) {
  Packed out{};
  for (int k = 0; k < 7; ++k) out[static_cast<std::size_t>(k)] = x[k];
  return out;
}

// Minimum-norm least squares (rank deficiency arises for targets that the
// rational family represents non-uniquely, e.g. constants).
Packed solve_linearized(const LinearizedSystem& sys) {
  const Eigen::VectorXd scales = column_scales(sys.a);
  const Eigen::MatrixXd scaled = sys.a * scales.cwiseInverse().asDiagonal();
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-12);
  cod.compute(scaled);
  return to_packed(cod.solve(sys.rhs).cwiseQuotient(scales));
}

std::array<ContinuousPoint, 4> corners_of(const Box& box) {
  return {{{box.b_lo, box.h_lo}, {box.b_lo, box.h_hi}, {box.b_hi, box.h_lo}, {box.b_hi, box.h_hi}}};
}

// Smallest D / bh over the box corners; D - rho * bh is bilinear, so D >= rho * bh
// at the corners implies it everywhere in the box.
double corner_ratio(const Packed& a, const Box& box) {
  double rho = std::numeric_limits<double>::infinity();
  for (const auto& c : corners_of(box)) {
    const double bh = c.b * c.h;
    rho = std::min(rho, (a[0] + a[1] * c.b + a[2] * c.h + bh) / bh);
  }
  return rho;
}

bool satisfies_margin(const Packed& a, const Box& box, double margin) {
  for (const auto& c : corners_of(box)) {
    const double bh = c.b * c.h;
    const double slack = a[0] + a[1] * c.b + a[2] * c.h + (1.0 - margin) * bh;
    if (!(slack >= -1e-9 * std::abs(bh))) return false;
  }
  return true;
}

// Rows g_c = [1, b_c, h_c, 0, 0, 0, 0] and bounds (margin - 1) b_c h_c, so that
// g_c . a >= bound_c is the margin condition at corner c.
struct MarginConstraints {
  Eigen::MatrixXd g;
  Eigen::VectorXd bound;
};

MarginConstraints margin_constraints(const Box& box, double margin) {
  MarginConstraints out{Eigen::MatrixXd::Zero(4, 7), Eigen::VectorXd(4)};
  const auto corners = corners_of(box);
  for (Eigen::Index k = 0; k < 4; ++k) {
    const auto& c = corners[static_cast<std::size_t>(k)];
    out.g.row(k).head(3) << 1.0, c.b, c.h;
    out.bound[k] = (margin - 1.0) * c.b * c.h;
  }
  return out;
}

// min |a x - rhs| subject to g x >= bound, for a handful of constraint rows.
// Every active set is enumerated; the best feasible equality-constrained
// solution is the constrained optimum. Empty when nothing is feasible.
std::optional<Eigen::VectorXd> constrained_least_squares(const Eigen::MatrixXd& a,
                                                         const Eigen::VectorXd& rhs,
                                                         const Eigen::MatrixXd& g,
                                                         const Eigen::VectorXd& bound) {
  const Eigen::VectorXd scales = column_scales(a);
  const Eigen::MatrixXd scaled = a * scales.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd gs = g * scales.cwiseInverse().asDiagonal();
  const auto cols = a.cols();
  const auto m = g.rows();

  std::optional<Eigen::VectorXd> best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int mask = 0; mask < (1 << m); ++mask) {
    Eigen::VectorXd particular = Eigen::VectorXd::Zero(cols);
    Eigen::MatrixXd null_basis = Eigen::MatrixXd::Identity(cols, cols);
    if (mask != 0) {
      std::vector<Eigen::Index> rows;
      for (Eigen::Index k = 0; k < m; ++k) {
        if (mask & (1 << k)) rows.push_back(k);
      }
      const auto k = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd c(k, cols);
      Eigen::VectorXd d(k);
      for (Eigen::Index r = 0; r < k; ++r) {
        c.row(r) = gs.row(rows[static_cast<std::size_t>(r)]);
        d[r] = bound[rows[static_cast<std::size_t>(r)]];
      }
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
      svd.setThreshold(1e-12);
      particular = svd.solve(d);
      if ((c * particular - d).norm() > 1e-9 * (1.0 + d.norm())) continue;  // inconsistent
      null_basis = svd.matrixV().rightCols(cols - svd.rank());
    }

    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
    cod.setThreshold(1e-12);
    cod.compute(scaled * null_basis);
    const Eigen::VectorXd y = particular + null_basis * cod.solve(rhs - scaled * particular);

    const Eigen::VectorXd slack = gs * y - bound;
    bool feasible = true;
    for (Eigen::Index r = 0; r < m; ++r) {
      if (slack[r] < -1e-9 * (1.0 + std::abs(bound[r]))) feasible = false;
    }
    if (!feasible) continue;
    const double obj = (scaled * y - rhs).squaredNorm();
    if (obj < best_obj) {
      best_obj = obj;
      best = y.cwiseQuotient(scales);
    }
  }
  return best;
}

}  // namespace

// ---- targets -----------------------------------------------------------------

std::string_view to_string(Target t) {
  switch (t) {
    case Target::latency_ms: return "latency_ms";
    case Target::power_w: return "power_w";
    case Target::miou: return "miou";
  }
  return "unknown";
}

Target target_from_string(std::string_view name) {
  if (name == "latency_ms") return Target::latency_ms;
  if (name == "power_w") return Target::power_w;
  if (name == "miou") return Target::miou;
  throw Error(ErrorKind::format, "unknown target '" + std::string(name) + "'");
}

double target_value(const Sample& s, Target t) {
  switch (t) {
    case Target::latency_ms: return s.latency_ms;
    case Target::power_w: return s.power_w;
    case Target::miou: return s.miou;
  }
  return 0.0;
}

// ---- quadratic -----------------------------------------------------------------

std::array<double, 6> quad_features(double b, double h) {
  return {1.0, b, h, b * b, b * h, h * h};
}

double QuadraticSurrogate::predict(ContinuousPoint p) const {
  const auto f = quad_features(p.b, p.h);
  double v = 0.0;
  for (std::size_t k = 0; k < 6; ++k) v += coeffs[k] * f[k];
  return v;
}

Gradient QuadraticSurrogate::gradient(ContinuousPoint p) const {
  const auto& c = coeffs;
  return {c[1] + 2.0 * c[3] * p.b + c[4] * p.h, c[2] + c[4] * p.b + 2.0 * c[5] * p.h};
}

double r_squared(std::span<const double> observed, std::span<const double> residuals) {
  return zero_variance_ratio(sum_squares(residuals), total_sum_squares(observed));
}

QuadraticFit fit_quadratic(const SampleSet& data, Target target) {
  if (target == Target::miou) {
    throw Error(ErrorKind::domain, "quadratic surrogates model latency_ms or power_w only");
  }
  require_distinct(data, 6, "fit_quadratic");

  const auto n = static_cast<Eigen::Index>(data.size());
  const auto y_std = targets_of(data, target);
  Eigen::MatrixXd x(n, 6);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(y_std.data(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& c = data.samples()[static_cast<std::size_t>(i)].config;
    const auto f = quad_features(c.b, c.h);
    for (Eigen::Index k = 0; k < 6; ++k) x(i, k) = f[static_cast<std::size_t>(k)];
  }

  const Eigen::VectorXd scales = column_scales(x);
  const Eigen::MatrixXd scaled = x * scales.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
  qr.setThreshold(1e-10);
  qr.compute(scaled);
  if (qr.rank() < 6) {
    throw Error(ErrorKind::rank, "fit_quadratic: design matrix rank " + std::to_string(qr.rank()) +
                                     " < 6; deficient directions: " +
                                     describe_null_space(scaled, scales, kQuadTermNames));
  }
  const Eigen::VectorXd coef = qr.solve(y).cwiseQuotient(scales);

  QuadraticFit fit;
  fit.model.target = target;
  for (std::size_t k = 0; k < 6; ++k) fit.model.coeffs[k] = coef[static_cast<Eigen::Index>(k)];

  std::vector<double> predicted;
  predicted.reserve(data.size());
  for (const auto& s : data.samples()) predicted.push_back(fit.model.predict(to_point(s.config)));
  fit.diagnostics = diagnostics_from(y_std, predicted);
  return fit;
}

// ---- rational ------------------------------------------------------------------

double RationalSurrogate::denominator_at(ContinuousPoint p) const {
  return denominator[0] + denominator[1] * p.b + denominator[2] * p.h + p.b * p.h;
}

double RationalSurrogate::numerator_at(ContinuousPoint p) const {
  return numerator[0] + numerator[1] * p.b + numerator[2] * p.h + numerator[3] * p.b * p.h;
}

double RationalSurrogate::predict(ContinuousPoint p) const {
  const double den = denominator_at(p);
  if (!(std::abs(den) >= kPoleThreshold)) {
    std::ostringstream os;
    os << "rational surrogate denominator " << den << " at (" << p.b << ", " << p.h << ")";
    throw Error(ErrorKind::pole, os.str());
  }
  return numerator_at(p) / den;
}

Gradient RationalSurrogate::gradient(ContinuousPoint p) const {
  const double den = denominator_at(p);
  if (!(std::abs(den) >= kPoleThreshold)) {
    throw Error(ErrorKind::pole, "rational surrogate gradient at a pole");
  }
  const double num = numerator_at(p);
  const double dnum_db = numerator[1] + numerator[3] * p.h;
  const double dnum_dh = numerator[2] + numerator[3] * p.b;
  const double dden_db = denominator[1] + p.h;
  const double dden_dh = denominator[2] + p.b;
  const double den2 = den * den;
  return {(dnum_db * den - num * dden_db) / den2, (dnum_dh * den - num * dden_dh) / den2};
}

std::array<double, 7> RationalSurrogate::packed() const {
  return {denominator[0], denominator[1], denominator[2], numerator[0],
          numerator[1],   numerator[2],   numerator[3]};
}

RationalSurrogate RationalSurrogate::from_packed(const std::array<double, 7>& a) {
  return {{a[3], a[4], a[5], a[6]}, {a[0], a[1], a[2]}};
}

void check_denominator(const RationalSurrogate& model, const Box& box, int resolution_b,
                       int resolution_h) {
  if (resolution_b < 2 || resolution_h < 2) {
    throw Error(ErrorKind::domain, "denominator check grid needs >= 2 points per axis");
  }
  if (!denominator_positive(model, box, resolution_b, resolution_h)) {
    std::ostringstream os;
    os << "rational denominator is not strictly positive on [" << box.b_lo << ", " << box.b_hi
       << "] x [" << box.h_lo << ", " << box.h_hi << "]";
    throw Error(ErrorKind::pole, os.str());
  }
}

RationalFit fit_rational(const SampleSet& data, const RationalFitOptions& options) {
  require_distinct(data, 7, "fit_rational");
  options.check_box.validate();

  {
    // The configuration basis must be full rank regardless of the targets.
    const auto configs = data.configs();
    Eigen::MatrixXd basis(static_cast<Eigen::Index>(configs.size()), 4);
    for (std::size_t i = 0; i < configs.size(); ++i) {
      const double b = configs[i].b, h = configs[i].h;
      basis.row(static_cast<Eigen::Index>(i)) << 1.0, b, h, b * h;
    }
    const Eigen::VectorXd scales = column_scales(basis);
    const Eigen::MatrixXd scaled = basis * scales.cwiseInverse().asDiagonal();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    qr.setThreshold(1e-10);
    qr.compute(scaled);
    if (qr.rank() < 4) {
      throw Error(ErrorKind::rank, "fit_rational: configuration basis rank " +
                                       std::to_string(qr.rank()) +
                                       " < 4; deficient directions: " +
                                       describe_null_space(scaled, scales, kRationalBasisNames));
    }
  }

  const auto m = targets_of(data, Target::miou);
  const Box& box = options.check_box;
  const auto sys = linearized_system(data, m);
  Packed initial = solve_linearized(sys);
  // A positive initializer below the margin is kept (exact in-family data must
  // be reproduced); refinement is then held to half its corner ratio.
  const double rho = corner_ratio(initial, box);
  const bool constrained_init = !(rho > 0.0);
  const double margin =
      rho >= options.denominator_margin || constrained_init ? options.denominator_margin : rho / 2;
  const auto constraints = margin_constraints(box, margin);
  if (constrained_init) {
    const auto x = constrained_least_squares(sys.a, sys.rhs, constraints.g, constraints.bound);
    if (!x) {
      throw Error(ErrorKind::pole, "fit_rational: no initializer satisfies the denominator margin");
    }
    initial = to_packed(*x);
  }
  const double initial_ss = rational_ss(initial, data, m);

  // Levenberg-Marquardt on the true residuals.
  Packed current = initial;
  double ss = initial_ss;
  double lambda = options.initial_damping;
  int iterations = 0;
  const auto n = static_cast<Eigen::Index>(data.size());

  while (std::isfinite(ss) && ss > 0.0 && iterations < options.max_iterations) {
    const auto model = RationalSurrogate::from_packed(current);
    Eigen::MatrixXd jac(n, 7);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto p = to_point(data.samples()[static_cast<std::size_t>(i)].config);
      const double den = model.denominator_at(p);
      const double pred = model.numerator_at(p) / den;
      jac.row(i) << -pred / den, -pred * p.b / den, -pred * p.h / den, 1.0 / den, p.b / den,
          p.h / den, p.b * p.h / den;
      r[i] = m[static_cast<std::size_t>(i)] - pred;
    }
    Eigen::VectorXd packed_vector(7);
    for (std::size_t k = 0; k < 7; ++k) packed_vector[static_cast<Eigen::Index>(k)] = current[k];
    Eigen::VectorXd diag = jac.colwise().squaredNorm().transpose();
    const double floor = std::max(diag.maxCoeff(), 1.0) * 1e-15;
    diag = diag.cwiseMax(floor);

    bool accepted = false;
    bool converged = false;
    while (iterations < options.max_iterations) {
      ++iterations;
      Eigen::MatrixXd aug(n + 7, 7);
      aug.topRows(n) = jac;
      aug.bottomRows(7) = (lambda * diag).cwiseSqrt().asDiagonal();
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 7);
      rhs.head(n) = r;
      // The step keeps current + step inside the margin.
      const Eigen::VectorXd step_bound = constraints.bound - constraints.g * packed_vector;
      const auto step = constrained_least_squares(aug, rhs, constraints.g, step_bound);

      Packed trial = current;
      double trial_ss = std::numeric_limits<double>::infinity();
      if (step) {
        for (std::size_t k = 0; k < 7; ++k) trial[k] += (*step)[static_cast<Eigen::Index>(k)];
        if (satisfies_margin(trial, box, margin)) trial_ss = rational_ss(trial, data, m);
      }

      if (trial_ss < ss) {
        const double improvement = (std::sqrt(ss) - std::sqrt(trial_ss)) / std::sqrt(ss);
        current = trial;
        ss = trial_ss;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        converged = improvement < options.tolerance;
        break;
      }
      if (lambda >= 1e12) break;
      lambda = std::min(lambda * 10.0, 1e12);
    }
    if (!accepted || converged) break;
  }

  RationalFit fit;
  fit.linearized_ss = initial_ss;
  fit.constrained_init = constrained_init;
  fit.iterations = iterations;
  fit.refined = ss <= initial_ss && current != initial;
  fit.model = RationalSurrogate::from_packed(fit.refined ? current : initial);
  check_denominator(fit.model, options.check_box, options.check_resolution_b,
                    options.check_resolution_h);

  std::vector<double> predicted;
  predicted.reserve(data.size());
  for (const auto& s : data.samples()) predicted.push_back(fit.model.predict(to_point(s.config)));
  fit.diagnostics = diagnostics_from(m, predicted);
  fit.final_ss = sum_squares(fit.diagnostics.residuals);
  return fit;
}

// ---- leave-one-out -------------------------------------------------------------

FitDiagnostics loo_cross_validate(const SampleSet& data, const Fitter& fitter) {
  const std::size_t needed = fitter.minimum_configs() + 1;
  if (data.size() < needed) {
    throw Error(ErrorKind::underdetermined,
                "leave-one-out needs at least " + std::to_string(needed) + " samples, got " +
                    std::to_string(data.size()));
  }

  auto fit_and_predictor = [&](const SampleSet& subset) {
    if (fitter.kind == Fitter::Kind::quadratic) {
      auto fit = fit_quadratic(subset, fitter.target);
      return std::pair{fit.diagnostics, std::function<double(ContinuousPoint)>(
                                            [model = fit.model](ContinuousPoint p) {
                                              return model.predict(p);
                                            })};
    }
    auto fit = fit_rational(subset, fitter.rational_options);
    return std::pair{fit.diagnostics,
                     std::function<double(ContinuousPoint)>(
                         [model = fit.model](ContinuousPoint p) { return model.predict(p); })};
  };

  FitDiagnostics out = fit_and_predictor(data).first;
  const auto y = targets_of(data, fitter.target);

  out.loo_residuals.resize(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::vector<Sample> rest;
    rest.reserve(data.size() - 1);
    for (std::size_t j = 0; j < data.size(); ++j) {
      if (j != i) rest.push_back(data.samples()[j]);
    }
    try {
      const auto predictor = fit_and_predictor(SampleSet(std::move(rest))).second;
      out.loo_residuals[i] = y[i] - predictor(to_point(data.samples()[i].config));
    } catch (const Error& e) {
      throw Error(e.kind(), "held-out fit " + std::to_string(i) + ": " + e.what());
    }
  }
  const double press = sum_squares(out.loo_residuals);
  out.loo_press = press;
  out.loo_q_squared = zero_variance_ratio(press, total_sum_squares(y));
  return out;
}

}  // namespace surrotune
