#include "surrotune/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "surrotune/error.hpp"

namespace surrotune {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Scales {
  double latency = 0.0, power = 0.0, miou = 0.0;  // w / (max - min), zero when unweighted
};

Scales term_scales(const ObjectiveSpec& spec) {
  const auto& w = spec.weights;
  const auto& bd = spec.bounds;
  Scales s;
  if (w.latency != 0.0) s.latency = w.latency / (bd.latency_max - bd.latency_min);
  if (w.power != 0.0) s.power = w.power / (bd.power_max - bd.power_min);
  if (w.miou != 0.0) s.miou = w.miou / (bd.miou_max - bd.miou_min);
  return s;
}

// Objective without the box precondition; used for snapping candidates.
double evaluate(ContinuousPoint p, const SurrogateSet& models, const ObjectiveSpec& spec) {
  const Scales s = term_scales(spec);
  double v = 0.0;
  if (s.latency != 0.0) v += s.latency * (models.latency.predict(p) - spec.bounds.latency_min);
  if (s.power != 0.0) v += s.power * (models.power.predict(p) - spec.bounds.power_min);
  if (s.miou != 0.0) v -= s.miou * (models.miou.predict(p) - spec.bounds.miou_min);
  return v;
}

Gradient evaluate_gradient(ContinuousPoint p, const SurrogateSet& models,
                           const ObjectiveSpec& spec) {
  const Scales s = term_scales(spec);
  Gradient g;
  if (s.latency != 0.0) {
    const auto gl = models.latency.gradient(p);
    g.db += s.latency * gl.db;
    g.dh += s.latency * gl.dh;
  }
  if (s.power != 0.0) {
    const auto gp = models.power.gradient(p);
    g.db += s.power * gp.db;
    g.dh += s.power * gp.dh;
  }
  if (s.miou != 0.0) {
    const auto gm = models.miou.gradient(p);
    g.db -= s.miou * gm.db;
    g.dh -= s.miou * gm.dh;
  }
  return g;
}

void require_in_box(ContinuousPoint p, const Box& box) {
  if (!std::isfinite(p.b) || !std::isfinite(p.h) || !box.contains(p, 1e-9)) {
    std::ostringstream os;
    os << "objective: point (" << p.b << ", " << p.h << ") lies outside the box";
    throw Error(ErrorKind::domain, os.str());
  }
}

std::vector<double> axis_samples(double lo, double hi, double spacing) {
  std::vector<double> out;
  const auto steps = static_cast<long>(std::floor((hi - lo) / spacing + 1e-9));
  for (long k = 0; k <= steps; ++k) out.push_back(lo + static_cast<double>(k) * spacing);
  if (out.back() < hi) out.push_back(hi);
  return out;
}

// Lattice points restricted to the box (same steps, tightened bounds).
Lattice restrict_to_box(const Lattice& lattice, const Box& box) {
  auto tighten = [](int step, int lo, int hi, double box_lo, double box_hi, int& out_lo,
                    int& out_hi) {
    const double first = std::ceil((box_lo - lo) / step - 1e-9);
    const double last = std::floor((box_hi - lo) / step + 1e-9);
    out_lo = lo + static_cast<int>(std::max(first, 0.0)) * step;
    out_hi = lo + static_cast<int>(std::min(last, static_cast<double>((hi - lo) / step))) * step;
    return out_lo <= out_hi;
  };
  Lattice out = lattice;
  if (!tighten(lattice.b_step, lattice.b_lo, lattice.b_hi, box.b_lo, box.b_hi, out.b_lo,
               out.b_hi) ||
      !tighten(lattice.h_step, lattice.h_lo, lattice.h_hi, box.h_lo, box.h_hi, out.h_lo,
               out.h_hi)) {
    throw Error(ErrorKind::domain, "no lattice point lies inside the optimization box");
  }
  return out;
}

struct Descent {
  const SurrogateSet& models;
  const ObjectiveSpec& spec;
  const MinimizeSettings& settings;
  double width_b, width_h;

  ContinuousPoint to_point(double ub, double uh) const {
    return {spec.box.b_lo + ub * width_b, spec.box.h_lo + uh * width_h};
  }

  StartRecord run(ContinuousPoint seed) const {
    StartRecord rec;
    rec.seed = seed;
    double ub = (seed.b - spec.box.b_lo) / width_b;
    double uh = (seed.h - spec.box.h_lo) / width_h;
    double f = evaluate(to_point(ub, uh), models, spec);
    rec.seed_value = f;

    for (; rec.iterations < settings.max_iterations; ++rec.iterations) {
      const auto g_phys = evaluate_gradient(to_point(ub, uh), models, spec);
      const double gb = g_phys.db * width_b;
      const double gh = g_phys.dh * width_h;

      const double pb = std::clamp(ub - gb, 0.0, 1.0) - ub;
      const double ph = std::clamp(uh - gh, 0.0, 1.0) - uh;
      if (std::hypot(pb, ph) < settings.gradient_tolerance) {
        rec.converged = true;
        break;
      }

      double t = settings.initial_step;
      bool moved = false;
      while (t > 1e-20) {
        const double nb = std::clamp(ub - t * gb, 0.0, 1.0);
        const double nh = std::clamp(uh - t * gh, 0.0, 1.0);
        const double decrease = gb * (nb - ub) + gh * (nh - uh);
        const double fn = evaluate(to_point(nb, nh), models, spec);
        if (fn <= f + settings.armijo * decrease) {
          moved = nb != ub || nh != uh;
          ub = nb;
          uh = nh;
          f = fn;
          break;
        }
        t *= settings.shrink;
      }
      if (!moved) {
        // Line search can no longer make progress at double precision.
        rec.converged = true;
        break;
      }
    }
    rec.terminal = to_point(ub, uh);
    rec.terminal_value = f;
    return rec;
  }
};

}  // namespace

NormalizationBounds compute_bounds(const SurrogateSet& models, std::span<const Config> configs) {
  std::vector<Config> distinct(configs.begin(), configs.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < 2) {
    throw Error(ErrorKind::domain, "compute_bounds needs at least 2 distinct configs");
  }

  NormalizationBounds nb{kInf, -kInf, kInf, -kInf, kInf, -kInf};
  for (const auto& c : distinct) {
    const auto p = to_point(c);
    const double l = models.latency.predict(p);
    const double pw = models.power.predict(p);
    const double m = models.miou.predict(p);
    nb.latency_min = std::min(nb.latency_min, l);
    nb.latency_max = std::max(nb.latency_max, l);
    nb.power_min = std::min(nb.power_min, pw);
    nb.power_max = std::max(nb.power_max, pw);
    nb.miou_min = std::min(nb.miou_min, m);
    nb.miou_max = std::max(nb.miou_max, m);
  }
  return nb;
}

void ObjectiveSpec::validate() const {
  box.validate();
  const auto& w = weights;
  for (double v : {w.latency, w.power, w.miou}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorKind::domain, "objective weights must be finite and >= 0");
    }
  }
  if (w.latency == 0.0 && w.power == 0.0 && w.miou == 0.0) {
    throw Error(ErrorKind::domain, "at least one objective weight must be > 0");
  }
  if (w.latency != 0.0 && bounds.latency_degenerate()) {
    throw Error(ErrorKind::domain, "degenerate latency bounds (min >= max) with nonzero weight");
  }
  if (w.power != 0.0 && bounds.power_degenerate()) {
    throw Error(ErrorKind::domain, "degenerate power bounds (min >= max) with nonzero weight");
  }
  if (w.miou != 0.0 && bounds.miou_degenerate()) {
    throw Error(ErrorKind::domain, "degenerate miou bounds (min >= max) with nonzero weight");
  }
}

double objective(ContinuousPoint p, const SurrogateSet& models, const ObjectiveSpec& spec) {
  spec.validate();
  require_in_box(p, spec.box);
  return evaluate(p, models, spec);
}

Gradient objective_gradient(ContinuousPoint p, const SurrogateSet& models,
                            const ObjectiveSpec& spec) {
  spec.validate();
  require_in_box(p, spec.box);
  return evaluate_gradient(p, models, spec);
}

PredictedMetrics predict_metrics(const SurrogateSet& models, ContinuousPoint p) {
  PredictedMetrics out;
  out.miou = models.miou.predict(p);
  out.latency_ms = models.latency.predict(p);
  out.power_w = models.power.predict(p);
  if (out.latency_ms > 0.0 && out.power_w > 0.0) {
    const auto d = derive_metrics(out.latency_ms, out.power_w);
    out.energy_mj = d.energy_mj;
    out.fps = d.fps;
    out.fps_per_watt = d.fps_per_watt;
  } else {
    // Surrogates may extrapolate to non-physical values; energy stays
    // defined, rates do not.
    out.energy_mj = out.latency_ms * out.power_w;
    out.fps = std::numeric_limits<double>::quiet_NaN();
    out.fps_per_watt = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

OptimizationResult minimize(const SurrogateSet& models, const ObjectiveSpec& spec,
                            const MinimizeSettings& settings) {
  spec.validate();
  settings.lattice.validate();
  if (!(settings.coarse_spacing > 0.0) || settings.top_seeds < 1 || settings.max_iterations < 1) {
    throw Error(ErrorKind::domain, "invalid minimize settings");
  }
  const Box& box = spec.box;

  // Seed selection on the coarse evaluation lattice.
  struct Candidate {
    ContinuousPoint p;
    double value;
  };
  std::vector<Candidate> coarse;
  for (double b : axis_samples(box.b_lo, box.b_hi, settings.coarse_spacing)) {
    for (double h : axis_samples(box.h_lo, box.h_hi, settings.coarse_spacing)) {
      try {
        const double v = evaluate({b, h}, models, spec);
        if (std::isfinite(v)) coarse.push_back({{b, h}, v});
      } catch (const Error&) {
        // Pole cells are simply not seeds.
      }
    }
  }
  std::stable_sort(coarse.begin(), coarse.end(),
                   [](const Candidate& a, const Candidate& b) { return a.value < b.value; });

  std::vector<ContinuousPoint> seeds;
  for (std::size_t i = 0; i < coarse.size() && seeds.size() < static_cast<std::size_t>(settings.top_seeds); ++i) {
    seeds.push_back(coarse[i].p);
  }
  for (ContinuousPoint corner : {ContinuousPoint{box.b_lo, box.h_lo}, {box.b_lo, box.h_hi},
                                 {box.b_hi, box.h_lo}, {box.b_hi, box.h_hi}}) {
    if (std::find(seeds.begin(), seeds.end(), corner) == seeds.end()) seeds.push_back(corner);
  }

  const Descent descent{models, spec, settings, box.b_hi - box.b_lo, box.h_hi - box.h_lo};
  OptimizationResult result;
  int best = -1;
  for (const auto& seed : seeds) {
    StartRecord rec;
    try {
      rec = descent.run(seed);
    } catch (const Error& e) {
      rec = StartRecord{};
      rec.seed = seed;
      rec.terminal = seed;
      rec.seed_value = kInf;
      rec.terminal_value = kInf;
      rec.failure = std::string(to_string(e.kind())) + ": " + e.what();
    }
    result.trace.push_back(rec);
    const int idx = static_cast<int>(result.trace.size()) - 1;
    if (rec.failure.empty() && std::isfinite(rec.terminal_value) &&
        (best < 0 || rec.terminal_value < result.trace[static_cast<std::size_t>(best)].terminal_value)) {
      best = idx;
    }
  }
  if (best < 0) {
    std::ostringstream os;
    os << "all " << result.trace.size() << " starts failed";
    if (!result.trace.empty()) os << "; first: " << result.trace.front().failure;
    throw Error(ErrorKind::optimization, os.str());
  }

  const auto& winner = result.trace[static_cast<std::size_t>(best)];
  result.continuous_opt = winner.terminal;
  result.objective_value = winner.terminal_value;

  const Lattice usable = restrict_to_box(settings.lattice, box);
  const auto scorer = [&](Config c) {
    try {
      return evaluate(to_point(c), models, spec);
    } catch (const Error&) {
      return kInf;
    }
  };
  result.snapped = snap_to_lattice(usable.box().clamp(result.continuous_opt), usable, scorer);
  result.snapped_objective = evaluate(to_point(result.snapped), models, spec);
  result.predicted_continuous = predict_metrics(models, result.continuous_opt);
  result.predicted_snapped = predict_metrics(models, to_point(result.snapped));
  return result;
}

}  // namespace surrotune
