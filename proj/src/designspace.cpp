#include "surrotune/designspace.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "surrotune/error.hpp"

namespace surrotune {

namespace {

[[noreturn]] void domain_error(const std::string& what) {
  throw Error(ErrorKind::domain, what);
}

std::string describe(ContinuousPoint p) {
  std::ostringstream os;
  os << "(" << p.b << ", " << p.h << ")";
  return os.str();
}

// Nearest multiples of `step` from `lo` to x, clipped to [lo, hi]. Returns
// one or two candidates (two when x sits exactly halfway).
std::vector<int> axis_candidates(double x, int lo, int hi, int step) {
  const double k = (x - lo) / step;
  const int below = std::clamp(static_cast<int>(std::floor(k)), 0, (hi - lo) / step);
  const int above = std::min(below + 1, (hi - lo) / step);
  std::vector<int> out{lo + below * step};
  if (above != below) out.push_back(lo + above * step);
  return out;
}

}  // namespace

Config make_config(int b, int h) {
  if (b < 1 || h < 1) {
    domain_error("config requires b >= 1 and h >= 1, got (" + std::to_string(b) + ", " +
                 std::to_string(h) + ")");
  }
  return {b, h};
}

void Box::validate() const {
  for (double v : {b_lo, b_hi, h_lo, h_hi}) {
    if (!std::isfinite(v)) domain_error("box bounds must be finite");
  }
  if (!(b_lo < b_hi) || !(h_lo < h_hi)) domain_error("box must be non-degenerate (lo < hi)");
}

bool Box::contains(ContinuousPoint p, double slack) const {
  return p.b >= b_lo - slack && p.b <= b_hi + slack && p.h >= h_lo - slack &&
         p.h <= h_hi + slack;
}

ContinuousPoint Box::clamp(ContinuousPoint p) const {
  return {std::clamp(p.b, b_lo, b_hi), std::clamp(p.h, h_lo, h_hi)};
}

void Lattice::validate() const {
  auto check_axis = [](const char* name, int step, int lo, int hi) {
    if (step < 1) domain_error(std::string(name) + " lattice step must be >= 1");
    if (lo < 1) domain_error(std::string(name) + " lattice lower bound must be >= 1");
    if (lo > hi) domain_error(std::string(name) + " lattice requires lo <= hi");
    if ((hi - lo) % step != 0) {
      domain_error(std::string(name) + " lattice step must divide (hi - lo)");
    }
  };
  check_axis("b", b_step, b_lo, b_hi);
  check_axis("h", h_step, h_lo, h_hi);
}

bool Lattice::contains(Config c) const {
  return c.b >= b_lo && c.b <= b_hi && (c.b - b_lo) % b_step == 0 && c.h >= h_lo &&
         c.h <= h_hi && (c.h - h_lo) % h_step == 0;
}

Box Lattice::box() const {
  return {static_cast<double>(b_lo), static_cast<double>(b_hi), static_cast<double>(h_lo),
          static_cast<double>(h_hi)};
}

std::vector<Config> Lattice::points() const {
  std::vector<Config> out;
  for (int b = b_lo; b <= b_hi; b += b_step) {
    for (int h = h_lo; h <= h_hi; h += h_step) out.push_back({b, h});
  }
  return out;
}

Sample make_sample(Config c, double miou, double latency_ms, double power_w) {
  make_config(c.b, c.h);
  if (!std::isfinite(latency_ms) || latency_ms <= 0.0) domain_error("latency_ms must be > 0");
  if (!std::isfinite(power_w) || power_w <= 0.0) domain_error("power_w must be > 0");
  if (!std::isfinite(miou) || miou < 0.0 || miou > 100.0) {
    domain_error("miou must lie in [0, 100]");
  }
  return {c, miou, latency_ms, power_w};
}

SampleSet::SampleSet(std::vector<Sample> samples) : samples_(std::move(samples)) {
  distinct_ = distinct_count() == samples_.size();
}

std::vector<Config> SampleSet::configs() const {
  std::vector<Config> out;
  out.reserve(samples_.size());
  for (const auto& s : samples_) out.push_back(s.config);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::size_t SampleSet::distinct_count() const { return configs().size(); }

DerivedMetrics derive_metrics(double latency_ms, double power_w) {
  if (!std::isfinite(latency_ms) || latency_ms <= 0.0) {
    domain_error("derive_metrics: latency_ms must be finite and > 0");
  }
  if (!std::isfinite(power_w) || power_w <= 0.0) {
    domain_error("derive_metrics: power_w must be finite and > 0");
  }
  DerivedMetrics m;
  m.energy_mj = latency_ms * power_w;  // ms * W = mJ
  m.fps = 1000.0 / latency_ms;
  m.fps_per_watt = m.fps / power_w;
  return m;
}

SampleSet aggregate_repeats(std::span<const Sample> raw) {
  if (raw.empty()) domain_error("aggregate_repeats: empty input");

  struct Accum {
    double miou = 0.0, latency = 0.0, power = 0.0;
    int count = 0;
  };
  std::map<Config, Accum> groups;
  for (const auto& s : raw) {
    auto& a = groups[s.config];
    a.miou += s.miou;
    a.latency += s.latency_ms;
    a.power += s.power_w;
    ++a.count;
  }

  std::vector<Sample> out;
  out.reserve(groups.size());
  for (const auto& [config, a] : groups) {
    const double n = a.count;
    out.push_back({config, a.miou / n, a.latency / n, a.power / n});
  }
  return SampleSet(std::move(out));
}

Config snap_to_lattice(ContinuousPoint p, const Lattice& lattice, const ConfigScorer& tiebreak) {
  lattice.validate();
  if (!std::isfinite(p.b) || !std::isfinite(p.h) || !lattice.box().contains(p)) {
    domain_error("snap_to_lattice: point " + describe(p) + " lies outside the lattice box");
  }

  // Step-scaled distance is separable, so the nearest point is a product of
  // per-axis nearest candidates.
  std::vector<Config> nearest;
  double best = 0.0;
  for (int b : axis_candidates(p.b, lattice.b_lo, lattice.b_hi, lattice.b_step)) {
    for (int h : axis_candidates(p.h, lattice.h_lo, lattice.h_hi, lattice.h_step)) {
      const double db = (p.b - b) / lattice.b_step;
      const double dh = (p.h - h) / lattice.h_step;
      const double d = db * db + dh * dh;
      if (nearest.empty() || d < best) {
        nearest.assign(1, {b, h});
        best = d;
      } else if (d == best) {
        nearest.push_back({b, h});
      }
    }
  }

  std::sort(nearest.begin(), nearest.end());
  if (nearest.size() == 1 || !tiebreak) return nearest.front();

  Config chosen = nearest.front();
  double chosen_score = tiebreak(chosen);
  for (std::size_t i = 1; i < nearest.size(); ++i) {
    const double score = tiebreak(nearest[i]);
    if (score < chosen_score) {
      chosen = nearest[i];
      chosen_score = score;
    }
  }
  return chosen;
}

}  // namespace surrotune
