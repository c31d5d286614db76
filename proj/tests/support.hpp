#pragma once

// Shared helpers for the unit and acceptance tests: grids, noiseless datasets
// built straight from model formulas, random in-family models, and a central
// finite-difference oracle.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "surrotune/costmodel.hpp"
#include "surrotune/designspace.hpp"
#include "surrotune/optimizer.hpp"
#include "surrotune/surrogate.hpp"

namespace testing {

using namespace surrotune;

inline std::vector<Config> grid16() {
  std::vector<Config> g;
  for (int b : {16, 32, 48, 64}) {
    for (int h : {4, 8, 16, 32}) g.push_back({b, h});
  }
  return g;
}

inline double quad_eval(const std::array<double, 6>& c, double b, double h) {
  return c[0] + c[1] * b + c[2] * h + c[3] * b * b + c[4] * b * h + c[5] * h * h;
}

// a0..a6 as in (a3 + a4 b + a5 h + a6 bh) / (a0 + a1 b + a2 h + bh)
inline double rational_eval(const std::array<double, 7>& a, double b, double h) {
  return (a[3] + a[4] * b + a[5] * h + a[6] * b * h) / (a[0] + a[1] * b + a[2] * h + b * h);
}

// Noiseless samples; metrics are written without range validation.
inline SampleSet dataset(const std::vector<Config>& grid, const std::array<double, 6>& lat,
                         const std::array<double, 6>& pow, const std::array<double, 7>& miou) {
  std::vector<Sample> out;
  for (Config c : grid) {
    out.push_back({c, rational_eval(miou, c.b, c.h), quad_eval(lat, c.b, c.h),
                   quad_eval(pow, c.b, c.h)});
  }
  return SampleSet(std::move(out));
}

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Latency-like quadratic, positive over the default box.
inline std::array<double, 6> random_quadratic(std::mt19937_64& rng) {
  return {uniform(rng, 20, 60),         uniform(rng, 0.5, 3.0),    uniform(rng, 0.5, 4.0),
          uniform(rng, -0.006, 0.006),  uniform(rng, -0.03, 0.01), uniform(rng, -0.02, 0.02)};
}

// Rational with denominator >= 29 on [16,64]x[4,32] and values near a6.
inline std::array<double, 7> random_rational(std::mt19937_64& rng) {
  const double a0 = uniform(rng, 5, 200), a1 = uniform(rng, -2, 5), a2 = uniform(rng, -2, 5);
  const double level = uniform(rng, 30, 60);
  return {a0,
          a1,
          a2,
          level * a0 + uniform(rng, -300, 300),
          level * a1 + uniform(rng, -20, 20),
          level * a2 + uniform(rng, -20, 20),
          level};
}

inline SurrogateSet to_models(const std::array<double, 6>& lat, const std::array<double, 6>& pow,
                              const std::array<double, 7>& miou) {
  SurrogateSet m;
  m.latency = {lat, Target::latency_ms};
  m.power = {pow, Target::power_w};
  m.miou = RationalSurrogate::from_packed(miou);
  return m;
}

inline SurrogateSet random_models(std::mt19937_64& rng) {
  auto lat = random_quadratic(rng);
  auto pow = random_quadratic(rng);
  for (double& c : pow) c /= 20.0;
  return to_models(lat, pow, random_rational(rng));
}

inline Gradient central_difference(const std::function<double(ContinuousPoint)>& f,
                                   ContinuousPoint p, double step = 1e-4) {
  return {(f({p.b + step, p.h}) - f({p.b - step, p.h})) / (2 * step),
          (f({p.b, p.h + step}) - f({p.b, p.h - step})) / (2 * step)};
}

// |g - fd| / max(|g|, |fd|) on the gradient vector.
inline double gradient_rel_error(Gradient g, Gradient fd) {
  const double diff = std::hypot(g.db - fd.db, g.dh - fd.dh);
  const double scale = std::max(std::hypot(g.db, g.dh), std::hypot(fd.db, fd.dh));
  return scale == 0.0 ? diff : diff / scale;
}

// Points kept one step away from the box edges so central differences stay inside.
inline std::vector<ContinuousPoint> random_points(std::mt19937_64& rng, int n,
                                                  const Box& box = {}) {
  std::vector<ContinuousPoint> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({uniform(rng, box.b_lo + 1e-3, box.b_hi - 1e-3),
                   uniform(rng, box.h_lo + 1e-3, box.h_hi - 1e-3)});
  }
  return out;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("surrotune_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
