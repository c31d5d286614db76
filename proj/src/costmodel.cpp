#include "surrotune/costmodel.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "surrotune/error.hpp"

namespace surrotune {

namespace {

// splitmix64 finalizer; used to derive independent per-draw generator seeds.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double gaussian(std::uint64_t seed, Config c, std::uint64_t draw_index, std::uint64_t metric) {
  std::uint64_t key = mix64(seed);
  key = mix64(key ^ static_cast<std::uint64_t>(c.b));
  key = mix64(key ^ static_cast<std::uint64_t>(c.h));
  key = mix64(key ^ draw_index);
  key = mix64(key ^ metric);
  std::mt19937_64 gen(key);
  std::normal_distribution<double> normal(0.0, 1.0);
  return normal(gen);
}

constexpr int kStateSize = 16;      // selective-scan state dimension
constexpr int kScanDirections = 4;  // 2D cross-scan

}  // namespace

CostModelParams CostModelParams::defaults() {
  CostModelParams p;
  p.latency = {28.7, 2.09, 3.8, -0.0039, -0.0437, 0.0005};
  p.power = {5.0, 0.01, 0.05, -0.00001, -0.00002, 0.00002};
  // m = 52.4 * b / (b + 3.7) + 0.8 * h / (h + 4), written in the rational form.
  p.miou.denominator = {14.8, 4.0, 3.7};
  p.miou.numerator = {0.0, 209.6, 2.96, 53.2};
  p.sigma = NoiseSigma{};
  p.seed = 7;
  return p;
}

SurrogateSet CostModelParams::models() const {
  SurrogateSet s;
  s.latency = {latency, Target::latency_ms};
  s.power = {power, Target::power_w};
  s.miou = miou;
  return s;
}

void CostModelParams::validate(const Box& box) const {
  box.validate();
  if (!(sigma.latency_ms >= 0.0) || !(sigma.power_w >= 0.0) || !(sigma.miou >= 0.0)) {
    throw Error(ErrorKind::domain, "cost model noise sigma must be >= 0");
  }
  const auto m = models();
  const int nb = std::max(2, static_cast<int>(std::ceil(box.b_hi - box.b_lo)) + 1);
  const int nh = std::max(2, static_cast<int>(std::ceil(box.h_hi - box.h_lo)) + 1);
  check_denominator(m.miou, box, nb, nh);
  for (int i = 0; i < nb; ++i) {
    const double b = box.b_lo + (box.b_hi - box.b_lo) * i / (nb - 1);
    for (int j = 0; j < nh; ++j) {
      const double h = box.h_lo + (box.h_hi - box.h_lo) * j / (nh - 1);
      if (!(m.latency.predict({b, h}) > 0.0) || !(m.power.predict({b, h}) > 0.0)) {
        throw Error(ErrorKind::domain, "cost model latency/power must be positive over the box");
      }
    }
  }
}

Sample model_sample(Config c, const CostModelParams& params) {
  const auto m = params.models();
  const auto p = to_point(c);
  return {c, m.miou.predict(p), m.latency.predict(p), m.power.predict(p)};
}

Sample synth_sample(Config c, const CostModelParams& params, std::uint64_t draw_index) {
  Sample s = model_sample(c, params);
  if (params.sigma.latency_ms > 0.0) {
    s.latency_ms += params.sigma.latency_ms * gaussian(params.seed, c, draw_index, 0);
  }
  if (params.sigma.power_w > 0.0) {
    s.power_w += params.sigma.power_w * gaussian(params.seed, c, draw_index, 1);
  }
  if (params.sigma.miou > 0.0) {
    s.miou += params.sigma.miou * gaussian(params.seed, c, draw_index, 2);
  }
  s.latency_ms = std::max(s.latency_ms, 1e-3);
  s.power_w = std::max(s.power_w, 1e-3);
  s.miou = std::clamp(s.miou, 0.0, 100.0);
  return s;
}

std::vector<Sample> generate_dataset(std::span<const Config> grid, const CostModelParams& params,
                                     int repeats) {
  if (grid.empty()) throw Error(ErrorKind::domain, "generate_dataset: empty grid");
  if (repeats < 1) throw Error(ErrorKind::domain, "generate_dataset: repeats must be >= 1");
  std::vector<Sample> out;
  out.reserve(grid.size() * static_cast<std::size_t>(repeats));
  for (const auto& c : grid) {
    for (int r = 0; r < repeats; ++r) {
      out.push_back(synth_sample(c, params, static_cast<std::uint64_t>(r)));
    }
  }
  return out;
}

std::vector<Config> default_sampling_grid() {
  std::vector<Config> grid;
  for (int b : {16, 32, 48, 64}) {
    for (int h : {4, 8, 16, 32}) grid.push_back({b, h});
  }
  return grid;
}

// Conv weights only; normalization affine terms and biases are ignored.
//   encoder: residual backbone, 7x7 stem then four stages of two basic blocks
//            at widths b, 2b, 4b, 8b (1x1 projection when the width changes).
//   bridge:  per stage, 1x1 fusion conv, 3/5/7 depthwise multi-scale convs and
//            a reduction-4 channel attention pair.
//   decoder: per stage j, outer width w_j = b * 2^j and bottleneck h_j = h * 2^j:
//            in-projection w_j -> 2 h_j, out-projection h_j -> w_j, 3x3
//            depthwise conv on h_j, and the selective-scan parameters
//            (x/dt projections, A, D) over four scan directions; plus 1x1
//            upsampling convs between adjacent stages.
//   head:    3x3 conv b -> b and 1x1 classifier b -> classes (with bias).
ModuleParamBreakdown param_count(Config c, int num_classes) {
  make_config(c.b, c.h);
  if (num_classes < 1) throw Error(ErrorKind::domain, "param_count: num_classes must be >= 1");

  const std::int64_t b = c.b;
  const std::int64_t h = c.h;
  ModuleParamBreakdown out;

  std::int64_t width[4];
  for (int i = 0; i < 4; ++i) width[i] = b << i;

  out.encoder = 3 * 49 * b;
  out.encoder += 2 * 2 * 9 * b * b;
  for (int i = 1; i < 4; ++i) {
    const std::int64_t in = width[i - 1], w = width[i];
    out.encoder += 9 * in * w + 9 * w * w + in * w;  // first block with projection
    out.encoder += 2 * 9 * w * w;                     // second block
  }

  for (int i = 0; i < 4; ++i) {
    const std::int64_t w = width[i];
    out.bridge += w * w + (9 + 25 + 49) * w + 2 * w * (w / 4);
  }

  for (int j = 0; j < 4; ++j) {
    const std::int64_t w = width[j];
    const std::int64_t hj = h << j;
    const std::int64_t dt_rank = (hj + 15) / 16;
    out.decoder += 2 * w * hj + hj * w + 9 * hj;
    out.decoder += kScanDirections * (hj * (dt_rank + 2 * kStateSize)  // x projection
                                      + dt_rank * hj + hj               // dt projection
                                      + hj * kStateSize                 // A
                                      + hj);                            // D
    if (j < 3) out.decoder += width[j + 1] * w;
  }

  out.head = 9 * b * b + b * num_classes + num_classes;
  return out;
}

}  // namespace surrotune
