// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "commands.hpp"
#include "support.hpp"
#include "surrotune/costmodel.hpp"
#include "surrotune/io.hpp"
#include "surrotune/optimizer.hpp"
#include "surrotune/surrogate.hpp"

using namespace surrotune;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Verdict v;
  try {
    v = body();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s %d %s (%.2fs)%s%s\n", v.pass ? "PASS" : "FAIL", id, name, secs,
              v.detail.empty() ? "" : " : ", v.detail.c_str());
  std::fflush(stdout);
  if (!v.pass) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

struct CliRun {
  int status;
  std::string out;
  std::string err;
};

CliRun cli_run(const std::vector<std::string>& args, const std::string& input = {}) {
  std::istringstream in(input);
  std::ostringstream out, err;
  const int status = cli::run(args, in, out, err);
  return {status, out.str(), err.str()};
}

// 1. Derived metrics against the published deployment table (latency, power,
// energy, fps, fps/W) for both datasets and all three columns.
Verdict derived_metrics() {
  struct Row {
    double latency, power, energy, fps, fps_w;
  };
  const Row rows[] = {
      {178.63, 7.21, 1287.92, 5.60, 0.78}, {108.20, 5.90, 638.38, 9.24, 1.57},
      {109.72, 5.75, 630.67, 9.11, 1.58},  {178.27, 7.19, 1281.76, 5.60, 0.78},
      {110.22, 6.11, 673.73, 9.09, 1.49},  {119.69, 6.07, 726.63, 8.35, 1.37},
  };
  Verdict v;
  double worst_e = 0, worst_r = 0;
  for (const auto& r : rows) {
    const auto m = derive_metrics(r.latency, r.power);
    const double e = rel(m.energy_mj, r.energy);
    const double f = std::max(rel(m.fps, r.fps), rel(m.fps_per_watt, r.fps_w));
    worst_e = std::max(worst_e, e);
    worst_r = std::max(worst_r, f);
    v.require(e <= 0.005, fmt("energy at %.2f ms off by %.4f", r.latency, e));
    v.require(f <= 0.01, fmt("rates at %.2f ms off by %.4f", r.latency, f));
  }
  if (v.pass) v.detail = fmt("worst energy err %.5f, worst rate err %.5f", worst_e, worst_r);
  return v;
}

// 2. Parameter-count ratios against the published model sizes.
Verdict model_size() {
  const double base = double(param_count({64, 32}).total());
  const double r1 = double(param_count({32, 8}).total()) / base;
  const double r2 = double(param_count({40, 4}).total()) / base;
  const double t1 = 12.36 / 51.56, t2 = 18.86 / 51.56;
  Verdict v;
  v.require(rel(r1, t1) <= 0.10, fmt("(32,8) ratio %.4f vs %.4f", r1, t1));
  v.require(rel(r2, t2) <= 0.10, fmt("(40,4) ratio %.4f vs %.4f", r2, t2));
  if (v.pass) v.detail = fmt("(32,8) %.4f vs %.4f; (40,4) %.4f", r1, t1, r2) + fmt(" vs %.4f", t2);
  return v;
}

// 3. Noiseless in-family data is refit exactly.
Verdict exact_recovery() {
  Verdict v;
  double worst_q = 0, worst_r = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    std::mt19937_64 rng(seed);
    const auto lat = testing::random_quadratic(rng);
    auto pw = testing::random_quadratic(rng);
    for (double& c : pw) c /= 20.0;
    const auto mi = testing::random_rational(rng);
    const auto data = testing::dataset(testing::grid16(), lat, pw, mi);

    const auto fl = fit_quadratic(data, Target::latency_ms);
    const auto fp = fit_quadratic(data, Target::power_w);
    for (std::size_t i = 0; i < 6; ++i) {
      worst_q = std::max({worst_q, rel(fl.model.coeffs[i], lat[i]), rel(fp.model.coeffs[i], pw[i])});
    }
    const auto fr = fit_rational(data);
    worst_r = std::max(worst_r, fr.diagnostics.rmse);
  }
  v.require(worst_q <= 1e-9, fmt("quadratic coefficient rel err %.3g", worst_q));
  v.require(worst_r < 1e-6, fmt("rational rmse %.3g", worst_r));
  if (v.pass) v.detail = fmt("worst quad rel err %.3g, worst rational rmse %.3g", worst_q, worst_r);
  return v;
}

// 4. Fit quality on the calibrated cost model with default noise.
Verdict fit_quality() {
  const auto params = CostModelParams::defaults();
  const auto data = aggregate_repeats(generate_dataset(default_sampling_grid(), params, 1));
  const double rl = fit_quadratic(data, Target::latency_ms).diagnostics.r_squared;
  const double rp = fit_quadratic(data, Target::power_w).diagnostics.r_squared;
  const double rm = fit_rational(data).diagnostics.r_squared;
  Verdict v;
  v.require(rl >= 0.97 && rp >= 0.97 && rm >= 0.89, "");
  v.detail = fmt("seed 7: R2 latency %.4f, power %.4f, ", rl, rp) + fmt("miou %.4f", rm);
  return v;
}

// 5. Multi-start descent versus a dense 481x281 grid.
Verdict optimizer_oracle() {
  Verdict v;
  double worst_gap = -1e300;
  int unique_cases = 0;
  for (std::uint64_t seed = 100; seed < 120; ++seed) {
    std::mt19937_64 rng(seed);
    const auto models = testing::random_models(rng);
    ObjectiveSpec spec;
    spec.weights = {testing::uniform(rng, 0.2, 2), testing::uniform(rng, 0.2, 2),
                    testing::uniform(rng, 0.2, 2)};
    const auto grid = testing::grid16();
    spec.bounds = compute_bounds(models, grid);
    const auto r = minimize(models, spec);

    std::vector<double> vals(481 * 281);
    double best = std::numeric_limits<double>::infinity();
    int bi = 0, bj = 0;
    for (int i = 0; i <= 480; ++i) {
      for (int j = 0; j <= 280; ++j) {
        const double f = objective({16.0 + i / 10.0, 4.0 + j / 10.0}, models, spec);
        vals[std::size_t(i * 281 + j)] = f;
        if (f < best) best = f, bi = i, bj = j;
      }
    }
    worst_gap = std::max(worst_gap, r.objective_value - best);
    v.require(r.objective_value <= best + 1e-6,
              fmt("seed %.0f: objective %.9f > grid %.9f", double(seed), r.objective_value, best));

    double runner_up = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 480; ++i) {
      for (int j = 0; j <= 280; ++j) {
        if (std::abs(i - bi) <= 1 && std::abs(j - bj) <= 1) continue;
        runner_up = std::min(runner_up, vals[std::size_t(i * 281 + j)]);
      }
    }
    if (runner_up - best > 1e-4) {
      ++unique_cases;
      const double gb = 16.0 + bi / 10.0, gh = 4.0 + bj / 10.0;
      v.require(std::abs(r.continuous_opt.b - gb) <= 0.1 + 1e-9 &&
                    std::abs(r.continuous_opt.h - gh) <= 0.1 + 1e-9,
                fmt("seed %.0f: argmin (%.3f, %.3f) far from grid", double(seed),
                    r.continuous_opt.b, r.continuous_opt.h));
    }
  }
  if (v.pass) {
    v.detail = fmt("20 instances, max(opt - grid) = %.3g, %.0f with a unique grid argmin", worst_gap,
                   unique_cases);
  }
  return v;
}

// 6. Analytic gradients versus central differences.
Verdict gradients() {
  Verdict v;
  std::mt19937_64 rng(606);
  const auto models = testing::random_models(rng);
  ObjectiveSpec spec;
  const auto grid = testing::grid16();
  spec.bounds = compute_bounds(models, grid);
  const auto pts = testing::random_points(rng, 100);
  double wq = 0, wr = 0, wo = 0;
  for (auto p : pts) {
    wq = std::max(wq, testing::gradient_rel_error(
                          models.latency.gradient(p),
                          testing::central_difference([&](ContinuousPoint x) { return models.latency.predict(x); }, p)));
    wr = std::max(wr, testing::gradient_rel_error(
                          models.miou.gradient(p),
                          testing::central_difference([&](ContinuousPoint x) { return models.miou.predict(x); }, p)));
    wo = std::max(wo, testing::gradient_rel_error(
                          objective_gradient(p, models, spec),
                          testing::central_difference([&](ContinuousPoint x) { return objective(x, models, spec); }, p)));
  }
  v.require(wq <= 1e-6 && wr <= 1e-6 && wo <= 1e-6, "");
  v.detail = fmt("worst rel err: quadratic %.2g, rational %.2g, objective %.2g", wq, wr, wo);
  return v;
}

// 7. End-to-end: optimize on the noiseless calibrated model.
Verdict end_to_end() {
  Verdict v;
  testing::TempDir dir("accept7");
  const auto synth = cli_run({"synth", "--sigma", "0"});
  v.require(synth.status == 0, "synth failed: " + synth.err);
  const auto opt = cli_run(
      {"optimize", "-", "--weights", "1,1,1", "--out", (dir / "r.json").string()}, synth.out);
  v.require(opt.status == 0, "optimize failed: " + opt.err);
  if (!v.pass) return v;
  const auto rep = read_report(dir / "r.json");
  const auto& snapped = rep.optimization->predicted_snapped;
  auto params = CostModelParams::defaults();
  const auto base = model_sample({64, 32}, params);
  const double cut = 1.0 - snapped.latency_ms / base.latency_ms;
  const double drop = base.miou - snapped.miou;
  v.require(cut >= 0.30, fmt("latency reduction %.3f", cut));
  v.require(std::abs(drop) <= 6.0, fmt("mIoU change %.3f", drop));
  v.detail = fmt("snapped (%.0f,%.0f)", rep.optimization->snapped.b, rep.optimization->snapped.h) +
             fmt(": latency %.2f ms (-%.1f%%), ", snapped.latency_ms, 100 * cut) +
             fmt("mIoU %.2f vs %.2f", snapped.miou, base.miou);
  return v;
}

// 8. Determinism and round trips.
Verdict determinism() {
  Verdict v;
  testing::TempDir dir("accept8");
  const auto synth_a = cli_run({"synth", "--seed", "42", "--repeats", "2"});
  const auto synth_b = cli_run({"synth", "--seed", "42", "--repeats", "2"});
  v.require(synth_a.status == 0 && synth_a.out == synth_b.out, "synth output differs");
  for (const char* name : {"a.json", "b.json"}) {
    const auto r = cli_run({"optimize", "-", "--out", (dir / name).string()}, synth_a.out);
    v.require(r.status == 0, "optimize failed: " + r.err);
  }
  const auto a = read_all(dir / "a.json");
  v.require(a == read_all(dir / "b.json"), "reports differ");

  const auto report = report_from_string(a);
  v.require(report_to_string(report) == a, "report re-serialization differs");
  v.require(report_from_string(report_to_string(report)) == report, "report round trip differs");

  std::istringstream in(synth_a.out);
  const auto samples = parse_samples(in);
  emit_samples(samples, dir / "s.csv");
  v.require(parse_samples(dir / "s.csv") == samples, "sample round trip differs");
  v.require(read_all(dir / "s.csv") == synth_a.out, "sample bytes differ");
  if (v.pass) v.detail = "reports byte-identical, report and sample round trips exact";
  return v;
}

}  // namespace

int main() {
  report(1, "derived-metric consistency", derived_metrics);
  report(2, "model-size scaling", model_size);
  report(3, "exact surrogate recovery", exact_recovery);
  report(4, "fit-quality band", fit_quality);
  report(5, "optimizer oracle equivalence", optimizer_oracle);
  report(6, "gradient correctness", gradients);
  report(7, "end-to-end plausibility", end_to_end);
  report(8, "determinism and round trip", determinism);
  return failures == 0 ? 0 : 1;
}
