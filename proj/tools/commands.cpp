#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "surrotune/costmodel.hpp"
#include "surrotune/designspace.hpp"
#include "surrotune/error.hpp"
#include "surrotune/io.hpp"
#include "surrotune/optimizer.hpp"
#include "surrotune/surrogate.hpp"

namespace surrotune::cli {

namespace {

std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    try {
      out.push_back(parse_double(std::string_view(text).substr(start, comma - start)));
    } catch (const Error&) {
      throw Error(ErrorKind::usage, std::string(flag) + ": bad value list '" + text + "'");
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<double> parse_fixed(const std::string& text, const char* flag, std::size_t n) {
  auto v = parse_list(text, flag);
  if (v.size() != n) {
    throw Error(ErrorKind::usage, std::string(flag) + " expects " + std::to_string(n) +
                                      " comma-separated values");
  }
  return v;
}

int as_int(double v, const char* flag) {
  if (v != static_cast<int>(v)) {
    throw Error(ErrorKind::usage, std::string(flag) + " expects integers");
  }
  return static_cast<int>(v);
}

struct Flags {
  std::string weights = "1,1,1";
  std::string lattice = "8,16,64,4,4,32";
  std::string box = "16,64,4,32";
  std::string bounds = "sampled";
  std::string resolution = "49,29";
  std::string sigma;
  std::string costmodel;
  std::string dataset;
  std::string out;
  std::uint64_t seed = CostModelParams::defaults().seed;
  bool seed_given = false;
  int repeats = 1;
};

RunConfig make_run_config(const Flags& f) {
  RunConfig rc;
  const auto w = parse_fixed(f.weights, "--weights", 3);
  rc.weights = {w[0], w[1], w[2]};
  const auto l = parse_fixed(f.lattice, "--lattice", 6);
  rc.lattice = {as_int(l[0], "--lattice"), as_int(l[1], "--lattice"), as_int(l[2], "--lattice"),
                as_int(l[3], "--lattice"), as_int(l[4], "--lattice"), as_int(l[5], "--lattice")};
  const auto b = parse_fixed(f.box, "--box", 4);
  rc.box = {b[0], b[1], b[2], b[3]};
  const auto r = parse_fixed(f.resolution, "--resolution", 2);
  rc.resolution_b = as_int(r[0], "--resolution");
  rc.resolution_h = as_int(r[1], "--resolution");
  if (f.bounds == "sampled") {
    rc.bounds_policy = BoundsPolicy::sampled_configs;
  } else {
    const auto v = parse_fixed(f.bounds, "--bounds", 6);
    rc.bounds_policy = BoundsPolicy::explicit_values;
    rc.explicit_bounds = {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  if (!f.sigma.empty()) {
    const auto s = parse_list(f.sigma, "--sigma");
    if (s.size() == 1) {
      rc.sigma = NoiseSigma{s[0], s[0], s[0]};
    } else if (s.size() == 3) {
      rc.sigma = NoiseSigma{s[0], s[1], s[2]};
    } else {
      throw Error(ErrorKind::usage, "--sigma expects 1 or 3 values (latency,power,miou)");
    }
  }
  rc.seed = f.seed;
  rc.costmodel_path = f.costmodel;
  rc.dataset_label = f.dataset;
  rc.out_path = f.out;
  rc.validate();
  return rc;
}

std::string slurp(const std::string& path, std::istream& in) {
  if (path == "-") {
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
  }
  return read_all(path);
}

bool looks_like_report(std::string_view text) {
  const auto pos = text.find_first_not_of(" \t\r\n");
  return pos != std::string_view::npos && text[pos] == '{';
}

struct FittedSet {
  SampleSet data;
  SurrogateSet models;
  FitDiagnostics latency, power, miou;
};

RationalFitOptions rational_options(const RunConfig& rc) {
  RationalFitOptions o;
  o.check_box = rc.box;
  return o;
}

FittedSet fit_all(const std::string& text, const std::string& source, const RunConfig& rc) {
  std::istringstream is(text);
  const auto raw = parse_samples(is, source);
  FittedSet f;
  f.data = aggregate_repeats(raw);
  auto lat = fit_quadratic(f.data, Target::latency_ms);
  auto pw = fit_quadratic(f.data, Target::power_w);
  auto mi = fit_rational(f.data, rational_options(rc));
  f.models = {lat.model, pw.model, mi.model};
  f.latency = std::move(lat.diagnostics);
  f.power = std::move(pw.diagnostics);
  f.miou = std::move(mi.diagnostics);
  return f;
}

TuningReport report_from_fit(const FittedSet& f, const std::string& text, const RunConfig& rc) {
  TuningReport r;
  r.models = f.models;
  r.latency_fit = f.latency;
  r.power_fit = f.power;
  r.miou_fit = f.miou;
  r.sampled_configs = f.data.configs();
  r.provenance.input_digest = fnv1a64_hex(text);
  r.provenance.source = "samples";
  r.provenance.dataset = rc.dataset_label;
  return r;
}

void write_report(const TuningReport& r, const std::string& path, std::ostream& out) {
  if (path.empty()) return;
  if (path == "-") {
    out << report_to_string(r);
  } else {
    emit_report(r, path);
  }
}

void print_fit_table(std::ostream& out, const TuningReport& r, std::size_t n) {
  out << "surrogate    n   r_squared  rmse\n";
  auto row = [&](const char* name, const FitDiagnostics& d) {
    out << std::left << std::setw(12) << name << std::right << std::setw(2) << n << "   "
        << std::fixed << std::setprecision(3) << d.r_squared << "      "
        << std::setprecision(6) << d.rmse << '\n';
  };
  row("latency_ms", r.latency_fit);
  row("power_w", r.power_fit);
  row("miou", r.miou_fit);
  out.unsetf(std::ios::floatfield);
}

void print_metrics(std::ostream& out, const char* label, const PredictedMetrics& m) {
  out << label << ": miou=" << format_double(m.miou)
      << " latency_ms=" << format_double(m.latency_ms) << " power_w=" << format_double(m.power_w)
      << " energy_mj=" << format_double(m.energy_mj) << " fps=" << format_double(m.fps)
      << " fps_per_watt=" << format_double(m.fps_per_watt) << '\n';
}

// ---- subcommands -----------------------------------------------------------------

int cmd_synth(const Flags& f, std::ostream& out) {
  const auto rc = make_run_config(f);
  CostModelParams params =
      rc.costmodel_path.empty() ? CostModelParams::defaults() : load_costmodel(rc.costmodel_path);
  if (f.seed_given) params.seed = rc.seed;
  if (rc.sigma) params.sigma = *rc.sigma;
  params.validate(rc.box);
  const auto grid = default_sampling_grid();
  const auto samples = generate_dataset(grid, params, f.repeats);
  if (rc.out_path.empty() || rc.out_path == "-") {
    write_samples(out, samples);
  } else {
    emit_samples(samples, rc.out_path);
  }
  return 0;
}

int cmd_fit(const Flags& f, const std::string& input, std::istream& in, std::ostream& out) {
  const auto rc = make_run_config(f);
  const auto text = slurp(input, in);
  const auto fitted = fit_all(text, input, rc);
  const auto report = report_from_fit(fitted, text, rc);
  print_fit_table(out, report, fitted.data.size());
  write_report(report, rc.out_path, out);
  return 0;
}

int cmd_optimize(const Flags& f, const std::string& input, std::istream& in, std::ostream& out) {
  const auto rc = make_run_config(f);
  const auto text = slurp(input, in);

  TuningReport report;
  if (looks_like_report(text)) {
    const auto prior = report_from_string(text);
    report.models = prior.models;
    report.latency_fit = prior.latency_fit;
    report.power_fit = prior.power_fit;
    report.miou_fit = prior.miou_fit;
    report.sampled_configs = prior.sampled_configs;
    report.provenance = prior.provenance;
    report.provenance.input_digest = fnv1a64_hex(text);
    report.provenance.source = "report";
    if (!rc.dataset_label.empty()) report.provenance.dataset = rc.dataset_label;
  } else {
    report = report_from_fit(fit_all(text, input, rc), text, rc);
  }

  ObjectiveSpec spec;
  spec.weights = rc.weights;
  spec.box = rc.box;
  spec.bounds = rc.bounds_policy == BoundsPolicy::sampled_configs
                    ? compute_bounds(report.models, report.sampled_configs)
                    : rc.explicit_bounds;
  MinimizeSettings settings;
  settings.lattice = rc.lattice;
  const auto result = minimize(report.models, spec, settings);

  report.objective = ObjectiveSettings{
      spec.weights, spec.bounds, spec.box, rc.lattice,
      rc.bounds_policy == BoundsPolicy::sampled_configs ? "sampled_configs" : "explicit_values"};
  report.optimization = result;

  out << "continuous optimum: b=" << format_double(result.continuous_opt.b)
      << " h=" << format_double(result.continuous_opt.h)
      << " objective=" << format_double(result.objective_value) << '\n';
  out << "snapped config: b=" << result.snapped.b << " h=" << result.snapped.h
      << " objective=" << format_double(result.snapped_objective) << '\n';
  print_metrics(out, "predicted (continuous)", result.predicted_continuous);
  print_metrics(out, "predicted (snapped)", result.predicted_snapped);
  write_report(report, rc.out_path, out);
  return 0;
}

int cmd_predict(const std::string& input, double b, double h, std::istream& in,
                std::ostream& out) {
  const auto report = report_from_string(slurp(input, in));
  const auto m = predict_metrics(report.models, {b, h});
  out << "b=" << format_double(b) << " h=" << format_double(h) << '\n';
  out << "miou=" << format_double(m.miou) << '\n';
  out << "latency_ms=" << format_double(m.latency_ms) << '\n';
  out << "power_w=" << format_double(m.power_w) << '\n';
  out << "energy_mj=" << format_double(m.energy_mj) << '\n';
  out << "fps=" << format_double(m.fps) << '\n';
  out << "fps_per_watt=" << format_double(m.fps_per_watt) << '\n';
  return 0;
}

int cmd_contour(const Flags& f, const std::string& input, std::istream& in, std::ostream& out) {
  const auto rc = make_run_config(f);
  if (rc.out_path.empty() || rc.out_path == "-") {
    throw Error(ErrorKind::usage, "contour requires --out PREFIX");
  }
  const auto report = report_from_string(slurp(input, in));
  for (const auto& p : emit_contours(report.models, rc.box, rc.resolution_b, rc.resolution_h,
                                     rc.out_path)) {
    out << "wrote " << p.string() << '\n';
  }
  return 0;
}

int cmd_validate(const Flags& f, const std::string& input, std::istream& in, std::ostream& out) {
  const auto rc = make_run_config(f);
  const auto text = slurp(input, in);
  std::istringstream is(text);
  const auto data = aggregate_repeats(parse_samples(is, input));

  out << "surrogate    n   r_squared  loo_q_squared  loo_press\n";
  auto row = [&](const char* name, const FitDiagnostics& d) {
    out << std::left << std::setw(12) << name << std::right << std::setw(2) << data.size()
        << "   " << std::fixed << std::setprecision(3) << d.r_squared << "      "
        << d.loo_q_squared.value_or(0.0) << "          " << std::setprecision(6)
        << d.loo_press.value_or(0.0) << '\n';
    out.unsetf(std::ios::floatfield);
  };
  row("latency_ms", loo_cross_validate(data, Fitter::quadratic(Target::latency_ms)));
  row("power_w", loo_cross_validate(data, Fitter::quadratic(Target::power_w)));
  row("miou", loo_cross_validate(data, Fitter::rational(rational_options(rc))));
  return 0;
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

}  // namespace

int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Surrogate-based width tuning for edge segmentation models", "surrotune"};
  app.require_subcommand(1, 1);

  Flags f;
  std::string input = "-";
  double at_b = 0.0, at_h = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--weights", f.weights, "wL,wP,wm")->capture_default_str();
    sub->add_option("--lattice", f.lattice, "bstep,blo,bhi,hstep,hlo,hhi")->capture_default_str();
    sub->add_option("--box", f.box, "blo,bhi,hlo,hhi")->capture_default_str();
    sub->add_option("--dataset", f.dataset, "Dataset label stored in the report");
    sub->add_option("--out", f.out, "Output path ('-' for stdout)");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic profiling dataset");
  add_common(synth);
  synth->add_option("--seed", f.seed, "Noise seed")->each([&](const std::string&) {
    f.seed_given = true;
  });
  synth->add_option("--sigma", f.sigma, "Noise sigma: x or latency,power,miou");
  synth->add_option("--repeats", f.repeats, "Samples per configuration")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  synth->add_option("--costmodel", f.costmodel, "Cost-model parameter file (JSON)");

  auto* fit = app.add_subcommand("fit", "Fit the latency, power and mIoU surrogates");
  add_common(fit);
  fit->add_option("samples", input, "Samples file ('-' for stdin)");

  auto* optimize = app.add_subcommand("optimize", "Fit (or load) surrogates and optimize");
  add_common(optimize);
  optimize->add_option("input", input, "Samples file or report ('-' for stdin)");
  optimize->add_option("--bounds", f.bounds,
                       "'sampled' or Lmin,Lmax,Pmin,Pmax,mmin,mmax")
      ->capture_default_str();

  auto* predict = app.add_subcommand("predict", "Evaluate a report's surrogates at (b, h)");
  predict->add_option("report", input, "Report file ('-' for stdin)")->required();
  predict->add_option("B", at_b, "Encoder base width b")->required();
  predict->add_option("H", at_h, "Decoder bottleneck width h")->required();

  auto* contour = app.add_subcommand("contour", "Emit surrogate contour grids");
  add_common(contour);
  contour->add_option("report", input, "Report file ('-' for stdin)")->required();
  contour->add_option("--resolution", f.resolution, "NB,NH")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Leave-one-out diagnostics");
  add_common(validate);
  validate->add_option("samples", input, "Samples file ('-' for stdin)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << one_line(e.what()) << '\n';
    return 2;
  }

  try {
    if (*synth) return cmd_synth(f, out);
    if (*fit) return cmd_fit(f, input, in, out);
    if (*optimize) return cmd_optimize(f, input, in, out);
    if (*predict) return cmd_predict(input, at_b, at_h, in, out);
    if (*contour) return cmd_contour(f, input, in, out);
    if (*validate) return cmd_validate(f, input, in, out);
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << '\n';
    return e.kind() == ErrorKind::usage ? 2 : 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << one_line(e.what()) << '\n';
    return 1;
  }
  return 2;
}

}  // namespace surrotune::cli
