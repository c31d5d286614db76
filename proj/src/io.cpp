#include "surrotune/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "surrotune/error.hpp"

namespace surrotune {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

[[noreturn]] void format_error(const std::string& what) { throw Error(ErrorKind::format, what); }

int parse_int(std::string_view text) {
  int v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    format_error("not an integer: '" + std::string(text) + "'");
  }
  return v;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorKind::io, "failed writing '" + path.string() + "'");
}

// ---- json helpers ----------------------------------------------------------------

// NaN / inf have no JSON spelling; they travel as null.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double get_num(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.is_number()) format_error("expected a number, got " + j.dump());
  return j.get<double>();
}

template <std::size_t N>
json num_array(const std::array<double, N>& a) {
  json out = json::array();
  for (double v : a) out.push_back(num(v));
  return out;
}

template <std::size_t N>
std::array<double, N> get_array(const json& j) {
  if (!j.is_array() || j.size() != N) {
    format_error("expected an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = get_num(j[i]);
  return out;
}

json num_vector(const std::vector<double>& v) {
  json out = json::array();
  for (double x : v) out.push_back(num(x));
  return out;
}

std::vector<double> get_vector(const json& j) {
  if (!j.is_array()) format_error("expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(get_num(x));
  return out;
}

const json& at(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) format_error(std::string("missing key '") + key + "'");
  return j.at(key);
}

json to_json(ContinuousPoint p) { return {{"b", num(p.b)}, {"h", num(p.h)}}; }
ContinuousPoint point_from(const json& j) { return {get_num(at(j, "b")), get_num(at(j, "h"))}; }

json to_json(Config c) { return {{"b", c.b}, {"h", c.h}}; }
Config config_from(const json& j) { return {at(j, "b").get<int>(), at(j, "h").get<int>()}; }

json to_json(const FitDiagnostics& d) {
  json j = {{"r_squared", num(d.r_squared)},
            {"rmse", num(d.rmse)},
            {"residuals", num_vector(d.residuals)}};
  if (d.loo_press) j["loo_press"] = num(*d.loo_press);
  if (d.loo_q_squared) j["loo_q_squared"] = num(*d.loo_q_squared);
  if (!d.loo_residuals.empty()) j["loo_residuals"] = num_vector(d.loo_residuals);
  return j;
}

FitDiagnostics diagnostics_from(const json& j) {
  FitDiagnostics d;
  d.r_squared = get_num(at(j, "r_squared"));
  d.rmse = get_num(at(j, "rmse"));
  d.residuals = get_vector(at(j, "residuals"));
  if (j.contains("loo_press")) d.loo_press = get_num(j["loo_press"]);
  if (j.contains("loo_q_squared")) d.loo_q_squared = get_num(j["loo_q_squared"]);
  if (j.contains("loo_residuals")) d.loo_residuals = get_vector(j["loo_residuals"]);
  return d;
}

json models_to_json(const SurrogateSet& m) {
  return {
      {"latency_ms",
       {{"basis", {"1", "b", "h", "b^2", "b*h", "h^2"}}, {"coefficients", num_array(m.latency.coeffs)}}},
      {"power_w",
       {{"basis", {"1", "b", "h", "b^2", "b*h", "h^2"}}, {"coefficients", num_array(m.power.coeffs)}}},
      {"miou",
       {{"numerator_basis", {"1", "b", "h", "b*h"}},
        {"numerator", num_array(m.miou.numerator)},
        {"denominator_basis", {"1", "b", "h"}},
        {"denominator", num_array(m.miou.denominator)},
        {"denominator_bh", 1}}},
  };
}

SurrogateSet models_from(const json& j) {
  SurrogateSet m;
  m.latency = {get_array<6>(at(at(j, "latency_ms"), "coefficients")), Target::latency_ms};
  m.power = {get_array<6>(at(at(j, "power_w"), "coefficients")), Target::power_w};
  const auto& r = at(j, "miou");
  m.miou.numerator = get_array<4>(at(r, "numerator"));
  m.miou.denominator = get_array<3>(at(r, "denominator"));
  return m;
}

json to_json(const Weights& w) {
  return {{"latency", num(w.latency)}, {"power", num(w.power)}, {"miou", num(w.miou)}};
}
Weights weights_from(const json& j) {
  return {get_num(at(j, "latency")), get_num(at(j, "power")), get_num(at(j, "miou"))};
}

json to_json(const NormalizationBounds& b) {
  return {{"latency_min", num(b.latency_min)}, {"latency_max", num(b.latency_max)},
          {"power_min", num(b.power_min)},     {"power_max", num(b.power_max)},
          {"miou_min", num(b.miou_min)},       {"miou_max", num(b.miou_max)}};
}
NormalizationBounds bounds_from(const json& j) {
  return {get_num(at(j, "latency_min")), get_num(at(j, "latency_max")),
          get_num(at(j, "power_min")),   get_num(at(j, "power_max")),
          get_num(at(j, "miou_min")),    get_num(at(j, "miou_max"))};
}

json to_json(const Box& b) {
  return {{"b_lo", num(b.b_lo)}, {"b_hi", num(b.b_hi)}, {"h_lo", num(b.h_lo)}, {"h_hi", num(b.h_hi)}};
}
Box box_from(const json& j) {
  return {get_num(at(j, "b_lo")), get_num(at(j, "b_hi")), get_num(at(j, "h_lo")),
          get_num(at(j, "h_hi"))};
}

json to_json(const Lattice& l) {
  return {{"b_step", l.b_step}, {"b_lo", l.b_lo}, {"b_hi", l.b_hi},
          {"h_step", l.h_step}, {"h_lo", l.h_lo}, {"h_hi", l.h_hi}};
}
Lattice lattice_from(const json& j) {
  return {at(j, "b_step").get<int>(), at(j, "b_lo").get<int>(), at(j, "b_hi").get<int>(),
          at(j, "h_step").get<int>(), at(j, "h_lo").get<int>(), at(j, "h_hi").get<int>()};
}

json to_json(const PredictedMetrics& p) {
  return {{"miou", num(p.miou)},           {"latency_ms", num(p.latency_ms)},
          {"power_w", num(p.power_w)},     {"energy_mj", num(p.energy_mj)},
          {"fps", num(p.fps)},             {"fps_per_watt", num(p.fps_per_watt)}};
}
PredictedMetrics predicted_from(const json& j) {
  return {get_num(at(j, "miou")),      get_num(at(j, "latency_ms")), get_num(at(j, "power_w")),
          get_num(at(j, "energy_mj")), get_num(at(j, "fps")),        get_num(at(j, "fps_per_watt"))};
}

json to_json(const OptimizationResult& r) {
  json trace = json::array();
  for (const auto& s : r.trace) {
    trace.push_back({{"seed", to_json(s.seed)},
                     {"terminal", to_json(s.terminal)},
                     {"seed_value", num(s.seed_value)},
                     {"terminal_value", num(s.terminal_value)},
                     {"iterations", s.iterations},
                     {"converged", s.converged},
                     {"failure", s.failure}});
  }
  return {{"continuous_opt", to_json(r.continuous_opt)},
          {"objective_value", num(r.objective_value)},
          {"snapped", to_json(r.snapped)},
          {"snapped_objective", num(r.snapped_objective)},
          {"predicted_continuous", to_json(r.predicted_continuous)},
          {"predicted_snapped", to_json(r.predicted_snapped)},
          {"trace", trace}};
}

OptimizationResult optimization_from(const json& j) {
  OptimizationResult r;
  r.continuous_opt = point_from(at(j, "continuous_opt"));
  r.objective_value = get_num(at(j, "objective_value"));
  r.snapped = config_from(at(j, "snapped"));
  r.snapped_objective = get_num(at(j, "snapped_objective"));
  r.predicted_continuous = predicted_from(at(j, "predicted_continuous"));
  r.predicted_snapped = predicted_from(at(j, "predicted_snapped"));
  for (const auto& s : at(j, "trace")) {
    StartRecord rec;
    rec.seed = point_from(at(s, "seed"));
    rec.terminal = point_from(at(s, "terminal"));
    rec.seed_value = get_num(at(s, "seed_value"));
    rec.terminal_value = get_num(at(s, "terminal_value"));
    rec.iterations = at(s, "iterations").get<int>();
    rec.converged = at(s, "converged").get<bool>();
    rec.failure = at(s, "failure").get<std::string>();
    r.trace.push_back(rec);
  }
  return r;
}

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    format_error(std::string(what) + ": " + e.what());
  }
}

}  // namespace

// ---- numbers -------------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error(ErrorKind::format, "cannot format number");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    format_error("not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

// ---- samples -------------------------------------------------------------------

std::vector<Sample> parse_samples(std::istream& in, std::string_view source) {
  static constexpr std::array<std::string_view, 5> kColumns{"b", "h", "miou", "latency_ms",
                                                            "power_w"};
  const std::string where(source);
  std::array<int, 5> index{-1, -1, -1, -1, -1};
  std::size_t width = 0;
  bool have_header = false;
  std::vector<Sample> samples;

  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto cells = split_commas(line);

    if (!have_header) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto it = std::find(kColumns.begin(), kColumns.end(), cells[c]);
        if (it == kColumns.end()) {
          format_error(where + ": unknown header column '" + std::string(cells[c]) + "'");
        }
        auto& slot = index[static_cast<std::size_t>(it - kColumns.begin())];
        if (slot >= 0) format_error(where + ": duplicate header column '" + std::string(*it) + "'");
        slot = static_cast<int>(c);
      }
      for (std::size_t k = 0; k < kColumns.size(); ++k) {
        if (index[k] < 0) {
          format_error(where + ": missing header column '" + std::string(kColumns[k]) + "'");
        }
      }
      width = cells.size();
      have_header = true;
      continue;
    }

    const std::string row = where + ":" + std::to_string(line_no);
    if (cells.size() != width) {
      format_error(row + ": expected " + std::to_string(width) + " cells, got " +
                   std::to_string(cells.size()));
    }
    auto cell = [&](std::size_t k) {
      return cells[static_cast<std::size_t>(index[k])];
    };
    std::size_t k = 0;
    try {
      const int b = parse_int(cell(k));
      const int h = parse_int(cell(++k));
      const double miou = parse_double(cell(++k));
      const double latency = parse_double(cell(++k));
      const double power = parse_double(cell(++k));
      k = kColumns.size();
      samples.push_back(make_sample(make_config(b, h), miou, latency, power));
    } catch (const Error& e) {
      const std::string column =
          k < kColumns.size() ? " column " + std::string(kColumns[k]) : std::string();
      format_error(row + column + ": " + e.what());
    }
  }

  if (!have_header) format_error(where + ": missing header line");
  if (samples.empty()) format_error(where + ": no data rows");
  return samples;
}

std::vector<Sample> parse_samples(const std::filesystem::path& path) {
  std::istringstream in(read_all(path));
  return parse_samples(in, path.string());
}

void write_samples(std::ostream& out, std::span<const Sample> samples) {
  out << kSampleHeader << '\n';
  for (const auto& s : samples) {
    out << s.config.b << ',' << s.config.h << ',' << format_double(s.miou) << ','
        << format_double(s.latency_ms) << ',' << format_double(s.power_w) << '\n';
  }
}

void emit_samples(std::span<const Sample> samples, const std::filesystem::path& path) {
  std::ostringstream os;
  write_samples(os, samples);
  write_text(path, os.str());
}

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// ---- run configuration ---------------------------------------------------------

void RunConfig::validate() const {
  lattice.validate();
  box.validate();
  if (resolution_b < 2 || resolution_h < 2) {
    throw Error(ErrorKind::usage, "contour resolution must be >= 2 per axis");
  }
  for (double w : {weights.latency, weights.power, weights.miou}) {
    if (!std::isfinite(w) || w < 0.0) throw Error(ErrorKind::usage, "weights must be >= 0");
  }
}

// ---- report --------------------------------------------------------------------

std::string report_to_string(const TuningReport& r) {
  json j;
  j["tool"] = {{"name", kToolName}, {"version", r.provenance.tool_version}};
  json prov = {{"input_digest", r.provenance.input_digest},
               {"source", r.provenance.source},
               {"dataset", r.provenance.dataset}};
  prov["seed"] = r.provenance.seed ? json(*r.provenance.seed) : json(nullptr);
  j["provenance"] = prov;
  j["surrogates"] = models_to_json(r.models);
  j["diagnostics"] = {{"latency_ms", to_json(r.latency_fit)},
                      {"power_w", to_json(r.power_fit)},
                      {"miou", to_json(r.miou_fit)}};
  json configs = json::array();
  for (const auto& c : r.sampled_configs) configs.push_back(to_json(c));
  j["sampled_configs"] = configs;
  if (r.objective) {
    j["objective"] = {{"weights", to_json(r.objective->weights)},
                      {"bounds", to_json(r.objective->bounds)},
                      {"box", to_json(r.objective->box)},
                      {"lattice", to_json(r.objective->lattice)},
                      {"bounds_policy", r.objective->bounds_policy}};
  }
  if (r.optimization) j["optimization"] = to_json(*r.optimization);
  return j.dump(2) + "\n";
}

TuningReport report_from_string(std::string_view text) {
  const json j = parse_json(text, "report");
  try {
    TuningReport r;
    const auto& prov = at(j, "provenance");
    r.provenance.input_digest = at(prov, "input_digest").get<std::string>();
    r.provenance.source = at(prov, "source").get<std::string>();
    r.provenance.dataset = at(prov, "dataset").get<std::string>();
    if (!at(prov, "seed").is_null()) r.provenance.seed = prov["seed"].get<std::uint64_t>();
    r.provenance.tool_version = at(at(j, "tool"), "version").get<std::string>();
    r.models = models_from(at(j, "surrogates"));
    const auto& diag = at(j, "diagnostics");
    r.latency_fit = diagnostics_from(at(diag, "latency_ms"));
    r.power_fit = diagnostics_from(at(diag, "power_w"));
    r.miou_fit = diagnostics_from(at(diag, "miou"));
    for (const auto& c : at(j, "sampled_configs")) r.sampled_configs.push_back(config_from(c));
    if (j.contains("objective")) {
      const auto& o = j["objective"];
      r.objective = ObjectiveSettings{weights_from(at(o, "weights")), bounds_from(at(o, "bounds")),
                                      box_from(at(o, "box")), lattice_from(at(o, "lattice")),
                                      at(o, "bounds_policy").get<std::string>()};
    }
    if (j.contains("optimization")) r.optimization = optimization_from(j["optimization"]);
    return r;
  } catch (const json::exception& e) {
    format_error(std::string("report: ") + e.what());
  }
}

void emit_report(const TuningReport& report, const std::filesystem::path& path) {
  write_text(path, report_to_string(report));
}

TuningReport read_report(const std::filesystem::path& path) {
  return report_from_string(read_all(path));
}

// ---- contours ------------------------------------------------------------------

std::vector<double> even_grid(double lo, double hi, int count) {
  if (count < 2) throw Error(ErrorKind::domain, "grid resolution must be >= 2");
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (count - 1);
  }
  out.back() = hi;
  return out;
}

std::vector<std::filesystem::path> emit_contours(const SurrogateSet& models, const Box& box,
                                                 int resolution_b, int resolution_h,
                                                 const std::string& path_prefix) {
  if (path_prefix.empty()) throw Error(ErrorKind::io, "contour output prefix is empty");
  box.validate();
  const auto bs = even_grid(box.b_lo, box.b_hi, resolution_b);
  const auto hs = even_grid(box.h_lo, box.h_hi, resolution_h);

  const bool dir_prefix = path_prefix.back() == '/';
  auto path_for = [&](const char* metric) {
    return std::filesystem::path(path_prefix + (dir_prefix ? "" : "_") + metric + ".csv");
  };

  struct Surface {
    const char* name;
    std::function<double(ContinuousPoint)> eval;
  };
  const std::array<Surface, 3> surfaces{{
      {"miou", [&](ContinuousPoint p) { return models.miou.predict(p); }},
      {"latency", [&](ContinuousPoint p) { return models.latency.predict(p); }},
      {"power", [&](ContinuousPoint p) { return models.power.predict(p); }},
  }};

  std::vector<std::filesystem::path> written;
  for (const auto& surface : surfaces) {
    std::ostringstream os;
    os << "b,h,value\n";
    for (double b : bs) {
      for (double h : hs) {
        os << format_double(b) << ',' << format_double(h) << ',';
        try {
          const double v = surface.eval({b, h});
          os << (std::isfinite(v) ? format_double(v) : std::string("NA"));
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::pole) throw;
          os << "NA";
        }
        os << '\n';
      }
    }
    const auto path = path_for(surface.name);
    write_text(path, os.str());
    written.push_back(path);
  }
  return written;
}

// ---- cost-model parameters -----------------------------------------------------

std::string costmodel_to_string(const CostModelParams& p) {
  json j = {
      {"latency_ms", num_array(p.latency)},
      {"power_w", num_array(p.power)},
      {"miou", {{"numerator", num_array(p.miou.numerator)}, {"denominator", num_array(p.miou.denominator)}}},
      {"noise_sigma",
       {{"latency_ms", num(p.sigma.latency_ms)}, {"power_w", num(p.sigma.power_w)}, {"miou", num(p.sigma.miou)}}},
      {"seed", p.seed},
  };
  return j.dump(2) + "\n";
}

CostModelParams costmodel_from_string(std::string_view text) {
  const json j = parse_json(text, "cost model");
  try {
    CostModelParams p = CostModelParams::defaults();
    if (j.contains("latency_ms")) p.latency = get_array<6>(j["latency_ms"]);
    if (j.contains("power_w")) p.power = get_array<6>(j["power_w"]);
    if (j.contains("miou")) {
      p.miou.numerator = get_array<4>(at(j["miou"], "numerator"));
      p.miou.denominator = get_array<3>(at(j["miou"], "denominator"));
    }
    if (j.contains("noise_sigma")) {
      const auto& s = j["noise_sigma"];
      if (s.contains("latency_ms")) p.sigma.latency_ms = get_num(s["latency_ms"]);
      if (s.contains("power_w")) p.sigma.power_w = get_num(s["power_w"]);
      if (s.contains("miou")) p.sigma.miou = get_num(s["miou"]);
    }
    if (j.contains("seed")) p.seed = j["seed"].get<std::uint64_t>();
    return p;
  } catch (const json::exception& e) {
    format_error(std::string("cost model: ") + e.what());
  }
}

CostModelParams load_costmodel(const std::filesystem::path& path) {
  return costmodel_from_string(read_all(path));
}

}  // namespace surrotune
