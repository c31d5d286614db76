#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "surrotune/costmodel.hpp"
#include "surrotune/designspace.hpp"
#include "surrotune/optimizer.hpp"
#include "surrotune/surrogate.hpp"

namespace surrotune {

inline constexpr std::string_view kToolName = "surrotune";
inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kSampleHeader = "b,h,miou,latency_ms,power_w";

// ---- numbers -------------------------------------------------------------------

/// Shortest decimal that round-trips to the same double (dot separator).
std::string format_double(double v);

/// Strict, locale-independent parse of the whole string. Throws format errors.
double parse_double(std::string_view text);

// ---- samples -------------------------------------------------------------------

/// Header `b,h,miou,latency_ms,power_w` (any column order); `#` comments and
/// blank lines are skipped; repeated configs are kept as separate samples.
std::vector<Sample> parse_samples(std::istream& in, std::string_view source = "<stream>");
std::vector<Sample> parse_samples(const std::filesystem::path& path);

void write_samples(std::ostream& out, std::span<const Sample> samples);
void emit_samples(std::span<const Sample> samples, const std::filesystem::path& path);

/// 64-bit FNV-1a of the bytes, as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view bytes);

// ---- run configuration ---------------------------------------------------------

enum class BoundsPolicy { sampled_configs, explicit_values };

struct RunConfig {
  Lattice lattice;
  Box box;
  Weights weights;
  BoundsPolicy bounds_policy = BoundsPolicy::sampled_configs;
  NormalizationBounds explicit_bounds;
  int resolution_b = 49;
  int resolution_h = 29;
  std::uint64_t seed = CostModelParams::defaults().seed;
  std::optional<NoiseSigma> sigma;
  std::string costmodel_path;
  std::string dataset_label;
  std::string out_path;

  void validate() const;
};

// ---- report --------------------------------------------------------------------

struct Provenance {
  std::string input_digest;  // fnv1a64 of the input bytes
  std::string source;        // "samples" or "report"
  std::string dataset;
  std::optional<std::uint64_t> seed;
  std::string tool_version{kToolVersion};

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ObjectiveSettings {
  Weights weights;
  NormalizationBounds bounds;
  Box box;
  Lattice lattice;
  std::string bounds_policy = "sampled_configs";

  friend bool operator==(const ObjectiveSettings&, const ObjectiveSettings&) = default;
};

struct TuningReport {
  SurrogateSet models;
  FitDiagnostics latency_fit;
  FitDiagnostics power_fit;
  FitDiagnostics miou_fit;
  std::vector<Config> sampled_configs;
  std::optional<ObjectiveSettings> objective;
  std::optional<OptimizationResult> optimization;
  Provenance provenance;

  friend bool operator==(const TuningReport&, const TuningReport&) = default;
};

/// Pretty-printed JSON with sorted keys and shortest round-trip numbers.
std::string report_to_string(const TuningReport& report);
TuningReport report_from_string(std::string_view text);

void emit_report(const TuningReport& report, const std::filesystem::path& path);
TuningReport read_report(const std::filesystem::path& path);

// ---- contours ------------------------------------------------------------------

/// Evenly spaced coordinates from lo to hi inclusive (endpoints exact).
std::vector<double> even_grid(double lo, double hi, int count);

/// Writes `<prefix>_miou.csv`, `<prefix>_latency.csv`, `<prefix>_power.csv`
/// (no underscore when the prefix ends in a path separator). Each has header
/// `b,h,value`, rows sorted by b then h; pole cells hold `NA`.
std::vector<std::filesystem::path> emit_contours(const SurrogateSet& models, const Box& box,
                                                 int resolution_b, int resolution_h,
                                                 const std::string& path_prefix);

// ---- cost-model parameters -----------------------------------------------------

std::string costmodel_to_string(const CostModelParams& params);
CostModelParams costmodel_from_string(std::string_view text);
CostModelParams load_costmodel(const std::filesystem::path& path);

/// Reads a whole file into memory; throws ErrorKind::io.
std::string read_all(const std::filesystem::path& path);

}  // namespace surrotune
