#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cfuse/diagnostics.hpp"
#include "cfuse/fuse.hpp"
#include "cfuse/probe.hpp"

namespace cfuse::tools {

namespace fs = std::filesystem;

/// Raised for flag combinations that parse but make no sense together.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string software_version();

// Each command writes its outputs next to `out` (a path prefix) plus a
// `<out>.manifest.json`; every other output names that manifest.

struct PairsOptions {
  fs::path labels;
  fs::path out;
  std::size_t count = 1000;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

struct PairsSummary {
  std::size_t positives_requested = 0;
  std::size_t negatives_requested = 0;
  std::size_t collapsed = 0;
  std::size_t returned = 0;
  std::size_t flips = 0;
  std::size_t positives = 0;  // after flipping
  std::size_t negatives = 0;
};

/// Writes `out` (pairs TSV in the labels file's ids).
PairsSummary cmd_pairs(const PairsOptions& options);
std::string to_key_value(const PairsSummary& summary);

struct EmbedOptions {
  fs::path edges;
  std::optional<fs::path> pairs;
  fs::path out;
  FuseConfig config;
};

struct PhaseTimings {
  double load = 0.0;
  double fit = 0.0;
  double write = 0.0;
};

struct EmbedSummary {
  EffectiveParams params;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t pairs = 0;
  double final_objective = 0.0;
  PhaseTimings timings;
  std::vector<fs::path> outputs;
};

/// Writes <out>.emb (binary), <out>.tsv, <out>.ids.tsv, <out>.trace.csv.
EmbedSummary cmd_embed(const EmbedOptions& options);
std::string to_key_value(const EmbedSummary& summary);

struct DiagnoseOptions {
  fs::path edges;
  std::optional<fs::path> pairs;
  std::optional<double> lambda;
  std::uint64_t seed = 0;
  std::size_t k = 150;
  std::size_t lipschitz_iterations = 1000;
  double lipschitz_tolerance = 1e-9;
  std::size_t spot_samples = 20;
  int threads = 1;
  fs::path out;
};

/// Writes <out>.txt (key = value) and <out>.json.
DiagnosticsReport cmd_diagnose(const DiagnoseOptions& options);

struct EvalOptions {
  fs::path embedding;  // TSV, or binary with `ids`
  std::optional<fs::path> ids;
  fs::path pairs;
  // When set, the probe trains on every pair in `pairs` and scores these.
  std::optional<fs::path> test_pairs;
  ProbeConfig probe;
  fs::path out;
};

/// Writes <out>.txt, <out>.json and <out>.weights.
EvalResult cmd_eval(const EvalOptions& options);

struct BenchOptions {
  // Small enough that S stays cache-resident across the whole sweep, so the
  // timings track operation counts rather than memory-hierarchy effects.
  std::size_t n = 1000;
  std::size_t m = 25000;
  std::size_t pairs = 5000;
  std::size_t k = 16;
  std::size_t doublings = 3;
  std::size_t iterations = 100;
  std::size_t repeats = 5;
  std::uint64_t seed = 0;
  int threads = 1;
  fs::path out;
};

struct BenchRow {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t pairs = 0;
  std::size_t k = 0;
  double seconds_per_iteration = 0.0;
};

struct BenchResult {
  std::vector<BenchRow> rows;
  // Least-squares fit seconds = slope * (2m + P) k + intercept.
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

/// Sweeps m, P and k one at a time over `doublings` doublings from the
/// base point. Writes <out>.csv.
BenchResult cmd_bench(const BenchOptions& options);
std::string to_key_value(const BenchResult& result);

/// Least-squares line through (x, y); returns {slope, intercept, R^2}.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace cfuse::tools
