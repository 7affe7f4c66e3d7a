#include "commands.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "cfuse/graph.hpp"
#include "cfuse/io.hpp"
#include "cfuse/pairs.hpp"
#include "cfuse/parallel.hpp"
#include "synthetic.hpp"

#ifndef CFUSE_VERSION
#define CFUSE_VERSION "unknown"
#endif

namespace cfuse::tools {
namespace {

using json = nlohmann::ordered_json;

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - start_).count();
    start_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path with_suffix(const fs::path& prefix, const std::string& suffix) {
  return fs::path(prefix.string() + suffix);
}

void ensure_parent(const fs::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

json manifest_header(const std::string& command) {
  json j;
  j["software"] = {{"name", "cfuse"}, {"version", software_version()}};
  j["command"] = command;
  return j;
}

json digest(const fs::path& path) {
  return {{"path", path.string()}, {"sha256", file_sha256(path)}};
}

json outputs_json(const std::vector<fs::path>& outputs) {
  json out = json::array();
  for (const auto& p : outputs) out.push_back(digest(p));
  return out;
}

json timings_json(const PhaseTimings& t) {
  return {{"load", t.load}, {"fit", t.fit}, {"write", t.write}};
}

json fuse_config_json(const FuseConfig& c) {
  return {{"k", c.k},
          {"iterations", c.iterations},
          {"eta-scaled", c.eta_scaled},
          {"lambda-scaled", c.lambda_scaled},
          {"gradient-mode", to_string(c.gradient_mode)},
          {"precision", to_string(c.precision)},
          {"seed", c.seed},
          {"threads", c.threads}};
}

json params_json(const EffectiveParams& p) {
  return {{"p_star", p.p_star}, {"d_star", p.d_star}, {"eta", p.eta}, {"lambda", p.lambda}};
}

json probe_config_json(const ProbeConfig& c) {
  return {{"epochs", c.epochs},
          {"learning-rate", c.learning_rate},
          {"train-fraction", c.train_fraction},
          {"threshold", c.threshold},
          {"seed", c.seed},
          {"symmetric", c.symmetric_features}};
}

/// Maps a pairs file through an external-to-row lookup.
template <typename Lookup>
PairSet load_pairs(const fs::path& path, std::size_t n, Lookup&& row_of) {
  const auto raw = read_pairs_file(path);
  std::vector<LabeledPair> pairs;
  pairs.reserve(raw.size());
  for (const auto& p : raw) pairs.push_back({row_of(p.i), row_of(p.j), p.sign});
  return PairSet(n, std::move(pairs));
}

PairSet load_pairs_for_graph(const fs::path& path, const LoadedGraph& loaded) {
  return load_pairs(path, loaded.graph.n(),
                    [&](ExternalId id) { return loaded.internal_id(id); });
}

std::string shortest(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string json_value_text(const json& value) {
  if (value.is_boolean()) return value.get<bool>() ? "true" : "false";
  if (value.is_number_float()) return shortest(value.get<double>());
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

}  // namespace

std::string software_version() { return CFUSE_VERSION; }

PairsSummary cmd_pairs(const PairsOptions& options) {
  if (options.noise < 0.0 || options.noise > 1.0)
    throw UsageError("--noise must lie in [0, 1]");
  Stopwatch clock;
  PhaseTimings timings;
  const LabelsFile file = read_labels_file(options.labels);
  const NodeLabels labels = NodeLabels::from_raw(file.classes);
  timings.load = clock.lap();

  GeneratedPairs generated = generate_pairs(labels, options.count, options.seed);
  // The flip stream is seeded separately so that changing --noise leaves the
  // sampled pairs unchanged.
  const PairSet flipped = flip_labels(generated.pairs, options.noise, options.seed + 1);
  timings.fit = clock.lap();

  PairsSummary summary;
  summary.positives_requested = generated.positives_requested;
  summary.negatives_requested = generated.negatives_requested;
  summary.collapsed = generated.collapsed;
  summary.returned = flipped.size();
  summary.flips = static_cast<std::size_t>(
      std::llround(options.noise * static_cast<double>(flipped.size())));
  summary.positives = flipped.positives();
  summary.negatives = flipped.negatives();

  std::vector<ExternalPair> out;
  out.reserve(flipped.size());
  for (const auto& p : flipped.pairs()) out.push_back({file.nodes[p.i], file.nodes[p.j], p.sign});
  const fs::path manifest_path = with_suffix(options.out, ".manifest.json");
  ensure_parent(options.out);
  write_pairs_file(options.out, out, manifest_path.filename().string());
  if (read_pairs_file(options.out).size() != out.size())
    throw IoError("pairs file failed validation: " + options.out.string());
  timings.write = clock.lap();

  json m = manifest_header("pairs");
  m["config"] = {{"count", options.count}, {"noise", options.noise}, {"seed", options.seed}};
  m["seeds"] = {{"sampling", options.seed}, {"flips", options.seed + 1}};
  m["inputs"] = {{"labels", digest(options.labels)}};
  m["summary"] = {{"positives_requested", summary.positives_requested},
                  {"negatives_requested", summary.negatives_requested},
                  {"collapsed", summary.collapsed},
                  {"returned", summary.returned},
                  {"flips", summary.flips},
                  {"positives", summary.positives},
                  {"negatives", summary.negatives}};
  m["outputs"] = outputs_json({options.out});
  m["timings_seconds"] = timings_json(timings);
  write_text_file(manifest_path, m.dump(2) + "\n");
  return summary;
}

std::string to_key_value(const PairsSummary& s) {
  std::ostringstream out;
  out << "positives_requested = " << s.positives_requested << '\n'
      << "negatives_requested = " << s.negatives_requested << '\n'
      << "collapsed = " << s.collapsed << '\n'
      << "returned = " << s.returned << '\n'
      << "flips = " << s.flips << '\n'
      << "positives = " << s.positives << '\n'
      << "negatives = " << s.negatives << '\n';
  return out.str();
}

EmbedSummary cmd_embed(const EmbedOptions& options) {
  options.config.validate();
  if (options.config.lambda_scaled > 0.0 && !options.pairs)
    throw UsageError("--pairs is required when --lambda-scaled > 0");

  Stopwatch clock;
  EmbedSummary summary;
  const LoadedGraph loaded = load_edge_list(options.edges);
  const PairSet pairs =
      options.pairs ? load_pairs_for_graph(*options.pairs, loaded) : PairSet(loaded.graph.n(), {});
  summary.timings.load = clock.lap();

  const FitResult fit = fuse_fit(loaded.graph, pairs, options.config);
  summary.timings.fit = clock.lap();

  const fs::path manifest_path = with_suffix(options.out, ".manifest.json");
  const std::string manifest_name = manifest_path.filename().string();
  const fs::path binary_path = with_suffix(options.out, ".emb");
  const fs::path tsv_path = with_suffix(options.out, ".tsv");
  const fs::path ids_path = with_suffix(options.out, ".ids.tsv");
  const fs::path trace_path = with_suffix(options.out, ".trace.csv");
  ensure_parent(options.out);
  write_embedding_binary(binary_path, fit.embedding);
  write_embedding_tsv(tsv_path, fit.embedding, loaded.external_ids, manifest_name);
  write_id_map(ids_path, loaded.external_ids);
  write_trace_csv(trace_path, fit.trace);
  if (!(read_embedding_binary(binary_path).values == fit.embedding.values))
    throw IoError("embedding failed read-back validation: " + binary_path.string());
  summary.timings.write = clock.lap();

  summary.params = fit.params;
  summary.n = loaded.graph.n();
  summary.m = loaded.graph.m();
  summary.pairs = pairs.size();
  summary.final_objective = fit.trace.back();
  summary.outputs = {binary_path, tsv_path, ids_path, trace_path};

  json m = manifest_header("embed");
  m["config"] = fuse_config_json(options.config);
  m["effective"] = params_json(fit.params);
  m["seeds"] = {{"init", options.config.seed}};
  json inputs;
  inputs["edges"] = digest(options.edges);
  if (options.pairs) inputs["pairs"] = digest(*options.pairs);
  m["inputs"] = inputs;
  m["graph"] = {{"n", summary.n},
                {"m", summary.m},
                {"raw_edges", loaded.report.raw_edges},
                {"duplicates_dropped", loaded.report.duplicates_dropped},
                {"self_loops_dropped", loaded.report.self_loops_dropped},
                {"pairs", summary.pairs}};
  m["final_objective"] = summary.final_objective;
  m["outputs"] = outputs_json(summary.outputs);
  m["timings_seconds"] = timings_json(summary.timings);
  write_text_file(manifest_path, m.dump(2) + "\n");
  summary.outputs.push_back(manifest_path);
  return summary;
}

std::string to_key_value(const EmbedSummary& s) {
  std::ostringstream out;
  out << "n = " << s.n << '\n'
      << "m = " << s.m << '\n'
      << "pairs = " << s.pairs << '\n'
      << "p_star = " << shortest(s.params.p_star) << '\n'
      << "d_star = " << shortest(s.params.d_star) << '\n'
      << "eta = " << shortest(s.params.eta) << '\n'
      << "lambda = " << shortest(s.params.lambda) << '\n'
      << "final_objective = " << shortest(s.final_objective) << '\n'
      << "seconds_load = " << shortest(s.timings.load) << '\n'
      << "seconds_fit = " << shortest(s.timings.fit) << '\n'
      << "seconds_write = " << shortest(s.timings.write) << '\n';
  for (const auto& p : s.outputs) out << "output = " << p.string() << '\n';
  return out.str();
}

DiagnosticsReport cmd_diagnose(const DiagnoseOptions& options) {
  if (options.pairs.has_value() != options.lambda.has_value())
    throw UsageError("--pairs and --lambda must be given together");
  if (options.k == 0) throw UsageError("--k must be positive");
  Stopwatch clock;
  PhaseTimings timings;
  const LoadedGraph loaded = load_edge_list(options.edges);
  std::optional<PairSet> pairs;
  if (options.pairs) pairs = load_pairs_for_graph(*options.pairs, loaded);
  timings.load = clock.lap();

  DiagnosticsReport report;
  report.n = loaded.graph.n();
  report.m = loaded.graph.m();
  report.zagreb = zagreb_report(loaded.graph);
  const Matrix init = init_embedding(loaded.graph.n(), options.k, options.seed).values;
  report.cosine_alignment = gradient_alignment(loaded.graph, init, options.threads);
  report.alignment_seed = options.seed;
  report.alignment_k = options.k;
  if (pairs) {
    report.lambda = *options.lambda;
    report.lipschitz = lipschitz_estimate(loaded.graph, *pairs, *options.lambda,
                                          options.lipschitz_iterations,
                                          options.lipschitz_tolerance, options.seed);
    if (options.spot_samples > 0) {
      report.lipschitz_spot_samples = options.spot_samples;
      report.lipschitz_spot_ratio =
          lipschitz_spot_ratio(loaded.graph, *pairs, *options.lambda, report.lipschitz->value,
                               options.spot_samples, 4, options.seed + 1, options.threads);
    }
  }
  timings.fit = clock.lap();

  const fs::path manifest_path = with_suffix(options.out, ".manifest.json");
  const std::string manifest_name = manifest_path.filename().string();
  const fs::path text_path = with_suffix(options.out, ".txt");
  const fs::path json_path = with_suffix(options.out, ".json");
  ensure_parent(options.out);
  write_text_file(text_path, "manifest = " + manifest_name + "\n" + to_key_value(report));
  json body = json::parse(to_json(report));
  json wrapped;
  wrapped["manifest"] = manifest_name;
  for (auto& [key, value] : body.items()) wrapped[key] = value;
  write_text_file(json_path, wrapped.dump(2) + "\n");
  timings.write = clock.lap();

  json m = manifest_header("diagnose");
  m["config"] = {{"k", options.k},
                 {"seed", options.seed},
                 {"lipschitz-iterations", options.lipschitz_iterations},
                 {"lipschitz-tolerance", options.lipschitz_tolerance},
                 {"spot-samples", options.spot_samples},
                 {"threads", options.threads}};
  if (options.lambda) m["config"]["lambda"] = *options.lambda;
  m["seeds"] = {{"alignment", options.seed}, {"power_iteration", options.seed},
                {"spot_check", options.seed + 1}};
  json inputs;
  inputs["edges"] = digest(options.edges);
  if (options.pairs) inputs["pairs"] = digest(*options.pairs);
  m["inputs"] = inputs;
  m["outputs"] = outputs_json({text_path, json_path});
  m["timings_seconds"] = timings_json(timings);
  write_text_file(manifest_path, m.dump(2) + "\n");
  return report;
}

namespace {

struct LoadedEmbedding {
  Matrix values;
  std::vector<ExternalId> ids;
};

bool has_binary_magic(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  char magic[4] = {};
  in.read(magic, 4);
  return in.gcount() == 4 && std::string(magic, 4) == "FUSE";
}

LoadedEmbedding load_embedding(const EvalOptions& options) {
  LoadedEmbedding out;
  if (has_binary_magic(options.embedding)) {
    if (!options.ids) throw UsageError("--ids is required for a binary embedding");
    out.values = read_embedding_binary(options.embedding).values;
    out.ids = read_id_map(*options.ids);
    require_rows(out.ids.size(), out.values.rows(), "id map");
  } else {
    TsvEmbedding tsv = read_embedding_tsv(options.embedding);
    out.values = std::move(tsv.embedding.values);
    out.ids = std::move(tsv.external_ids);
  }
  return out;
}

}  // namespace

EvalResult cmd_eval(const EvalOptions& options) {
  options.probe.validate();
  Stopwatch clock;
  PhaseTimings timings;
  const LoadedEmbedding emb = load_embedding(options);
  std::unordered_map<ExternalId, NodeId> row_of;
  row_of.reserve(emb.ids.size());
  for (std::size_t r = 0; r < emb.ids.size(); ++r) {
    if (!row_of.emplace(emb.ids[r], static_cast<NodeId>(r)).second)
      throw std::invalid_argument("embedding lists node " + std::to_string(emb.ids[r]) +
                                  " twice");
  }
  auto lookup = [&](ExternalId id) {
    const auto it = row_of.find(id);
    if (it == row_of.end())
      throw std::invalid_argument("pair references node " + std::to_string(id) +
                                  " absent from the embedding");
    return it->second;
  };
  const std::size_t n = emb.values.rows();
  const PairSet pairs = load_pairs(options.pairs, n, lookup);
  std::optional<PairSet> test;
  if (options.test_pairs) test = load_pairs(*options.test_pairs, n, lookup);
  timings.load = clock.lap();

  ProbeWeights weights;
  const EvalResult result = test ? evaluate_split(emb.values, pairs, *test, options.probe, &weights)
                                 : evaluate(emb.values, pairs, options.probe, &weights);
  timings.fit = clock.lap();

  const fs::path manifest_path = with_suffix(options.out, ".manifest.json");
  const std::string manifest_name = manifest_path.filename().string();
  const fs::path text_path = with_suffix(options.out, ".txt");
  const fs::path json_path = with_suffix(options.out, ".json");
  const fs::path weights_path = with_suffix(options.out, ".weights");
  ensure_parent(options.out);

  json body;
  body["manifest"] = manifest_name;
  body["mode"] = test ? "fresh" : "held_out";
  body["accuracy"] = result.accuracy;
  body["macro_f1"] = result.macro_f1;
  body["n_train"] = result.n_train;
  body["n_test"] = result.n_test;
  body["warnings"] = result.warnings;
  std::string text;
  for (const auto& [key, value] : body.items()) {
    if (key == "warnings") continue;
    text += key + " = " + json_value_text(value) + "\n";
  }
  for (const auto& w : result.warnings) text += "warning = " + w + "\n";
  write_text_file(text_path, text);
  write_text_file(json_path, body.dump(2) + "\n");
  write_probe_weights(weights_path, weights);
  if (read_probe_weights(weights_path).w.size() != weights.w.size())
    throw IoError("probe weights failed read-back validation: " + weights_path.string());
  timings.write = clock.lap();

  json m = manifest_header("eval");
  m["config"] = probe_config_json(options.probe);
  m["seeds"] = {{"split", options.probe.seed}};
  json inputs;
  inputs["embedding"] = digest(options.embedding);
  if (options.ids) inputs["ids"] = digest(*options.ids);
  inputs["pairs"] = digest(options.pairs);
  if (options.test_pairs) inputs["test_pairs"] = digest(*options.test_pairs);
  m["inputs"] = inputs;
  m["outputs"] = outputs_json({text_path, json_path, weights_path});
  m["timings_seconds"] = timings_json(timings);
  write_text_file(manifest_path, m.dump(2) + "\n");
  return result;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line needs at least two points");
  const double count = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    mx += x[t];
    my += y[t];
  }
  mx /= count;
  my /= count;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    sxx += (x[t] - mx) * (x[t] - mx);
    sxy += (x[t] - mx) * (y[t] - my);
    syy += (y[t] - my) * (y[t] - my);
  }
  LinearFit fit;
  fit.slope = sxx == 0.0 ? 0.0 : sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double r = y[t] - (fit.slope * x[t] + fit.intercept);
    ss_res += r * r;
  }
  fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - ss_res / syy;
  return fit;
}

namespace {

double seconds_per_iteration(const SparseGraph& graph, const PairSet& pairs, std::size_t k,
                             const BenchOptions& options) {
  FuseConfig config;
  config.k = k;
  config.seed = options.seed;
  config.threads = options.threads;
  FuseSolver solver(graph, pairs, config);
  solver.step();  // warm-up
  // Median of single-step times: robust to bursts of interference.
  std::vector<double> times;
  times.reserve(options.repeats * options.iterations);
  for (std::size_t t = 0; t < options.repeats * options.iterations; ++t) {
    Stopwatch clock;
    solver.step();
    times.push_back(clock.lap());
  }
  const auto mid = times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2);
  std::nth_element(times.begin(), mid, times.end());
  return *mid;
}

}  // namespace

BenchResult cmd_bench(const BenchOptions& options) {
  if (options.n < 2 || options.m == 0 || options.pairs == 0 || options.k == 0 ||
      options.iterations == 0 || options.repeats == 0)
    throw UsageError("bench sweep parameters must be positive");
  Stopwatch clock;
  PhaseTimings timings;
  std::map<std::size_t, SparseGraph> graphs;
  std::map<std::size_t, PairSet> pair_sets;
  auto graph_for = [&](std::size_t m) -> const SparseGraph& {
    auto it = graphs.find(m);
    if (it == graphs.end()) it = graphs.emplace(m, erdos_renyi_gnm(options.n, m, options.seed)).first;
    return it->second;
  };
  auto pairs_for = [&](std::size_t p) -> const PairSet& {
    auto it = pair_sets.find(p);
    if (it == pair_sets.end())
      it = pair_sets.emplace(p, random_pairs(options.n, p, options.seed + 1)).first;
    return it->second;
  };

  struct Point {
    std::size_t m, p, k;
  };
  std::vector<Point> points{{options.m, options.pairs, options.k}};
  for (std::size_t s = 1; s <= options.doublings; ++s) {
    const std::size_t f = std::size_t{1} << s;
    points.push_back({options.m * f, options.pairs, options.k});
    points.push_back({options.m, options.pairs * f, options.k});
    points.push_back({options.m, options.pairs, options.k * f});
  }

  BenchResult result;
  std::vector<double> x, y;
  for (const auto& pt : points) {
    const SparseGraph& g = graph_for(pt.m);
    const PairSet& p = pairs_for(pt.p);
    const double sec = seconds_per_iteration(g, p, pt.k, options);
    result.rows.push_back({options.n, g.m(), p.size(), pt.k, sec});
    x.push_back(static_cast<double>((2 * g.m() + p.size()) * pt.k));
    y.push_back(sec);
  }
  const LinearFit fit = fit_line(x, y);
  result.slope = fit.slope;
  result.intercept = fit.intercept;
  result.r_squared = fit.r_squared;
  timings.fit = clock.lap();

  const fs::path manifest_path = with_suffix(options.out, ".manifest.json");
  const fs::path csv_path = with_suffix(options.out, ".csv");
  ensure_parent(options.out);
  std::string csv = "n,m,P,k,seconds_per_iteration\n";
  for (const auto& r : result.rows) {
    csv += std::to_string(r.n) + "," + std::to_string(r.m) + "," + std::to_string(r.pairs) + "," +
           std::to_string(r.k) + "," + shortest(r.seconds_per_iteration) + "\n";
  }
  write_text_file(csv_path, csv);
  timings.write = clock.lap();

  json m = manifest_header("bench");
  m["config"] = {{"n", options.n},
                 {"m", options.m},
                 {"pairs", options.pairs},
                 {"k", options.k},
                 {"doublings", options.doublings},
                 {"iterations", options.iterations},
                 {"repeats", options.repeats},
                 {"seed", options.seed},
                 {"threads", options.threads}};
  m["seeds"] = {{"graphs", options.seed}, {"pairs", options.seed + 1}, {"init", options.seed}};
  m["fit"] = {{"x", "(2m + P) k"},
              {"slope", result.slope},
              {"intercept", result.intercept},
              {"r_squared", result.r_squared}};
  m["outputs"] = outputs_json({csv_path});
  m["timings_seconds"] = timings_json(timings);
  write_text_file(manifest_path, m.dump(2) + "\n");
  return result;
}

std::string to_key_value(const BenchResult& r) {
  std::ostringstream out;
  out << "points = " << r.rows.size() << '\n'
      << "slope = " << shortest(r.slope) << '\n'
      << "intercept = " << shortest(r.intercept) << '\n'
      << "r_squared = " << shortest(r.r_squared) << '\n';
  return out.str();
}

}  // namespace cfuse::tools
