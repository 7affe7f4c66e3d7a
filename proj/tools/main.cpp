#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <system_error>

#include "CLI11.hpp"

#include "cfuse/graph.hpp"
#include "cfuse/io.hpp"
#include "cfuse/pairs.hpp"
#include "cfuse/parallel.hpp"
#include "commands.hpp"

namespace {

using namespace cfuse;
using namespace cfuse::tools;

// Single line on stderr: "error kind=<kind> message=<json string>".
int fail(const std::string& kind, const std::string& message, int code) {
  std::string quoted = "\"";
  for (char c : message) {
    if (c == '"' || c == '\\') {
      quoted.push_back('\\');
      quoted.push_back(c);
    } else if (c == '\n') {
      quoted += "\\n";
    } else {
      quoted.push_back(c);
    }
  }
  quoted.push_back('"');
  std::cerr << "error kind=" << kind << " message=" << quoted << '\n';
  return code;
}

void add_threads(CLI::App* cmd, int& threads) {
  cmd->add_option("--threads", threads, "Worker threads; 0 = all cores")
      ->envname("FUSE_THREADS")
      ->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive modularity embedding toolkit"};
  app.set_version_flag("--version", software_version());
  app.set_config("--config", "", "TOML-style config file; keys mirror flag names");
  app.require_subcommand(1);

  int threads = 0;

  PairsOptions pairs_opts;
  auto* pairs_cmd = app.add_subcommand("pairs", "Sample balanced labelled pairs from node labels");
  pairs_cmd->add_option("--labels", pairs_opts.labels, "Labels TSV (node_id class_id)")
      ->required();
  pairs_cmd->add_option("--count", pairs_opts.count, "Pairs to draw before collapsing")
      ->check(CLI::PositiveNumber);
  pairs_cmd->add_option("--noise", pairs_opts.noise, "Fraction of returned pairs to flip");
  pairs_cmd->add_option("--seed", pairs_opts.seed, "Sampling seed (flips use seed + 1)");
  pairs_cmd->add_option("--out", pairs_opts.out, "Output pairs TSV")->required();

  EmbedOptions embed_opts;
  std::optional<std::string> embed_pairs;
  std::string gradient_mode = "approximate";
  std::string precision = "f64";
  auto* embed_cmd = app.add_subcommand("embed", "Fit an embedding");
  embed_cmd->add_option("--edges", embed_opts.edges, "Edge list")->required();
  embed_cmd->add_option("--pairs", embed_pairs, "Pairs TSV; required when lambda-scaled > 0");
  embed_cmd->add_option("--out", embed_opts.out, "Output path prefix")->required();
  embed_cmd->add_option("--k", embed_opts.config.k, "Embedding width")->check(CLI::PositiveNumber);
  embed_cmd->add_option("--iterations", embed_opts.config.iterations, "Ascent steps T");
  embed_cmd->add_option("--eta-scaled", embed_opts.config.eta_scaled, "Scaled step size");
  embed_cmd->add_option("--lambda-scaled", embed_opts.config.lambda_scaled,
                        "Scaled contrastive weight; 0 disables the contrastive term");
  embed_cmd->add_option("--gradient-mode", gradient_mode, "approximate | exact")
      ->check(CLI::IsMember({"approximate", "approx", "exact"}));
  embed_cmd->add_option("--precision", precision, "f64 | f32")
      ->check(CLI::IsMember({"f64", "f32"}));
  embed_cmd->add_option("--seed", embed_opts.config.seed, "Initialization seed");
  add_threads(embed_cmd, threads);

  DiagnoseOptions diag_opts;
  std::optional<std::string> diag_pairs;
  auto* diag_cmd = app.add_subcommand("diagnose", "Zagreb, alignment and Lipschitz diagnostics");
  diag_cmd->add_option("--edges", diag_opts.edges, "Edge list")->required();
  diag_cmd->add_option("--pairs", diag_pairs, "Pairs TSV (with --lambda)");
  diag_cmd->add_option("--lambda", diag_opts.lambda, "Contrastive weight for the Lipschitz bound");
  diag_cmd->add_option("--seed", diag_opts.seed, "Seed for the random init and power iteration");
  diag_cmd->add_option("--k", diag_opts.k, "Width of the random init for alignment")
      ->check(CLI::PositiveNumber);
  diag_cmd->add_option("--lipschitz-iterations", diag_opts.lipschitz_iterations,
                       "Power-iteration cap")
      ->check(CLI::PositiveNumber);
  diag_cmd->add_option("--lipschitz-tolerance", diag_opts.lipschitz_tolerance,
                       "Relative stopping tolerance");
  diag_cmd->add_option("--spot-samples", diag_opts.spot_samples,
                       "Random (S, S') pairs for the Lipschitz spot check");
  diag_cmd->add_option("--out", diag_opts.out, "Output path prefix")->required();
  add_threads(diag_cmd, threads);

  EvalOptions eval_opts;
  std::optional<std::string> eval_ids, eval_test;
  auto* eval_cmd = app.add_subcommand("eval", "Linear-probe pair classification");
  eval_cmd->add_option("--embedding", eval_opts.embedding, "Embedding (TSV or binary)")
      ->required();
  eval_cmd->add_option("--ids", eval_ids, "Id map for a binary embedding");
  eval_cmd->add_option("--pairs", eval_opts.pairs, "Labelled pairs")->required();
  eval_cmd->add_option("--test-pairs", eval_test,
                       "Separate test pairs; all of --pairs is then used for training");
  eval_cmd->add_option("--epochs", eval_opts.probe.epochs, "Gradient-descent epochs");
  eval_cmd->add_option("--learning-rate", eval_opts.probe.learning_rate, "Step size");
  eval_cmd->add_option("--train-fraction", eval_opts.probe.train_fraction, "Held-out split");
  eval_cmd->add_option("--threshold", eval_opts.probe.threshold, "Decision threshold");
  eval_cmd->add_option("--seed", eval_opts.probe.seed, "Split seed");
  eval_cmd->add_flag("--symmetric", eval_opts.probe.symmetric_features,
                     "Average predictions over both pair orders");
  eval_cmd->add_option("--out", eval_opts.out, "Output path prefix")->required();

  BenchOptions bench_opts;
  auto* bench_cmd = app.add_subcommand("bench", "Per-iteration timing sweep");
  bench_cmd->add_option("--n", bench_opts.n, "Nodes")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--m", bench_opts.m, "Base edge count")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--pairs", bench_opts.pairs, "Base pair count")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--k", bench_opts.k, "Base width")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--doublings", bench_opts.doublings, "Doublings per swept axis");
  bench_cmd->add_option("--iterations", bench_opts.iterations, "Timed steps per repeat; the median step is reported")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--repeats", bench_opts.repeats, "Repeats")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bench_opts.seed, "Graph seed (pairs use seed + 1)");
  bench_cmd->add_option("--out", bench_opts.out, "Output path prefix")->required();
  add_threads(bench_cmd, threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  const int resolved_threads = resolve_threads(threads);
  try {
    if (*pairs_cmd) {
      std::cout << to_key_value(cmd_pairs(pairs_opts));
    } else if (*embed_cmd) {
      if (embed_pairs) embed_opts.pairs = *embed_pairs;
      embed_opts.config.gradient_mode = parse_gradient_mode(gradient_mode);
      embed_opts.config.precision = parse_precision(precision);
      embed_opts.config.threads = resolved_threads;
      std::cout << to_key_value(cmd_embed(embed_opts));
    } else if (*diag_cmd) {
      if (diag_pairs) diag_opts.pairs = *diag_pairs;
      diag_opts.threads = resolved_threads;
      std::cout << to_key_value(cmd_diagnose(diag_opts));
    } else if (*eval_cmd) {
      if (eval_ids) eval_opts.ids = *eval_ids;
      if (eval_test) eval_opts.test_pairs = *eval_test;
      const EvalResult r = cmd_eval(eval_opts);
      std::cout << "accuracy = " << r.accuracy << "\nmacro_f1 = " << r.macro_f1
                << "\nn_train = " << r.n_train << "\nn_test = " << r.n_test << '\n';
      for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    } else if (*bench_cmd) {
      bench_opts.threads = resolved_threads;
      std::cout << to_key_value(cmd_bench(bench_opts));
    }
  } catch (const UsageError& e) {
    return fail("usage", e.what(), 2);
  } catch (const ParseError& e) {
    return fail("parse", e.what(), 1);
  } catch (const FitError& e) {
    return fail("numeric", e.what(), 1);
  } catch (const IoError& e) {
    return fail("io", e.what(), 1);
  } catch (const std::filesystem::filesystem_error& e) {
    return fail("io", e.what(), 1);
  } catch (const std::exception& e) {
    return fail("input", e.what(), 1);
  }
  return 0;
}
