#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfuse/dense.hpp"
#include "cfuse/pairs.hpp"

namespace cfuse {

class ProbeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ProbeConfig {
  std::size_t epochs = 100;
  double learning_rate = 1e-3;
  double train_fraction = 0.8;
  double threshold = 0.5;
  std::uint64_t seed = 0;
  // Average the predictions for (i, j) and (j, i).
  bool symmetric_features = false;

  void validate() const;
};

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::vector<std::string> warnings;
};

/// Logistic head over [S_i || S_j]: weights (2k) followed by the bias.
struct ProbeWeights {
  std::vector<double> w;
  double bias = 0.0;

  std::size_t k() const noexcept { return w.size() / 2; }
};

/// [S_i || S_j], in that order.
std::vector<double> pair_features(const Matrix& s, NodeId i, NodeId j);

/// Summed binary cross-entropy over the pairs (sign +1 -> 1, -1 -> 0).
double bce_loss(const Matrix& s, const PairSet& pairs, const ProbeWeights& weights);
/// Gradient of bce_loss: 2k weight entries then the bias entry.
std::vector<double> bce_gradient(const Matrix& s, const PairSet& pairs,
                                 const ProbeWeights& weights);

/// Full-batch gradient descent on bce_loss from zero weights.
ProbeWeights train_probe(const Matrix& s, const PairSet& train, const ProbeConfig& config);

/// sigma(w^T h + b), averaged over both orders when symmetric.
double predict(const Matrix& s, const ProbeWeights& weights, NodeId i, NodeId j,
               bool symmetric = false);

/// Accuracy and macro-F1 over {positive, negative} for hard predictions.
EvalResult score_predictions(std::span<const bool> predicted_positive,
                             std::span<const bool> actual_positive);

struct PairSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Seeded shuffle; the first round(train_fraction * size) go to train.
PairSplit split_pairs(std::size_t count, double train_fraction, std::uint64_t seed);

/// Held-out evaluation: split, train on the train part, score the rest.
EvalResult evaluate(const Matrix& s, const PairSet& pairs, const ProbeConfig& config,
                    ProbeWeights* trained = nullptr);

/// Evaluation with an explicit test set (e.g. freshly sampled clean pairs).
EvalResult evaluate_split(const Matrix& s, const PairSet& train, const PairSet& test,
                          const ProbeConfig& config, ProbeWeights* trained = nullptr);

void write_probe_weights(const std::filesystem::path& path, const ProbeWeights& weights);
ProbeWeights read_probe_weights(const std::filesystem::path& path);

}  // namespace cfuse
