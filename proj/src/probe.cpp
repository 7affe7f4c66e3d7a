#include "cfuse/probe.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include "cfuse/rng.hpp"
#include "text_util.hpp"

namespace cfuse {

void ProbeConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ProbeError("learning rate must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ProbeError("train fraction must lie in (0, 1)");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ProbeError("threshold must lie in (0, 1)");
}

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void check_node(const Matrix& s, NodeId v) {
  if (v >= s.rows()) {
    throw ProbeError("node " + std::to_string(v) + " outside embedding with " +
                     std::to_string(s.rows()) + " rows");
  }
}

double logit(const Matrix& s, const ProbeWeights& weights, NodeId i, NodeId j) {
  const std::size_t k = s.cols();
  auto si = s.row(i);
  auto sj = s.row(j);
  double z = weights.bias;
  for (std::size_t c = 0; c < k; ++c) z += weights.w[c] * si[c] + weights.w[k + c] * sj[c];
  return z;
}

void check_shapes(const Matrix& s, const PairSet& pairs, const ProbeWeights& weights) {
  if (weights.w.size() != 2 * s.cols()) throw DimensionError("probe weights do not match k");
  require_rows(s.rows(), pairs.n(), "probe");
}

}  // namespace

std::vector<double> pair_features(const Matrix& s, NodeId i, NodeId j) {
  check_node(s, i);
  check_node(s, j);
  std::vector<double> h(2 * s.cols());
  std::copy(s.row(i).begin(), s.row(i).end(), h.begin());
  std::copy(s.row(j).begin(), s.row(j).end(), h.begin() + static_cast<std::ptrdiff_t>(s.cols()));
  return h;
}

double bce_loss(const Matrix& s, const PairSet& pairs, const ProbeWeights& weights) {
  check_shapes(s, pairs, weights);
  double loss = 0.0;
  for (const auto& p : pairs.pairs()) {
    const double z = logit(s, weights, p.i, p.j);
    // -[y log sigma(z) + (1-y) log(1 - sigma(z))] = softplus(z) - y z
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += softplus - (p.sign > 0 ? z : 0.0);
  }
  return loss;
}

std::vector<double> bce_gradient(const Matrix& s, const PairSet& pairs,
                                 const ProbeWeights& weights) {
  check_shapes(s, pairs, weights);
  const std::size_t k = s.cols();
  std::vector<double> grad(2 * k + 1, 0.0);
  for (const auto& p : pairs.pairs()) {
    const double r = sigmoid(logit(s, weights, p.i, p.j)) - (p.sign > 0 ? 1.0 : 0.0);
    auto si = s.row(p.i);
    auto sj = s.row(p.j);
    for (std::size_t c = 0; c < k; ++c) {
      grad[c] += r * si[c];
      grad[k + c] += r * sj[c];
    }
    grad[2 * k] += r;
  }
  return grad;
}

ProbeWeights train_probe(const Matrix& s, const PairSet& train, const ProbeConfig& config) {
  config.validate();
  if (train.empty()) throw ProbeError("training split is empty");
  const std::size_t positives = train.positives();
  if (positives == 0 || positives == train.size())
    throw ProbeError("training split contains a single class");
  ProbeWeights weights{std::vector<double>(2 * s.cols(), 0.0), 0.0};
  const std::size_t k2 = 2 * s.cols();
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto grad = bce_gradient(s, train, weights);
    for (std::size_t c = 0; c < k2; ++c) weights.w[c] -= config.learning_rate * grad[c];
    weights.bias -= config.learning_rate * grad[k2];
  }
  return weights;
}

double predict(const Matrix& s, const ProbeWeights& weights, NodeId i, NodeId j, bool symmetric) {
  check_node(s, i);
  check_node(s, j);
  if (weights.w.size() != 2 * s.cols()) throw DimensionError("probe weights do not match k");
  const double forward = sigmoid(logit(s, weights, i, j));
  if (!symmetric) return forward;
  return 0.5 * (forward + sigmoid(logit(s, weights, j, i)));
}

EvalResult score_predictions(std::span<const bool> predicted_positive,
                             std::span<const bool> actual_positive) {
  if (predicted_positive.size() != actual_positive.size())
    throw DimensionError("prediction and label counts differ");
  EvalResult r;
  r.n_test = actual_positive.size();
  std::size_t tp = 0, tn = 0, fp = 0, fn = 0;
  for (std::size_t t = 0; t < actual_positive.size(); ++t) {
    const bool pred = predicted_positive[t];
    const bool truth = actual_positive[t];
    tp += pred && truth;
    tn += !pred && !truth;
    fp += pred && !truth;
    fn += !pred && truth;
  }
  const std::size_t total = actual_positive.size();
  r.accuracy = total == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total);
  auto f1 = [](std::size_t hit, std::size_t false_pos, std::size_t miss) {
    const std::size_t denom = 2 * hit + false_pos + miss;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(hit) / static_cast<double>(denom);
  };
  if (tp + fn == 0) r.warnings.emplace_back("no positive pairs in the test set; F1_pos = 0");
  if (tn + fp == 0) r.warnings.emplace_back("no negative pairs in the test set; F1_neg = 0");
  r.macro_f1 = 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp));
  return r;
}

PairSplit split_pairs(std::size_t count, double train_fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t t = count; t > 1; --t) std::swap(order[t - 1], order[rng.uniform_index(t)]);
  const auto n_train = std::min<std::size_t>(
      count, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(count))));
  PairSplit split;
  split.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  return split;
}

EvalResult evaluate(const Matrix& s, const PairSet& pairs, const ProbeConfig& config,
                    ProbeWeights* trained) {
  config.validate();
  if (pairs.empty()) throw ProbeError("no pairs to evaluate");
  const auto split = split_pairs(pairs.size(), config.train_fraction, config.seed);
  if (split.test.empty()) throw ProbeError("test split is empty");
  return evaluate_split(s, pairs.select(split.train), pairs.select(split.test), config, trained);
}

EvalResult evaluate_split(const Matrix& s, const PairSet& train, const PairSet& test,
                          const ProbeConfig& config, ProbeWeights* trained) {
  if (test.empty()) throw ProbeError("test split is empty");
  const ProbeWeights weights = train_probe(s, train, config);
  auto predicted = std::make_unique<bool[]>(test.size());
  auto actual = std::make_unique<bool[]>(test.size());
  for (std::size_t t = 0; t < test.size(); ++t) {
    const auto& p = test[t];
    predicted[t] = predict(s, weights, p.i, p.j, config.symmetric_features) >= config.threshold;
    actual[t] = p.sign > 0;
  }
  EvalResult r = score_predictions({predicted.get(), test.size()}, {actual.get(), test.size()});
  r.n_train = train.size();
  if (trained) *trained = weights;
  return r;
}

void write_probe_weights(const std::filesystem::path& path, const ProbeWeights& weights) {
  std::ofstream out(path);
  if (!out) throw ProbeError("cannot write " + path.string());
  std::string line;
  for (double v : weights.w) {
    line.clear();
    detail::append_number(line, v);
    out << line << '\n';
  }
  line.clear();
  detail::append_number(line, weights.bias);
  out << line << '\n';
}

ProbeWeights read_probe_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ProbeError("cannot read " + path.string());
  std::vector<double> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    for (auto f : fields) values.push_back(detail::parse_f64(f, path.string(), lineno));
  }
  if (values.size() < 3 || values.size() % 2 != 1)
    throw ProbeError("weights file must hold 2k + 1 values");
  ProbeWeights w;
  w.bias = values.back();
  values.pop_back();
  w.w = std::move(values);
  return w;
}

}  // namespace cfuse
