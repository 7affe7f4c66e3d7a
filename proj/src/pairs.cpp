#include "cfuse/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "cfuse/parallel.hpp"
#include "cfuse/rng.hpp"
#include "text_util.hpp"

namespace cfuse {
namespace {

std::uint64_t unordered_key(NodeId a, NodeId b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

void check_pair(const LabeledPair& p, std::size_t n) {
  if (p.i >= n || p.j >= n) {
    throw PairError("pair (" + std::to_string(p.i) + ", " + std::to_string(p.j) +
                    ") references a node outside [0, " + std::to_string(n) + ")");
  }
  if (p.i == p.j) throw PairError("self-pair on node " + std::to_string(p.i));
  if (p.sign != 1 && p.sign != -1) throw PairError("pair sign must be +1 or -1");
}

}  // namespace

PairSet::PairSet(std::size_t n, std::vector<LabeledPair> pairs)
    : n_(n), pairs_(std::move(pairs)), degrees_(n, 0.0) {
  std::unordered_map<std::uint64_t, std::int8_t> seen;
  seen.reserve(pairs_.size() * 2);
  std::vector<std::size_t> count(n, 0);
  for (const auto& p : pairs_) {
    check_pair(p, n);
    auto [it, inserted] = seen.emplace(unordered_key(p.i, p.j), p.sign);
    if (!inserted) {
      throw PairError((it->second == p.sign ? "duplicate pair (" : "conflicting labels on pair (") +
                      std::to_string(p.i) + ", " + std::to_string(p.j) + ")");
    }
    ++count[p.i];
    ++count[p.j];
  }
  for (std::size_t v = 0; v < n; ++v) degrees_[v] = static_cast<double>(count[v]);

  offsets_.assign(n + 1, 0);
  for (std::size_t v = 0; v < n; ++v) offsets_[v + 1] = offsets_[v] + count[v];
  partner_.resize(offsets_[n]);
  weight_.resize(offsets_[n]);
  std::vector<std::size_t> cursor(offsets_.begin(), offsets_.end() - 1);
  for (const auto& p : pairs_) {
    const double w = static_cast<double>(p.sign) / std::sqrt(degrees_[p.i] * degrees_[p.j]);
    partner_[cursor[p.i]] = p.j;
    weight_[cursor[p.i]++] = w;
    partner_[cursor[p.j]] = p.i;
    weight_[cursor[p.j]++] = w;
  }
}

PairSet PairSet::collapse(std::size_t n, std::span<const LabeledPair> pairs,
                          std::size_t* collapsed) {
  std::unordered_map<std::uint64_t, std::int8_t> seen;
  seen.reserve(pairs.size() * 2);
  std::vector<LabeledPair> kept;
  kept.reserve(pairs.size());
  std::size_t repeats = 0;
  for (const auto& p : pairs) {
    check_pair(p, n);
    auto [it, inserted] = seen.emplace(unordered_key(p.i, p.j), p.sign);
    if (inserted) {
      kept.push_back(p);
    } else if (it->second == p.sign) {
      ++repeats;
    } else {
      throw PairError("conflicting labels on pair (" + std::to_string(p.i) + ", " +
                      std::to_string(p.j) + ")");
    }
  }
  if (collapsed != nullptr) *collapsed = repeats;
  return PairSet(n, std::move(kept));
}

std::size_t PairSet::positives() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(pairs_.begin(), pairs_.end(), [](const LabeledPair& p) { return p.sign > 0; }));
}

PairSet PairSet::select(std::span<const std::size_t> indices) const {
  std::vector<LabeledPair> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) out.push_back(pairs_.at(idx));
  return PairSet(n_, std::move(out));
}

NodeLabels NodeLabels::from_raw(std::span<const std::uint64_t> raw) {
  std::vector<std::uint64_t> distinct(raw.begin(), raw.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  NodeLabels out;
  out.classes = static_cast<std::uint32_t>(distinct.size());
  out.labels.reserve(raw.size());
  for (auto c : raw) {
    out.labels.push_back(static_cast<std::uint32_t>(
        std::lower_bound(distinct.begin(), distinct.end(), c) - distinct.begin()));
  }
  return out;
}

namespace {

// Picks an index with probability proportional to weights[index].
std::size_t pick_weighted(Rng& rng, std::span<const std::uint64_t> cumulative) {
  const std::uint64_t r = rng.uniform_index(cumulative.back());
  return static_cast<std::size_t>(
      std::upper_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
}

}  // namespace

GeneratedPairs generate_pairs(const NodeLabels& labels, std::size_t target, std::uint64_t seed) {
  if (target < 2) throw PairError("pair target must be at least 2");
  const std::size_t n = labels.labels.size();
  const std::size_t classes = labels.classes;

  // Nodes grouped by class; `start[c]` is the offset of class c in `order`.
  std::vector<std::size_t> size(classes, 0);
  for (auto c : labels.labels) {
    if (c >= classes) throw PairError("label outside [0, classes)");
    ++size[c];
  }
  std::vector<std::size_t> start(classes + 1, 0);
  for (std::size_t c = 0; c < classes; ++c) start[c + 1] = start[c] + size[c];
  std::vector<NodeId> order(n);
  {
    std::vector<std::size_t> cursor(start.begin(), start.end() - 1);
    for (std::size_t v = 0; v < n; ++v) order[cursor[labels.labels[v]]++] = static_cast<NodeId>(v);
  }

  // Ordered same-class pairs: class c carries weight s_c (s_c - 1).
  // Ordered cross-class pairs: class c carries weight s_c (n - s_c).
  // Each unordered pair is reached by exactly two ordered draws, so both
  // samplers are uniform over unordered pairs.
  std::vector<std::uint64_t> pos_cum(classes), neg_cum(classes);
  std::uint64_t pos_total = 0, neg_total = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    pos_total += static_cast<std::uint64_t>(size[c]) * (size[c] > 0 ? size[c] - 1 : 0);
    neg_total += static_cast<std::uint64_t>(size[c]) * (n - size[c]);
    pos_cum[c] = pos_total;
    neg_cum[c] = neg_total;
  }
  if (pos_total == 0) throw PairError("no positive pair possible: every class is a singleton");
  if (neg_total == 0) throw PairError("no negative pair possible: only one class present");

  GeneratedPairs out;
  out.positives_requested = target / 2;
  out.negatives_requested = target - target / 2;

  Rng rng(seed);
  std::vector<LabeledPair> draws;
  draws.reserve(target);
  for (std::size_t t = 0; t < out.positives_requested; ++t) {
    const std::size_t c = pick_weighted(rng, pos_cum);
    const std::size_t a = rng.uniform_index(size[c]);
    std::size_t b = rng.uniform_index(size[c] - 1);
    if (b >= a) ++b;
    const NodeId u = order[start[c] + a];
    const NodeId v = order[start[c] + b];
    draws.push_back({std::min(u, v), std::max(u, v), 1});
  }
  for (std::size_t t = 0; t < out.negatives_requested; ++t) {
    const std::size_t c = pick_weighted(rng, neg_cum);
    const NodeId u = order[start[c] + rng.uniform_index(size[c])];
    // Index into `order` with class c's block removed.
    std::size_t r = rng.uniform_index(n - size[c]);
    if (r >= start[c]) r += size[c];
    const NodeId v = order[r];
    draws.push_back({std::min(u, v), std::max(u, v), -1});
  }
  out.pairs = PairSet::collapse(n, draws, &out.collapsed);
  return out;
}

PairSet flip_labels(const PairSet& pairs, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw PairError("flip fraction must lie in [0, 1]");
  const std::size_t total = pairs.size();
  const auto flips = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  std::vector<LabeledPair> out(pairs.pairs().begin(), pairs.pairs().end());
  std::vector<std::size_t> index(total);
  std::iota(index.begin(), index.end(), 0);
  Rng rng(seed);
  // Partial Fisher-Yates: the first `flips` slots become a uniform sample.
  for (std::size_t t = 0; t < flips; ++t) {
    const std::size_t pick = t + rng.uniform_index(total - t);
    std::swap(index[t], index[pick]);
    out[index[t]].sign = static_cast<std::int8_t>(-out[index[t]].sign);
  }
  return PairSet(pairs.n(), std::move(out));
}

template <typename T>
Dense<T> apply_contrastive_laplacian(const PairSet& pairs, const Dense<T>& s, int threads) {
  require_rows(s.rows(), pairs.n(), "apply_contrastive_laplacian");
  const std::size_t k = s.cols();
  Dense<T> out(s.rows(), k);
  parallel_for(s.rows(), threads, [&](std::size_t i) {
    auto src = s.row(i);
    auto dst = out.row(i);
    auto partners = pairs.partners(i);
    if (partners.empty()) {
      std::copy(src.begin(), src.end(), dst.begin());
      return;
    }
    auto weights = pairs.weights(i);
    thread_local std::vector<double> acc;
    acc.assign(k, 0.0);
    for (std::size_t p = 0; p < partners.size(); ++p) {
      auto other = s.row(partners[p]);
      for (std::size_t c = 0; c < k; ++c) acc[c] += weights[p] * static_cast<double>(other[c]);
    }
    for (std::size_t c = 0; c < k; ++c) dst[c] = static_cast<T>(static_cast<double>(src[c]) - acc[c]);
  });
  return out;
}

template Matrix apply_contrastive_laplacian(const PairSet&, const Matrix&, int);
template Dense<float> apply_contrastive_laplacian(const PairSet&, const Dense<float>&, int);

double contrastive_quadratic_form(const PairSet& pairs, const Matrix& s, int threads) {
  const Matrix ls = apply_contrastive_laplacian(pairs, s, threads);
  return blocked_sum(s.rows(), threads, [&](std::size_t i) {
    auto a = s.row(i);
    auto b = ls.row(i);
    double acc = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) acc += a[c] * b[c];
    return acc;
  });
}

std::vector<ExternalPair> read_pairs_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PairError("cannot read pairs file " + path.string());
  const std::string source = path.string();
  std::vector<ExternalPair> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() != 3) throw ParseError(source, lineno, "expected columns i, j, y");
    const long long y = detail::parse_i64(fields[2], source, lineno);
    if (y != 1 && y != -1) throw ParseError(source, lineno, "y must be +1 or -1");
    out.push_back({detail::parse_u64(fields[0], source, lineno),
                   detail::parse_u64(fields[1], source, lineno), static_cast<std::int8_t>(y)});
  }
  return out;
}

void write_pairs_file(const std::filesystem::path& path, std::span<const ExternalPair> pairs,
                      const std::string& manifest_name) {
  std::ofstream out(path);
  if (!out) throw PairError("cannot write " + path.string());
  if (!manifest_name.empty()) out << "# manifest: " << manifest_name << '\n';
  out << "# i\tj\ty\n";
  for (const auto& p : pairs) out << p.i << '\t' << p.j << '\t' << (p.sign > 0 ? "+1" : "-1") << '\n';
  if (!out) throw PairError("write failed: " + path.string());
}

LabelsFile read_labels_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PairError("cannot read labels file " + path.string());
  const std::string source = path.string();
  std::vector<std::pair<ExternalId, std::uint64_t>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() != 2) throw ParseError(source, lineno, "expected columns node_id, class_id");
    rows.emplace_back(detail::parse_u64(fields[0], source, lineno),
                      detail::parse_u64(fields[1], source, lineno));
  }
  std::sort(rows.begin(), rows.end());
  LabelsFile out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (r > 0 && rows[r].first == rows[r - 1].first) {
      throw PairError("node " + std::to_string(rows[r].first) + " labelled twice in " + source);
    }
    out.nodes.push_back(rows[r].first);
    out.classes.push_back(rows[r].second);
  }
  return out;
}

}  // namespace cfuse
