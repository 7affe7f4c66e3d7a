#include "synthetic.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cfuse/rng.hpp"

namespace cfuse::tools {
namespace {

// Rejection sampling of distinct unordered pairs; callers keep the target
// well below n(n-1)/2 so this terminates quickly.
std::vector<std::pair<NodeId, NodeId>> distinct_pairs(std::size_t n, std::size_t count,
                                                      Rng& rng) {
  const std::size_t possible = n * (n - 1) / 2;
  if (n < 2 || count > possible / 2)
    throw std::invalid_argument("requested pair count too large for " + std::to_string(n) +
                                " nodes");
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(count * 2);
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(count);
  while (out.size() < count) {
    auto a = static_cast<NodeId>(rng.uniform_index(n));
    auto b = static_cast<NodeId>(rng.uniform_index(n));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    if (seen.insert((static_cast<std::uint64_t>(a) << 32) | b).second) out.emplace_back(a, b);
  }
  return out;
}

}  // namespace

SparseGraph erdos_renyi_gnm(std::size_t n, std::size_t m, std::uint64_t seed) {
  Rng rng(seed);
  const auto edges = distinct_pairs(n, m, rng);
  return SparseGraph::from_edges(n, edges);
}

PairSet random_pairs(std::size_t n, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  const auto raw = distinct_pairs(n, count, rng);
  std::vector<LabeledPair> pairs;
  pairs.reserve(raw.size());
  for (auto [a, b] : raw)
    pairs.push_back({a, b, static_cast<std::int8_t>(rng.uniform_index(2) == 0 ? 1 : -1)});
  return PairSet(n, std::move(pairs));
}

}  // namespace cfuse::tools
