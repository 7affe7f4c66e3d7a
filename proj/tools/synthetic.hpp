#pragma once

#include <cstddef>
#include <cstdint>

#include "cfuse/graph.hpp"
#include "cfuse/pairs.hpp"

namespace cfuse::tools {

/// Uniform simple graph with exactly m edges over n nodes (G(n, m)).
SparseGraph erdos_renyi_gnm(std::size_t n, std::size_t m, std::uint64_t seed);

/// `count` distinct unordered pairs with independent fair-coin signs.
PairSet random_pairs(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace cfuse::tools
