#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace cfuse {

// Row blocks used for reductions. Partial sums are formed per block and
// combined in block order, so a reduction gives the same bits for any
// thread count.
inline constexpr std::size_t kReduceBlock = 2048;

inline std::size_t block_count(std::size_t n) { return (n + kReduceBlock - 1) / kReduceBlock; }

/// Resolves a requested thread count: positive values are taken as-is,
/// anything else means "all available cores".
int resolve_threads(int requested);

/// Runs body(i) for i in [0, n) with a static partition over `threads`.
template <typename Body>
void parallel_for(std::size_t n, int threads, Body&& body) {
  const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1)
  for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

/// Sum over rows of a per-row vector contribution of width `width`.
/// row_term(i, acc) adds row i's contribution into acc (length width).
template <typename RowTerm>
std::vector<double> blocked_row_sum(std::size_t n, std::size_t width, int threads,
                                    RowTerm&& row_term) {
  const std::size_t blocks = block_count(n);
  std::vector<double> partial(blocks * width, 0.0);
  parallel_for(blocks, threads, [&](std::size_t b) {
    double* acc = partial.data() + b * width;
    const std::size_t end = std::min(n, (b + 1) * kReduceBlock);
    for (std::size_t i = b * kReduceBlock; i < end; ++i) row_term(i, acc);
  });
  std::vector<double> total(width, 0.0);
  for (std::size_t b = 0; b < blocks; ++b)
    for (std::size_t c = 0; c < width; ++c) total[c] += partial[b * width + c];
  return total;
}

/// Scalar variant of blocked_row_sum.
template <typename RowValue>
double blocked_sum(std::size_t n, int threads, RowValue&& row_value) {
  auto total = blocked_row_sum(n, 1, threads,
                               [&](std::size_t i, double* acc) { acc[0] += row_value(i); });
  return total[0];
}

}  // namespace cfuse
