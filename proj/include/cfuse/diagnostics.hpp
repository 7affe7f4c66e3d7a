#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cfuse/dense.hpp"
#include "cfuse/graph.hpp"
#include "cfuse/pairs.hpp"

namespace cfuse {

/// cos(G_true, G_approx) over the full n x k gradients, with
/// G_true = A S - d d^T S / 2m and G_approx = A S - d 1^T S / 2m.
/// Defined as 1 when both gradients vanish.
double gradient_alignment(const SparseGraph& graph, const Matrix& s, int threads = 1);

struct ZagrebReport {
  double zagreb_m2 = 0.0;
  double zagreb_constant = 0.0;  // M2 m / ||d||^4
  double degree_norm = 0.0;
  double m_min = 0.0;            // (1/c) (1 + n/||d||)^2
  bool bound_satisfied = false;  // m >= m_min
  // Rate terms of the alignment bound, reported without a constant.
  double rate_inv_sqrt_m = 0.0;       // 1/sqrt(m)
  double rate_degree_spread = 0.0;    // n / (||d|| sqrt(m))
};

ZagrebReport zagreb_report(const SparseGraph& graph);

/// M X with M = (A - d d^T / 2m) - lambda L_c, applied without forming M.
Matrix apply_lipschitz_operator(const SparseGraph& graph, const PairSet& pairs, double lambda,
                                const Matrix& x, int threads = 1);

struct LipschitzEstimate {
  double value = 0.0;  // 2 sigma_max(M)
  std::size_t iterations = 0;
  bool converged = false;
};

/// Power iteration on M^2. Stops when successive Rayleigh quotients differ
/// by less than tol (relative); otherwise returns the last iterate with
/// converged = false.
LipschitzEstimate lipschitz_estimate(const SparseGraph& graph, const PairSet& pairs, double lambda,
                                     std::size_t max_iterations = 1000, double tol = 1e-6,
                                     std::uint64_t seed = 0);

/// Largest ||2 M S - 2 M S'||_F / (L ||S - S'||_F) over `samples` random
/// unit-row pairs (S, S') of width k. The inequality holds when <= 1.
double lipschitz_spot_ratio(const SparseGraph& graph, const PairSet& pairs, double lambda,
                            double lipschitz, std::size_t samples, std::size_t k,
                            std::uint64_t seed, int threads = 1);

struct DiagnosticsReport {
  std::size_t n = 0;
  std::size_t m = 0;
  ZagrebReport zagreb;
  std::optional<double> cosine_alignment;
  std::optional<std::uint64_t> alignment_seed;
  std::optional<std::size_t> alignment_k;
  std::optional<double> lambda;
  std::optional<LipschitzEstimate> lipschitz;
  std::optional<double> lipschitz_spot_ratio;
  std::size_t lipschitz_spot_samples = 0;
};

/// Flat "key = value" lines.
std::string to_key_value(const DiagnosticsReport& report);
/// One JSON object; field names match the key-value form.
std::string to_json(const DiagnosticsReport& report);

}  // namespace cfuse
