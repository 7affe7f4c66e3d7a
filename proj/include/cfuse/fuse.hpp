#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfuse/dense.hpp"
#include "cfuse/graph.hpp"
#include "cfuse/pairs.hpp"

namespace cfuse {

/// approximate: correction d (1^T S) / 2m. exact: correction d (d^T S) / 2m.
enum class GradientMode { approximate, exact };
enum class Precision { f64, f32 };

std::string to_string(GradientMode mode);
std::string to_string(Precision precision);
GradientMode parse_gradient_mode(const std::string& text);
Precision parse_precision(const std::string& text);

struct FuseConfig {
  std::size_t k = 64;
  double eta_scaled = 1e5;
  double lambda_scaled = 0.75;
  std::size_t iterations = 100;
  GradientMode gradient_mode = GradientMode::approximate;
  std::uint64_t seed = 0;
  Precision precision = Precision::f64;
  int threads = 1;

  /// Throws std::invalid_argument if a field is out of range.
  void validate() const;
};

/// Step size and contrastive weight after pair-count and density scaling:
///   p* = max(0.25, 5000 / P), d* = 1 / sqrt(2m / n),
///   eta = eta_scaled p* d*,   lambda = lambda_scaled p* / d*.
struct EffectiveParams {
  double p_star = 1.0;
  double d_star = 1.0;
  double eta = 0.0;
  double lambda = 0.0;
};

EffectiveParams adaptive_params(const FuseConfig& config, std::size_t pair_count,
                                const SparseGraph& graph);

/// n x k embedding with unit-norm rows. Values are held in double; the
/// precision tag records how they were computed and how they are written.
struct EmbeddingMatrix {
  Matrix values;
  Precision precision = Precision::f64;

  std::size_t n() const noexcept { return values.rows(); }
  std::size_t k() const noexcept { return values.cols(); }
  double max_norm_deviation() const;
};

/// Standard-normal rows, normalized. Rows with norm below 1e-12 are redrawn.
EmbeddingMatrix init_embedding(std::size_t n, std::size_t k, std::uint64_t seed);

/// A S - d (w^T S) / 2m with w = 1 (approximate) or w = d (exact). This
/// is the unscaled update direction; no 1/2m or 1/m prefactor.
Matrix structural_gradient(const SparseGraph& graph, const Matrix& s, GradientMode mode,
                           int threads = 1);

/// Tr(S^T M S) - lambda Tr(S^T L_c S), M = A - d 1^T / 2m (approximate) or
/// A - d d^T / 2m (exact). Neither M nor L_c is materialized.
double objective(const SparseGraph& graph, const PairSet& pairs, const Matrix& s, double lambda,
                 GradientMode mode, int threads = 1);

class FitError : public std::runtime_error {
 public:
  FitError(std::size_t iteration, const std::string& what)
      : std::runtime_error("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}
  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

/// Stepwise driver for the projected ascent loop. One `step()` computes
/// G = G_mod - lambda L_c S, sets S <- rownormalize(S + eta G), and
/// records J at the pre-step iterate. Rows whose pre-projection norm
/// falls below 1e-12 keep their previous value.
class FuseSolver {
 public:
  FuseSolver(const SparseGraph& graph, const PairSet& pairs, const FuseConfig& config);
  ~FuseSolver();
  FuseSolver(FuseSolver&&) noexcept;
  FuseSolver& operator=(FuseSolver&&) noexcept;

  const EffectiveParams& params() const noexcept;
  std::size_t iteration() const noexcept;

  void step();
  /// J at the current iterate (costs one extra gradient pass).
  double current_objective();
  /// Objective values recorded so far; entry t is J(S_t).
  const std::vector<double>& trace() const noexcept;
  EmbeddingMatrix embedding() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct FitResult {
  EmbeddingMatrix embedding;
  /// T + 1 entries: J(S_0) .. J(S_T).
  std::vector<double> trace;
  EffectiveParams params;
};

/// Called after each projection with the 1-based iteration index.
using FitObserver = std::function<void(std::size_t, const EmbeddingMatrix&)>;

/// Runs config.iterations steps. lambda_scaled = 0 skips the contrastive
/// term entirely (pairs may then be empty).
FitResult fuse_fit(const SparseGraph& graph, const PairSet& pairs, const FuseConfig& config,
                   const FitObserver& observer = {});

}  // namespace cfuse
