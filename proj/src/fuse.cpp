#include "cfuse/fuse.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

#include "cfuse/parallel.hpp"
#include "cfuse/rng.hpp"

namespace cfuse {

std::string to_string(GradientMode mode) {
  return mode == GradientMode::exact ? "exact" : "approximate";
}

std::string to_string(Precision precision) { return precision == Precision::f32 ? "f32" : "f64"; }

GradientMode parse_gradient_mode(const std::string& text) {
  if (text == "approximate" || text == "approx") return GradientMode::approximate;
  if (text == "exact") return GradientMode::exact;
  throw std::invalid_argument("unknown gradient mode '" + text + "'");
}

Precision parse_precision(const std::string& text) {
  if (text == "f64") return Precision::f64;
  if (text == "f32") return Precision::f32;
  throw std::invalid_argument("unknown precision '" + text + "'");
}

void FuseConfig::validate() const {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (!(eta_scaled > 0.0) || !std::isfinite(eta_scaled))
    throw std::invalid_argument("eta_scaled must be positive");
  if (!(lambda_scaled >= 0.0) || !std::isfinite(lambda_scaled))
    throw std::invalid_argument("lambda_scaled must be nonnegative");
}

EffectiveParams adaptive_params(const FuseConfig& config, std::size_t pair_count,
                                const SparseGraph& graph) {
  if (pair_count == 0) throw std::invalid_argument("adaptive_params: pair count must be >= 1");
  if (graph.m() == 0) throw std::invalid_argument("adaptive_params: graph has no edges");
  EffectiveParams p;
  p.p_star = std::max(0.25, 5000.0 / static_cast<double>(pair_count));
  p.d_star = 1.0 / std::sqrt(graph.average_degree());
  p.eta = config.eta_scaled * p.p_star * p.d_star;
  p.lambda = config.lambda_scaled * p.p_star / p.d_star;
  return p;
}

double EmbeddingMatrix::max_norm_deviation() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < values.rows(); ++i) {
    double sq = 0.0;
    for (double v : values.row(i)) sq += v * v;
    worst = std::max(worst, std::abs(std::sqrt(sq) - 1.0));
  }
  return worst;
}

EmbeddingMatrix init_embedding(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (n == 0 || k == 0) throw std::invalid_argument("init_embedding: n and k must be positive");
  EmbeddingMatrix out{Matrix(n, k), Precision::f64};
  Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.values.row(i);
    double norm = 0.0;
    do {
      double sq = 0.0;
      for (auto& v : row) {
        v = rng.normal();
        sq += v * v;
      }
      norm = std::sqrt(sq);
    } while (norm < 1e-12);
    for (auto& v : row) v /= norm;
  }
  return out;
}

namespace {

// Column sums of S weighted by 1 and by d, laid out [1^T S | d^T S].
template <typename T>
std::vector<double> weighted_column_sums(const SparseGraph& graph, const Dense<T>& s,
                                         int threads) {
  const std::size_t k = s.cols();
  auto d = graph.degrees();
  return blocked_row_sum(s.rows(), 2 * k, threads, [&](std::size_t i, double* acc) {
    auto row = s.row(i);
    for (std::size_t c = 0; c < k; ++c) {
      const auto v = static_cast<double>(row[c]);
      acc[c] += v;
      acc[k + c] += d[i] * v;
    }
  });
}

}  // namespace

Matrix structural_gradient(const SparseGraph& graph, const Matrix& s, GradientMode mode,
                           int threads) {
  require_rows(s.rows(), graph.n(), "structural_gradient");
  const std::size_t k = s.cols();
  const double two_m = 2.0 * static_cast<double>(graph.m());
  const auto sums = weighted_column_sums(graph, s, threads);
  const double* w = sums.data() + (mode == GradientMode::exact ? k : 0);
  auto d = graph.degrees();
  Matrix g = spmv(graph, s, threads);
  parallel_for(graph.n(), threads, [&](std::size_t i) {
    auto row = g.row(i);
    for (std::size_t c = 0; c < k; ++c) row[c] -= d[i] * w[c] / two_m;
  });
  return g;
}

double objective(const SparseGraph& graph, const PairSet& pairs, const Matrix& s, double lambda,
                 GradientMode mode, int threads) {
  require_rows(s.rows(), graph.n(), "objective");
  const std::size_t k = s.cols();
  const double two_m = 2.0 * static_cast<double>(graph.m());
  const auto sums = weighted_column_sums(graph, s, threads);
  const Matrix as = spmv(graph, s, threads);
  const double adjacency_term = blocked_sum(s.rows(), threads, [&](std::size_t i) {
    auto a = s.row(i);
    auto b = as.row(i);
    double acc = 0.0;
    for (std::size_t c = 0; c < k; ++c) acc += a[c] * b[c];
    return acc;
  });
  // Tr(S^T d w^T S) = <d^T S, w^T S>
  const double* w = sums.data() + (mode == GradientMode::exact ? k : 0);
  double correction = 0.0;
  for (std::size_t c = 0; c < k; ++c) correction += sums[k + c] * w[c];
  double value = adjacency_term - correction / two_m;
  if (lambda != 0.0) {
    require_rows(s.rows(), pairs.n(), "objective");
    value -= lambda * contrastive_quadratic_form(pairs, s, threads);
  }
  return value;
}

namespace {

template <typename T>
struct Kernel {
  const SparseGraph* graph;
  const PairSet* pairs;
  GradientMode mode;
  int threads;
  double eta;
  double lambda;
  Dense<T> s;
  Dense<T> next;
  std::vector<double> sums;  // [1^T S | d^T S] for the current s

  Kernel(const SparseGraph& g, const PairSet& p, const FuseConfig& config,
         const EffectiveParams& params, const Matrix& init)
      : graph(&g),
        pairs(&p),
        mode(config.gradient_mode),
        threads(config.threads),
        eta(params.eta),
        lambda(config.lambda_scaled == 0.0 ? 0.0 : params.lambda),
        s(convert<T>(init)),
        next(init.rows(), init.cols()) {
    sums = weighted_column_sums(*graph, s, threads);
  }

  // One pass over rows. With `update` set, also writes the projected step
  // into `next`. Returns J at the current s; sets *non_finite if any
  // updated row is not finite.
  double sweep(bool update, bool* non_finite) {
    const std::size_t n = s.rows();
    const std::size_t k = s.cols();
    const double two_m = 2.0 * static_cast<double>(graph->m());
    auto d = graph->degrees();
    const double* w = sums.data() + (mode == GradientMode::exact ? k : 0);
    const bool contrastive = lambda != 0.0;
    const std::size_t blocks = block_count(n);
    // Per block: [adjacency quad, contrastive quad, non-finite flag]
    std::vector<double> partial(blocks * 3, 0.0);

    parallel_for(blocks, threads, [&](std::size_t b) {
      std::vector<double> as(k), ls(k), step(k);
      double* acc = partial.data() + 3 * b;
      const std::size_t end = std::min(n, (b + 1) * kReduceBlock);
      for (std::size_t i = b * kReduceBlock; i < end; ++i) {
        auto si = s.row(i);
        std::fill(as.begin(), as.end(), 0.0);
        for (NodeId j : graph->neighbors(i)) {
          auto sj = s.row(j);
          for (std::size_t c = 0; c < k; ++c) as[c] += static_cast<double>(sj[c]);
        }
        double quad_a = 0.0;
        for (std::size_t c = 0; c < k; ++c) quad_a += static_cast<double>(si[c]) * as[c];
        acc[0] += quad_a;

        if (contrastive) {
          std::fill(ls.begin(), ls.end(), 0.0);
          auto partners = pairs->partners(i);
          auto weights = pairs->weights(i);
          for (std::size_t p = 0; p < partners.size(); ++p) {
            auto sj = s.row(partners[p]);
            for (std::size_t c = 0; c < k; ++c) ls[c] += weights[p] * static_cast<double>(sj[c]);
          }
          double quad_c = 0.0;
          for (std::size_t c = 0; c < k; ++c) {
            ls[c] = static_cast<double>(si[c]) - ls[c];
            quad_c += static_cast<double>(si[c]) * ls[c];
          }
          acc[1] += quad_c;
        }
        if (!update) continue;

        double sq = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
          double g = as[c] - d[i] * w[c] / two_m;
          if (contrastive) g -= lambda * ls[c];
          step[c] = static_cast<double>(si[c]) + eta * g;
          sq += step[c] * step[c];
        }
        const double norm = std::sqrt(sq);
        auto out = next.row(i);
        if (!std::isfinite(norm)) {
          acc[2] = 1.0;
          std::copy(si.begin(), si.end(), out.begin());
        } else if (norm < 1e-12) {
          std::copy(si.begin(), si.end(), out.begin());
        } else {
          for (std::size_t c = 0; c < k; ++c) out[c] = static_cast<T>(step[c] / norm);
        }
      }
    });

    double quad_a = 0.0, quad_c = 0.0;
    bool bad = false;
    for (std::size_t b = 0; b < blocks; ++b) {
      quad_a += partial[3 * b];
      quad_c += partial[3 * b + 1];
      bad = bad || partial[3 * b + 2] != 0.0;
    }
    if (non_finite != nullptr) *non_finite = bad;
    double correction = 0.0;
    for (std::size_t c = 0; c < k; ++c) correction += sums[k + c] * w[c];
    return quad_a - correction / two_m - lambda * quad_c;
  }

  double step(std::size_t iteration) {
    bool bad = false;
    const double j = sweep(true, &bad);
    if (bad || !std::isfinite(j)) throw FitError(iteration, "non-finite value in embedding update");
    std::swap(s, next);
    sums = weighted_column_sums(*graph, s, threads);
    return j;
  }

  double value() { return sweep(false, nullptr); }

  Matrix snapshot() const { return convert<double>(s); }
};

}  // namespace

struct FuseSolver::Impl {
  EffectiveParams params;
  Precision precision;
  std::size_t iteration = 0;
  std::vector<double> trace;
  std::variant<Kernel<double>, Kernel<float>> kernel;

  static std::variant<Kernel<double>, Kernel<float>> make_kernel(const SparseGraph& g,
                                                                 const PairSet& p,
                                                                 const FuseConfig& c,
                                                                 const EffectiveParams& e) {
    const auto init = init_embedding(g.n(), c.k, c.seed);
    if (c.precision == Precision::f32) return Kernel<float>(g, p, c, e, init.values);
    return Kernel<double>(g, p, c, e, init.values);
  }

  Impl(const SparseGraph& g, const PairSet& p, const FuseConfig& c, const EffectiveParams& e)
      : params(e), precision(c.precision), kernel(make_kernel(g, p, c, e)) {}
};

namespace {

EffectiveParams solver_params(const SparseGraph& graph, const PairSet& pairs,
                              const FuseConfig& config) {
  config.validate();
  if (graph.m() == 0) throw std::invalid_argument("fuse: graph has no edges");
  if (config.lambda_scaled > 0.0) {
    if (pairs.n() != graph.n())
      throw DimensionError("fuse: pair set covers " + std::to_string(pairs.n()) +
                           " nodes, graph has " + std::to_string(graph.n()));
    if (pairs.empty()) throw std::invalid_argument("fuse: lambda > 0 requires at least one pair");
  }
  if (!pairs.empty()) return adaptive_params(config, pairs.size(), graph);
  // Ablation without a pair set: no pair scaling.
  EffectiveParams p;
  p.p_star = 1.0;
  p.d_star = 1.0 / std::sqrt(graph.average_degree());
  p.eta = config.eta_scaled * p.p_star * p.d_star;
  p.lambda = 0.0;
  return p;
}

}  // namespace

FuseSolver::FuseSolver(const SparseGraph& graph, const PairSet& pairs, const FuseConfig& config)
    : impl_(std::make_unique<Impl>(graph, pairs, config, solver_params(graph, pairs, config))) {}

FuseSolver::~FuseSolver() = default;
FuseSolver::FuseSolver(FuseSolver&&) noexcept = default;
FuseSolver& FuseSolver::operator=(FuseSolver&&) noexcept = default;

const EffectiveParams& FuseSolver::params() const noexcept { return impl_->params; }
std::size_t FuseSolver::iteration() const noexcept { return impl_->iteration; }
const std::vector<double>& FuseSolver::trace() const noexcept { return impl_->trace; }

void FuseSolver::step() {
  const std::size_t next = impl_->iteration + 1;
  const double j = std::visit([&](auto& k) { return k.step(next); }, impl_->kernel);
  impl_->trace.push_back(j);
  impl_->iteration = next;
}

double FuseSolver::current_objective() {
  return std::visit([](auto& k) { return k.value(); }, impl_->kernel);
}

EmbeddingMatrix FuseSolver::embedding() const {
  return {std::visit([](const auto& k) { return k.snapshot(); }, impl_->kernel),
          impl_->precision};
}

FitResult fuse_fit(const SparseGraph& graph, const PairSet& pairs, const FuseConfig& config,
                   const FitObserver& observer) {
  FuseSolver solver(graph, pairs, config);
  for (std::size_t t = 0; t < config.iterations; ++t) {
    solver.step();
    if (observer) observer(solver.iteration(), solver.embedding());
  }
  FitResult out;
  out.trace = solver.trace();
  out.trace.push_back(solver.current_objective());
  out.embedding = solver.embedding();
  out.params = solver.params();
  return out;
}

}  // namespace cfuse
