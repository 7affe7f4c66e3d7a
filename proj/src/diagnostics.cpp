#include "cfuse/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

#include "cfuse/fuse.hpp"
#include "cfuse/parallel.hpp"
#include "cfuse/rng.hpp"
#include "text_util.hpp"

namespace cfuse {

double gradient_alignment(const SparseGraph& graph, const Matrix& s, int threads) {
  const Matrix exact = structural_gradient(graph, s, GradientMode::exact, threads);
  const Matrix approx = structural_gradient(graph, s, GradientMode::approximate, threads);
  auto a = exact.values();
  auto b = approx.values();
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    dot += a[t] * b[t];
    na += a[t] * a[t];
    nb += b[t] * b[t];
  }
  if (na == 0.0 && nb == 0.0) return 1.0;
  if (na == 0.0 || nb == 0.0) return 0.0;
  const double cosine = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(cosine, -1.0, 1.0);
}

ZagrebReport zagreb_report(const SparseGraph& graph) {
  if (graph.m() == 0) throw std::invalid_argument("zagreb_report: graph has no edges");
  ZagrebReport r;
  const double m = static_cast<double>(graph.m());
  const double n = static_cast<double>(graph.n());
  r.zagreb_m2 = zagreb_m2(graph);
  r.degree_norm = degree_norm(graph);
  const double norm2 = r.degree_norm * r.degree_norm;
  r.zagreb_constant = r.zagreb_m2 * m / (norm2 * norm2);
  const double spread = 1.0 + n / r.degree_norm;
  r.m_min = spread * spread / r.zagreb_constant;
  r.bound_satisfied = m >= r.m_min;
  r.rate_inv_sqrt_m = 1.0 / std::sqrt(m);
  r.rate_degree_spread = n / (r.degree_norm * std::sqrt(m));
  return r;
}

Matrix apply_lipschitz_operator(const SparseGraph& graph, const PairSet& pairs, double lambda,
                                const Matrix& x, int threads) {
  Matrix out = structural_gradient(graph, x, GradientMode::exact, threads);
  if (lambda != 0.0) {
    const Matrix lx = apply_contrastive_laplacian(pairs, x, threads);
    auto o = out.values();
    auto l = lx.values();
    for (std::size_t t = 0; t < o.size(); ++t) o[t] -= lambda * l[t];
  }
  return out;
}

LipschitzEstimate lipschitz_estimate(const SparseGraph& graph, const PairSet& pairs, double lambda,
                                     std::size_t max_iterations, double tol, std::uint64_t seed) {
  if (graph.n() == 0) throw std::invalid_argument("lipschitz_estimate: empty graph");
  if (max_iterations == 0) throw std::invalid_argument("lipschitz_estimate: iters must be >= 1");
  if (graph.m() == 0) throw std::invalid_argument("lipschitz_estimate: graph has no edges");
  if (lambda != 0.0) require_rows(pairs.n(), graph.n(), "lipschitz_estimate");

  auto normalize = [](Matrix& v) {
    double sq = 0.0;
    for (double x : v.values()) sq += x * x;
    const double norm = std::sqrt(sq);
    if (norm > 0.0)
      for (double& x : v.values()) x /= norm;
    return norm;
  };

  Matrix v(graph.n(), 1);
  Rng rng(seed);
  for (double& x : v.values()) x = rng.normal();
  normalize(v);

  LipschitzEstimate out;
  double previous = -1.0;
  for (std::size_t it = 1; it <= max_iterations; ++it) {
    // For unit v: <v, M^2 v> = ||M v||^2.
    Matrix mv = apply_lipschitz_operator(graph, pairs, lambda, v);
    double rayleigh = 0.0;
    for (double x : mv.values()) rayleigh += x * x;
    out.iterations = it;
    out.value = 2.0 * std::sqrt(rayleigh);
    if (rayleigh == 0.0) {
      out.converged = true;
      break;
    }
    if (previous >= 0.0 && std::abs(rayleigh - previous) < tol * rayleigh) {
      out.converged = true;
      break;
    }
    previous = rayleigh;
    v = apply_lipschitz_operator(graph, pairs, lambda, mv);
    if (normalize(v) == 0.0) {
      out.converged = true;
      break;
    }
  }
  return out;
}

double lipschitz_spot_ratio(const SparseGraph& graph, const PairSet& pairs, double lambda,
                            double lipschitz, std::size_t samples, std::size_t k,
                            std::uint64_t seed, int threads) {
  Rng rng(seed);
  double worst = 0.0;
  for (std::size_t t = 0; t < samples; ++t) {
    const Matrix a = init_embedding(graph.n(), k, rng.next()).values;
    const Matrix b = init_embedding(graph.n(), k, rng.next()).values;
    Matrix diff(graph.n(), k);
    for (std::size_t e = 0; e < diff.values().size(); ++e)
      diff.values()[e] = a.values()[e] - b.values()[e];
    // M is linear, so 2 M S - 2 M S' = 2 M (S - S').
    const Matrix md = apply_lipschitz_operator(graph, pairs, lambda, diff, threads);
    double lhs = 0.0, rhs = 0.0;
    for (double x : md.values()) lhs += x * x;
    for (double x : diff.values()) rhs += x * x;
    if (rhs == 0.0) continue;
    worst = std::max(worst, 2.0 * std::sqrt(lhs) / (lipschitz * std::sqrt(rhs)));
  }
  return worst;
}

namespace {

nlohmann::ordered_json as_json(const DiagnosticsReport& r) {
  nlohmann::ordered_json j;
  j["n"] = r.n;
  j["m"] = r.m;
  j["zagreb_m2"] = r.zagreb.zagreb_m2;
  j["zagreb_constant"] = r.zagreb.zagreb_constant;
  j["degree_norm"] = r.zagreb.degree_norm;
  j["m_min"] = r.zagreb.m_min;
  j["bound_satisfied"] = r.zagreb.bound_satisfied;
  j["rate_inv_sqrt_m"] = r.zagreb.rate_inv_sqrt_m;
  j["rate_degree_spread"] = r.zagreb.rate_degree_spread;
  if (r.cosine_alignment) {
    j["cosine_alignment"] = *r.cosine_alignment;
    if (r.alignment_seed) j["alignment_seed"] = *r.alignment_seed;
    if (r.alignment_k) j["alignment_k"] = *r.alignment_k;
  }
  if (r.lipschitz) {
    j["lambda"] = r.lambda.value_or(0.0);
    j["lipschitz_estimate"] = r.lipschitz->value;
    j["lipschitz_iterations"] = r.lipschitz->iterations;
    j["lipschitz_converged"] = r.lipschitz->converged;
    if (r.lipschitz_spot_ratio) {
      j["lipschitz_spot_samples"] = r.lipschitz_spot_samples;
      j["lipschitz_spot_ratio"] = *r.lipschitz_spot_ratio;
      j["lipschitz_spot_check"] = *r.lipschitz_spot_ratio <= 1.0 + 1e-6;
    }
  }
  return j;
}

}  // namespace

std::string to_key_value(const DiagnosticsReport& report) {
  const nlohmann::ordered_json j = as_json(report);
  std::string out;
  for (const auto& [key, value] : j.items()) {
    out += key + " = ";
    if (value.is_boolean()) {
      out += value.get<bool>() ? "true" : "false";
    } else if (value.is_number_float()) {
      detail::append_number(out, value.get<double>());
    } else {
      out += value.dump();
    }
    out += '\n';
  }
  return out;
}

std::string to_json(const DiagnosticsReport& report) { return as_json(report).dump(2) + "\n"; }

}  // namespace cfuse
