#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "cfuse/dense.hpp"
#include "cfuse/graph.hpp"
#include "cfuse/pairs.hpp"
#include "cfuse/rng.hpp"

namespace fixtures {

using cfuse::Matrix;
using cfuse::NodeId;
using cfuse::PairSet;
using cfuse::SparseGraph;

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cfuse-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline SparseGraph graph_from(std::size_t n, std::vector<std::pair<NodeId, NodeId>> edges) {
  return SparseGraph::from_edges(n, edges);
}

inline SparseGraph path3() { return graph_from(3, {{0, 1}, {1, 2}}); }
inline SparseGraph triangle() { return graph_from(3, {{0, 1}, {1, 2}, {0, 2}}); }

inline SparseGraph gnp(std::size_t n, double p, std::uint64_t seed) {
  cfuse::Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.uniform01() < p) edges.emplace_back(i, j);
  return SparseGraph::from_edges(n, edges);
}

struct Sbm {
  SparseGraph graph;
  cfuse::NodeLabels labels;
};

/// Two equal contiguous blocks: nodes [0, n/2) are class 0, the rest class 1.
inline Sbm two_block_sbm(std::size_t n, double p_in, double p_out, std::uint64_t seed) {
  cfuse::Rng rng(seed);
  std::vector<std::uint64_t> raw(n);
  for (std::size_t i = 0; i < n; ++i) raw[i] = i < n / 2 ? 0 : 1;
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.uniform01() < (raw[i] == raw[j] ? p_in : p_out)) edges.emplace_back(i, j);
  return {SparseGraph::from_edges(n, edges), cfuse::NodeLabels::from_raw(raw)};
}

inline Matrix random_matrix(std::size_t n, std::size_t k, std::uint64_t seed) {
  cfuse::Rng rng(seed);
  Matrix m(n, k);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

inline Matrix random_unit_rows(std::size_t n, std::size_t k, std::uint64_t seed) {
  Matrix m = random_matrix(n, k, seed);
  for (std::size_t i = 0; i < n; ++i) {
    double sq = 0.0;
    for (double v : m.row(i)) sq += v * v;
    const double norm = std::sqrt(sq);
    for (double& v : m.row(i)) v /= norm;
  }
  return m;
}

/// `count` distinct unordered pairs with random signs (count <= n(n-1)/2).
inline PairSet random_pairs(std::size_t n, std::size_t count, std::uint64_t seed) {
  cfuse::Rng rng(seed);
  std::vector<std::pair<NodeId, NodeId>> all;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j) all.emplace_back(i, j);
  count = std::min(count, all.size());
  for (std::size_t t = 0; t < count; ++t)
    std::swap(all[t], all[t + rng.uniform_index(all.size() - t)]);
  std::vector<cfuse::LabeledPair> pairs;
  for (std::size_t t = 0; t < count; ++t) {
    auto [a, b] = all[t];
    if (rng.uniform_index(2) == 0) std::swap(a, b);
    pairs.push_back({a, b, static_cast<std::int8_t>(rng.uniform_index(2) == 0 ? 1 : -1)});
  }
  return PairSet(n, std::move(pairs));
}

/// Random simple graph with 2 <= n <= max_n and at least one edge.
inline SparseGraph random_small_graph(std::uint64_t seed, std::size_t max_n = 50) {
  cfuse::Rng rng(seed);
  const std::size_t n = 2 + rng.uniform_index(max_n - 1);
  const double p = 0.05 + 0.5 * rng.uniform01();
  std::vector<std::pair<NodeId, NodeId>> edges;
  for (NodeId i = 0; i < n; ++i)
    for (NodeId j = i + 1; j < n; ++j)
      if (rng.uniform01() < p) edges.emplace_back(i, j);
  if (edges.empty()) edges.emplace_back(0, 1);
  return SparseGraph::from_edges(n, edges);
}

// Dense oracles: each operator formed entrywise from its definition.

inline Eigen::MatrixXd to_eigen(const Matrix& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = m(i, j);
  return out;
}

inline Eigen::MatrixXd dense_adjacency(const SparseGraph& g) {
  const auto n = static_cast<Eigen::Index>(g.n());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < g.n(); ++i)
    for (NodeId j : g.neighbors(i)) a(i, j) = 1.0;
  return a;
}

inline Eigen::MatrixXd dense_pair_matrix(const PairSet& pairs) {
  const auto n = static_cast<Eigen::Index>(pairs.n());
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, n);
  for (const auto& p : pairs.pairs()) {
    y(p.i, p.j) = p.sign;
    y(p.j, p.i) = p.sign;
  }
  return y;
}

/// I - D^{-1/2} Y D^{-1/2}, with D_ii = sum_j |Y_ij| and 0 rows left alone.
inline Eigen::MatrixXd dense_contrastive_laplacian(const PairSet& pairs) {
  const Eigen::MatrixXd y = dense_pair_matrix(pairs);
  const auto n = y.rows();
  Eigen::VectorXd inv_sqrt(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = y.row(i).cwiseAbs().sum();
    inv_sqrt(i) = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;
  }
  return Eigen::MatrixXd::Identity(n, n) - inv_sqrt.asDiagonal() * y * inv_sqrt.asDiagonal();
}

/// A - d w^T / 2m with w = 1 (approximate) or w = d (exact).
inline Eigen::MatrixXd dense_modularity(const SparseGraph& g, bool exact) {
  const Eigen::MatrixXd a = dense_adjacency(g);
  const Eigen::VectorXd d = a.rowwise().sum();
  const double two_m = d.sum();
  const Eigen::VectorXd w = exact ? d : Eigen::VectorXd::Ones(a.rows());
  return a - d * w.transpose() / two_m;
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

/// max |a - b| / max(max |b|, tiny), a matrix-scaled relative error.
inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

}  // namespace fixtures
