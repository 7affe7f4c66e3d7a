#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "cfuse/dense.hpp"

namespace cfuse {

using NodeId = std::uint32_t;
using ExternalId = std::uint64_t;

class GraphError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed input lines; carries the 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Simple undirected graph in CSR form. Immutable once built; every
/// undirected edge is stored in both directions, rows strictly increasing.
class SparseGraph {
 public:
  /// Builds from 0-based edges over n nodes. Duplicates (in either
  /// orientation) and self-loops are dropped; see `build_report`.
  struct BuildReport {
    std::size_t raw_edges = 0;
    std::size_t duplicates_dropped = 0;
    std::size_t self_loops_dropped = 0;
  };
  static SparseGraph from_edges(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges,
                                BuildReport* report = nullptr);

  std::size_t n() const noexcept { return degrees_.size(); }
  std::size_t m() const noexcept { return col_indices_.size() / 2; }

  std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
  std::span<const NodeId> col_indices() const noexcept { return col_indices_; }
  std::span<const double> degrees() const noexcept { return degrees_; }

  std::span<const NodeId> neighbors(std::size_t i) const noexcept {
    return {col_indices_.data() + row_offsets_[i], row_offsets_[i + 1] - row_offsets_[i]};
  }

  double average_degree() const noexcept {
    return n() == 0 ? 0.0 : 2.0 * static_cast<double>(m()) / static_cast<double>(n());
  }

  /// Checks every structural invariant; throws GraphError on violation.
  void validate() const;

 private:
  std::vector<std::size_t> row_offsets_{0};
  std::vector<NodeId> col_indices_;
  std::vector<double> degrees_;
};

enum class HeaderPolicy { skip_comments, strict };

/// Result of reading an edge list: the graph plus the external-id map
/// (external_ids[internal] = id as written in the file).
struct LoadedGraph {
  SparseGraph graph;
  std::vector<ExternalId> external_ids;
  SparseGraph::BuildReport report;

  /// Internal id for an external one; throws GraphError if absent.
  NodeId internal_id(ExternalId id) const;
};

/// Reads a whitespace-separated edge list. Ids are remapped to 0..n-1 in
/// ascending external-id order. Rejects graphs with no edges.
LoadedGraph load_edge_list(const std::filesystem::path& path,
                           HeaderPolicy policy = HeaderPolicy::skip_comments);

void write_id_map(const std::filesystem::path& path, std::span<const ExternalId> external_ids);
std::vector<ExternalId> read_id_map(const std::filesystem::path& path);

/// A * X. One pass over CSR storage; rows may be split across threads.
template <typename T>
Dense<T> spmv(const SparseGraph& graph, const Dense<T>& x, int threads = 1);

/// Second Zagreb index: sum over undirected edges of d_i * d_j.
double zagreb_m2(const SparseGraph& graph);

/// Euclidean norm of the degree vector.
double degree_norm(const SparseGraph& graph);

extern template Matrix spmv(const SparseGraph&, const Matrix&, int);
extern template Dense<float> spmv(const SparseGraph&, const Dense<float>&, int);

}  // namespace cfuse
