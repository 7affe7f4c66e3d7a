#include "cfuse/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cfuse/parallel.hpp"
#include "text_util.hpp"

namespace cfuse {

SparseGraph SparseGraph::from_edges(std::size_t n,
                                    std::span<const std::pair<NodeId, NodeId>> edges,
                                    BuildReport* report) {
  BuildReport local;
  local.raw_edges = edges.size();

  std::vector<std::pair<NodeId, NodeId>> canon;
  canon.reserve(edges.size());
  for (auto [u, v] : edges) {
    if (u >= n || v >= n) {
      throw GraphError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                       ") references a node outside [0, " + std::to_string(n) + ")");
    }
    if (u == v) {
      ++local.self_loops_dropped;
      continue;
    }
    canon.emplace_back(std::min(u, v), std::max(u, v));
  }
  std::sort(canon.begin(), canon.end());
  const auto unique_end = std::unique(canon.begin(), canon.end());
  local.duplicates_dropped = static_cast<std::size_t>(canon.end() - unique_end);
  canon.erase(unique_end, canon.end());

  SparseGraph g;
  g.degrees_.assign(n, 0.0);
  std::vector<std::size_t> count(n, 0);
  for (auto [u, v] : canon) {
    ++count[u];
    ++count[v];
  }
  g.row_offsets_.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) g.row_offsets_[i + 1] = g.row_offsets_[i] + count[i];
  g.col_indices_.resize(2 * canon.size());
  std::vector<std::size_t> cursor(g.row_offsets_.begin(), g.row_offsets_.end() - 1);
  // canon is sorted by (u, v), so appending u->v in order and v->u in order
  // leaves every row sorted: row v receives its smaller neighbours u first.
  for (auto [u, v] : canon) g.col_indices_[cursor[v]++] = u;
  for (auto [u, v] : canon) g.col_indices_[cursor[u]++] = v;
  for (std::size_t i = 0; i < n; ++i) g.degrees_[i] = static_cast<double>(count[i]);
  if (report != nullptr) *report = local;
  return g;
}

void SparseGraph::validate() const {
  const std::size_t nodes = n();
  if (row_offsets_.size() != nodes + 1 || row_offsets_.back() != col_indices_.size()) {
    throw GraphError("row offsets inconsistent with column storage");
  }
  double degree_sum = 0.0;
  for (std::size_t i = 0; i < nodes; ++i) {
    auto row = neighbors(i);
    if (static_cast<double>(row.size()) != degrees_[i]) throw GraphError("degree mismatch");
    degree_sum += degrees_[i];
    for (std::size_t p = 0; p < row.size(); ++p) {
      if (row[p] >= nodes) throw GraphError("column index out of range");
      if (row[p] == i) throw GraphError("self-loop in row " + std::to_string(i));
      if (p > 0 && row[p] <= row[p - 1]) throw GraphError("row not strictly increasing");
      auto back = neighbors(row[p]);
      if (!std::binary_search(back.begin(), back.end(), static_cast<NodeId>(i))) {
        throw GraphError("asymmetric adjacency at (" + std::to_string(i) + ", " +
                         std::to_string(row[p]) + ")");
      }
    }
  }
  if (degree_sum != 2.0 * static_cast<double>(m())) throw GraphError("sum of degrees != 2m");
}

NodeId LoadedGraph::internal_id(ExternalId id) const {
  auto it = std::lower_bound(external_ids.begin(), external_ids.end(), id);
  if (it == external_ids.end() || *it != id) {
    throw GraphError("node " + std::to_string(id) + " is not in the graph");
  }
  return static_cast<NodeId>(it - external_ids.begin());
}

LoadedGraph load_edge_list(const std::filesystem::path& path, HeaderPolicy policy) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot read edge list " + path.string());

  std::vector<std::pair<ExternalId, ExternalId>> raw;
  std::string line;
  std::size_t lineno = 0;
  const std::string source = path.string();
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty()) continue;
    if (fields.front().starts_with('#')) {
      if (policy == HeaderPolicy::skip_comments) continue;
      throw ParseError(source, lineno, "comment line not allowed");
    }
    if (fields.size() != 2) throw ParseError(source, lineno, "expected two node ids");
    raw.emplace_back(detail::parse_u64(fields[0], source, lineno),
                     detail::parse_u64(fields[1], source, lineno));
  }

  LoadedGraph out;
  out.external_ids.reserve(raw.size() * 2);
  for (auto [u, v] : raw) {
    out.external_ids.push_back(u);
    out.external_ids.push_back(v);
  }
  std::sort(out.external_ids.begin(), out.external_ids.end());
  out.external_ids.erase(std::unique(out.external_ids.begin(), out.external_ids.end()),
                         out.external_ids.end());

  std::vector<std::pair<NodeId, NodeId>> edges;
  edges.reserve(raw.size());
  for (auto [u, v] : raw) edges.emplace_back(out.internal_id(u), out.internal_id(v));
  out.graph = SparseGraph::from_edges(out.external_ids.size(), edges, &out.report);
  if (out.graph.m() == 0) throw GraphError("edge list " + source + " contains no edges");
  return out;
}

void write_id_map(const std::filesystem::path& path, std::span<const ExternalId> external_ids) {
  std::ofstream out(path);
  if (!out) throw GraphError("cannot write " + path.string());
  out << "# external_id\tinternal_id\n";
  for (std::size_t i = 0; i < external_ids.size(); ++i) out << external_ids[i] << '\t' << i << '\n';
  if (!out) throw GraphError("write failed: " + path.string());
}

std::vector<ExternalId> read_id_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw GraphError("cannot read id map " + path.string());
  std::vector<std::pair<std::uint64_t, ExternalId>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() != 2) throw ParseError(path.string(), lineno, "expected two columns");
    rows.emplace_back(detail::parse_u64(fields[1], path.string(), lineno),
                      detail::parse_u64(fields[0], path.string(), lineno));
  }
  std::sort(rows.begin(), rows.end());
  std::vector<ExternalId> ids(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first != i) throw GraphError("id map internal ids are not 0..n-1");
    ids[i] = rows[i].second;
  }
  return ids;
}

template <typename T>
Dense<T> spmv(const SparseGraph& graph, const Dense<T>& x, int threads) {
  require_rows(x.rows(), graph.n(), "spmv");
  const std::size_t k = x.cols();
  Dense<T> out(graph.n(), k);
  parallel_for(graph.n(), threads, [&](std::size_t i) {
    auto dst = out.row(i);
    for (NodeId j : graph.neighbors(i)) {
      auto src = x.row(j);
      for (std::size_t c = 0; c < k; ++c) dst[c] += src[c];
    }
  });
  return out;
}

template Matrix spmv(const SparseGraph&, const Matrix&, int);
template Dense<float> spmv(const SparseGraph&, const Dense<float>&, int);

double zagreb_m2(const SparseGraph& graph) {
  auto d = graph.degrees();
  double total = 0.0;
  for (std::size_t i = 0; i < graph.n(); ++i) {
    for (NodeId j : graph.neighbors(i)) {
      if (j > i) total += d[i] * d[j];
    }
  }
  return total;
}

double degree_norm(const SparseGraph& graph) {
  double sq = 0.0;
  for (double di : graph.degrees()) sq += di * di;
  return std::sqrt(sq);
}

}  // namespace cfuse
