#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfuse/dense.hpp"
#include "cfuse/graph.hpp"

namespace cfuse {

class PairError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One supervised pair, stored in a single direction. sign is +1 (same
/// class) or -1 (different class).
struct LabeledPair {
  NodeId i = 0;
  NodeId j = 0;
  std::int8_t sign = 1;

  friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

/// Conflict-free set of signed pairs over n nodes, together with the
/// symmetrized signed pair matrix Y in CSR form and the contrastive
/// degrees D_c (number of stored pairs touching each node).
///
/// Construction rejects self-pairs, out-of-range ids, and any unordered
/// pair that appears twice (with either sign). Callers that want
/// duplicates collapsed should use `PairSet::collapse`.
class PairSet {
 public:
  PairSet() = default;
  PairSet(std::size_t n, std::vector<LabeledPair> pairs);

  /// Keeps the first occurrence of each unordered pair. Repeats with the
  /// same sign are counted in *collapsed; a repeat with the opposite sign
  /// is a PairError.
  static PairSet collapse(std::size_t n, std::span<const LabeledPair> pairs,
                          std::size_t* collapsed = nullptr);

  std::size_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  std::span<const LabeledPair> pairs() const noexcept { return pairs_; }
  const LabeledPair& operator[](std::size_t p) const noexcept { return pairs_[p]; }

  std::span<const double> contrastive_degrees() const noexcept { return degrees_; }

  std::size_t positives() const noexcept;
  std::size_t negatives() const noexcept { return size() - positives(); }

  /// Symmetrized neighbours of node i in Y, with the normalized weight
  /// Y_ij / sqrt(D_ii * D_jj).
  std::span<const NodeId> partners(std::size_t i) const noexcept {
    return {partner_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }
  std::span<const double> weights(std::size_t i) const noexcept {
    return {weight_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
  }

  /// Subset by pair index, same n.
  PairSet select(std::span<const std::size_t> indices) const;

 private:
  std::size_t n_ = 0;
  std::vector<LabeledPair> pairs_;
  std::vector<double> degrees_;
  std::vector<std::size_t> offsets_{0};
  std::vector<NodeId> partner_;
  std::vector<double> weight_;
};

/// Class id per node, dense in [0, classes).
struct NodeLabels {
  std::vector<std::uint32_t> labels;
  std::uint32_t classes = 0;

  /// Builds from raw class ids, remapping them to 0..C-1 in ascending order.
  static NodeLabels from_raw(std::span<const std::uint64_t> raw);
};

struct GeneratedPairs {
  PairSet pairs;
  std::size_t positives_requested = 0;
  std::size_t negatives_requested = 0;
  std::size_t collapsed = 0;
};

/// Balanced sampling: floor(P/2) draws from same-class unordered pairs and
/// the remainder from different-class unordered pairs, each uniform and
/// with replacement; repeats collapse. Pairs are stored as (min, max).
GeneratedPairs generate_pairs(const NodeLabels& labels, std::size_t target, std::uint64_t seed);

/// Negates exactly round(fraction * size) signs, chosen uniformly without
/// replacement.
PairSet flip_labels(const PairSet& pairs, double fraction, std::uint64_t seed);

/// L_c * S with L_c = I - D_c^{-1/2} Y D_c^{-1/2}. Nodes without pairs get
/// their own row back.
template <typename T>
Dense<T> apply_contrastive_laplacian(const PairSet& pairs, const Dense<T>& s, int threads = 1);

/// Tr(S^T L_c S).
double contrastive_quadratic_form(const PairSet& pairs, const Matrix& s, int threads = 1);

// File formats: pairs TSV "i j y" and labels TSV "node_id class_id", both
// with '#' comment lines allowed. Ids in files are external ids.
struct ExternalPair {
  ExternalId i = 0;
  ExternalId j = 0;
  std::int8_t sign = 1;
};

std::vector<ExternalPair> read_pairs_file(const std::filesystem::path& path);
void write_pairs_file(const std::filesystem::path& path, std::span<const ExternalPair> pairs,
                      const std::string& manifest_name = {});

struct LabelsFile {
  std::vector<ExternalId> nodes;       // ascending
  std::vector<std::uint64_t> classes;  // raw class id per node
};
LabelsFile read_labels_file(const std::filesystem::path& path);

extern template Matrix apply_contrastive_laplacian(const PairSet&, const Matrix&, int);
extern template Dense<float> apply_contrastive_laplacian(const PairSet&, const Dense<float>&, int);

}  // namespace cfuse
