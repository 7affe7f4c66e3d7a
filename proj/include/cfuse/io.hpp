#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cfuse/fuse.hpp"
#include "cfuse/graph.hpp"

namespace cfuse {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary embedding layout (little-endian):
//   "FUSE" | version u16 | n u64 | k u32 | precision u8 (0 = f64, 1 = f32)
//   | n*k values, row-major, in internal node order.
inline constexpr std::uint16_t kEmbeddingFormatVersion = 1;

void write_embedding_binary(const std::filesystem::path& path, const EmbeddingMatrix& s);
EmbeddingMatrix read_embedding_binary(const std::filesystem::path& path);

/// One line per node: external id then k values, tab separated, shortest
/// round-trip decimal form. An optional leading comment names the manifest.
void write_embedding_tsv(const std::filesystem::path& path, const EmbeddingMatrix& s,
                         std::span<const ExternalId> external_ids,
                         const std::string& manifest_name = {});

struct TsvEmbedding {
  std::vector<ExternalId> external_ids;  // row order of `embedding`
  EmbeddingMatrix embedding;
};
TsvEmbedding read_embedding_tsv(const std::filesystem::path& path);

/// "iteration,J" with one row per recorded objective value.
void write_trace_csv(const std::filesystem::path& path, std::span<const double> trace);

/// Lowercase hex SHA-256 of a file's bytes.
std::string file_sha256(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace cfuse
