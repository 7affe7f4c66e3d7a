#include "cfuse/io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "text_util.hpp"

namespace cfuse {
namespace {

static_assert(std::endian::native == std::endian::little,
              "binary embedding I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get(std::istream& in, const std::string& source) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof value))
    throw IoError(source + ": truncated embedding file");
  return value;
}

}  // namespace

void write_embedding_binary(const std::filesystem::path& path, const EmbeddingMatrix& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write("FUSE", 4);
  put<std::uint16_t>(out, kEmbeddingFormatVersion);
  put<std::uint64_t>(out, s.n());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.k()));
  put<std::uint8_t>(out, s.precision == Precision::f32 ? 1 : 0);
  if (s.precision == Precision::f32) {
    for (double v : s.values.values()) put<float>(out, static_cast<float>(v));
  } else {
    for (double v : s.values.values()) put<double>(out, v);
  }
  if (!out) throw IoError("write failed: " + path.string());
}

EmbeddingMatrix read_embedding_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  const std::string source = path.string();
  if (!in) throw IoError("cannot read " + source);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FUSE", 4) != 0)
    throw IoError(source + ": not a FUSE embedding file");
  const auto version = get<std::uint16_t>(in, source);
  if (version != kEmbeddingFormatVersion)
    throw IoError(source + ": unsupported version " + std::to_string(version));
  const auto n = get<std::uint64_t>(in, source);
  const auto k = get<std::uint32_t>(in, source);
  const auto flag = get<std::uint8_t>(in, source);
  if (flag > 1) throw IoError(source + ": bad precision flag");
  EmbeddingMatrix s{Matrix(n, k), flag == 1 ? Precision::f32 : Precision::f64};
  for (double& v : s.values.values()) {
    v = flag == 1 ? static_cast<double>(get<float>(in, source)) : get<double>(in, source);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw IoError(source + ": trailing bytes");
  return s;
}

void write_embedding_tsv(const std::filesystem::path& path, const EmbeddingMatrix& s,
                         std::span<const ExternalId> external_ids,
                         const std::string& manifest_name) {
  if (external_ids.size() != s.n()) throw IoError("id map size does not match embedding rows");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  if (!manifest_name.empty()) out << "# manifest: " << manifest_name << '\n';
  std::string line;
  for (std::size_t i = 0; i < s.n(); ++i) {
    line = std::to_string(external_ids[i]);
    for (double v : s.values.row(i)) {
      line.push_back('\t');
      if (s.precision == Precision::f32) {
        detail::append_number(line, static_cast<float>(v));
      } else {
        detail::append_number(line, v);
      }
    }
    line.push_back('\n');
    out << line;
  }
  if (!out) throw IoError("write failed: " + path.string());
}

TsvEmbedding read_embedding_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  const std::string source = path.string();
  if (!in) throw IoError("cannot read " + source);
  TsvEmbedding out;
  std::vector<double> values;
  std::size_t k = 0;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = detail::split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) continue;
    if (fields.size() < 2) throw ParseError(source, lineno, "expected id and values");
    if (k == 0) k = fields.size() - 1;
    if (fields.size() - 1 != k) throw ParseError(source, lineno, "inconsistent row width");
    out.external_ids.push_back(detail::parse_u64(fields[0], source, lineno));
    for (std::size_t c = 1; c < fields.size(); ++c)
      values.push_back(detail::parse_f64(fields[c], source, lineno));
  }
  out.embedding.values = Matrix(out.external_ids.size(), k);
  std::copy(values.begin(), values.end(), out.embedding.values.values().begin());
  return out;
}

void write_trace_csv(const std::filesystem::path& path, std::span<const double> trace) {
  std::string text = "iteration,J\n";
  for (std::size_t t = 0; t < trace.size(); ++t) {
    text += std::to_string(t);
    text.push_back(',');
    detail::append_number(text, trace[t]);
    text.push_back('\n');
  }
  write_text_file(path, text);
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int b = 0; b < len; ++b)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[b]);
  return hex.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << content;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace cfuse
