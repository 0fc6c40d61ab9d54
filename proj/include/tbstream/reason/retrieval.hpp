#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tbstream::reason {

inline constexpr std::size_t kEmbeddingDim = 256;

/// Lowercase, punctuation stripped (underscores kept), split on whitespace.
std::vector<std::string> normalize_tokens(std::string_view text);
std::string normalize_text(std::string_view text);

struct TokenSpan {
  std::size_t begin = 0;  // token offsets into the normalized text, half-open
  std::size_t end = 0;
  std::string text;
};

/// Windows of at most `size` tokens advancing by size - overlap; the last
/// window ends at the final token. Throws std::invalid_argument unless
/// size > overlap.
std::vector<TokenSpan> chunk_text(std::string_view text, std::size_t size, std::size_t overlap);

/// Hashed bag of tokens: FNV-1a(token) mod kEmbeddingDim, L2-normalized,
/// skipping common English function words. Text without content tokens
/// gives the zero vector.
std::vector<double> embed(std::string_view text);
bool is_stopword(std::string_view token);
std::size_t embedding_bucket(std::string_view token);

/// u.v / (|u||v|), 0 when either is zero. Throws std::invalid_argument on a
/// dimension mismatch.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

struct DocumentChunk {
  std::string doc_id;
  std::size_t chunk_index = 0;
  std::string text;
  std::vector<double> vector;
};

class RetrievalIndex {
 public:
  explicit RetrievalIndex(std::size_t dimension = kEmbeddingDim) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return chunks_.size(); }
  bool empty() const { return chunks_.empty(); }
  const std::vector<DocumentChunk>& chunks() const { return chunks_; }
  const DocumentChunk& chunk(std::size_t i) const { return chunks_[i]; }

  /// Throws std::invalid_argument when the vector has the wrong dimension.
  void add(DocumentChunk chunk);
  /// Chunks, embeds and adds one document; returns the number of chunks.
  std::size_t add_document(const std::string& doc_id, std::string_view text, std::size_t size = 40,
                           std::size_t overlap = 10);

  /// Every regular file under `dir` (sorted by name), doc_id = file stem.
  static RetrievalIndex from_directory(const std::filesystem::path& dir, std::size_t size = 40,
                                       std::size_t overlap = 10);

  /// Row-major chunk vectors, for the SIMD scan.
  const std::vector<double>& matrix() const { return rows_; }
  const std::vector<double>& norms() const { return norms_; }

 private:
  std::size_t dimension_;
  std::vector<DocumentChunk> chunks_;
  std::vector<double> rows_;
  std::vector<double> norms_;
};

struct Hit {
  std::size_t chunk = 0;  // index into RetrievalIndex::chunks()
  double score = 0;
};

struct RetrievalResult {
  std::vector<Hit> hits;  // score descending, then (doc_id, chunk_index)
  bool truncated = false;  // k exceeded the index size
};

/// Exact cosine top-k over every chunk. Throws std::invalid_argument for
/// k = 0, an empty index or a mismatched query dimension.
RetrievalResult retrieve_top_k(std::span<const double> query, const RetrievalIndex& index, std::size_t k = 2);
RetrievalResult retrieve_top_k(std::string_view query, const RetrievalIndex& index, std::size_t k = 2);

}  // namespace tbstream::reason
