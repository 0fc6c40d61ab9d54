#include "tbstream/reason/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "tbstream/bus/bus.hpp"
#include "tbstream/simd/kernels.hpp"

namespace tbstream::reason {

std::vector<std::string> normalize_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (std::isalnum(c) || c == '_' || c >= 0x80) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

namespace {

std::string join(const std::vector<std::string>& tokens, std::size_t begin, std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::string normalize_text(std::string_view text) {
  auto tokens = normalize_tokens(text);
  return join(tokens, 0, tokens.size());
}

std::vector<TokenSpan> chunk_text(std::string_view text, std::size_t size, std::size_t overlap) {
  if (size == 0 || overlap >= size) throw std::invalid_argument("chunk size must exceed overlap");
  auto tokens = normalize_tokens(text);
  std::vector<TokenSpan> out;
  if (tokens.empty()) return out;
  const std::size_t stride = size - overlap;
  for (std::size_t start = 0;; start += stride) {
    std::size_t end = std::min(start + size, tokens.size());
    out.push_back({start, end, join(tokens, start, end)});
    if (end == tokens.size()) break;
  }
  return out;
}

bool is_stopword(std::string_view token) {
  static const std::set<std::string, std::less<>> kStop = {
      "a",    "an",   "and",  "are", "as",   "at",    "be",   "by",   "for",  "from", "has",  "have",
      "in",   "is",   "it",   "its", "of",   "on",    "or",   "that", "the",  "their", "them", "they",
      "this", "to",   "was",  "were", "which", "while", "who", "will", "with", "within", "should", "than"};
  return kStop.count(token) > 0;
}

std::size_t embedding_bucket(std::string_view token) { return bus::fnv1a64(token) % kEmbeddingDim; }

std::vector<double> embed(std::string_view text) {
  std::vector<double> v(kEmbeddingDim, 0.0);
  for (const auto& t : normalize_tokens(text)) {
    if (!is_stopword(t)) v[embedding_bucket(t)] += 1.0;
  }
  double norm = std::sqrt(simd::dot(v.data(), v.data(), v.size()));
  if (norm > 0) {
    for (double& x : v) x /= norm;
  }
  return v;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw std::invalid_argument("vector dimensions differ");
  double uu = simd::dot(u.data(), u.data(), u.size());
  double vv = simd::dot(v.data(), v.data(), v.size());
  if (uu == 0 || vv == 0) return 0.0;
  double c = simd::dot(u.data(), v.data(), u.size()) / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(c, -1.0, 1.0);
}

void RetrievalIndex::add(DocumentChunk chunk) {
  if (chunk.vector.size() != dimension_) {
    throw std::invalid_argument("chunk vector has dimension " + std::to_string(chunk.vector.size()) + ", index has " +
                                std::to_string(dimension_));
  }
  rows_.insert(rows_.end(), chunk.vector.begin(), chunk.vector.end());
  norms_.push_back(std::sqrt(simd::dot(chunk.vector.data(), chunk.vector.data(), dimension_)));
  chunks_.push_back(std::move(chunk));
}

std::size_t RetrievalIndex::add_document(const std::string& doc_id, std::string_view text, std::size_t size,
                                         std::size_t overlap) {
  auto spans = chunk_text(text, size, overlap);
  for (std::size_t i = 0; i < spans.size(); ++i) {
    auto v = embed(spans[i].text);
    add({doc_id, i, std::move(spans[i].text), std::move(v)});
  }
  return spans.size();
}

RetrievalIndex RetrievalIndex::from_directory(const std::filesystem::path& dir, std::size_t size,
                                              std::size_t overlap) {
  if (!std::filesystem::is_directory(dir)) throw std::invalid_argument("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  RetrievalIndex index;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    index.add_document(f.stem().string(), ss.str(), size, overlap);
  }
  return index;
}

RetrievalResult retrieve_top_k(std::span<const double> query, const RetrievalIndex& index, std::size_t k) {
  if (k == 0) throw std::invalid_argument("k must be at least 1");
  if (index.empty()) throw std::invalid_argument("retrieval index is empty");
  if (query.size() != index.dimension()) throw std::invalid_argument("query dimension does not match the index");

  const std::size_t n = index.size();
  std::vector<double> dots(n);
  simd::dot_many(query.data(), index.matrix().data(), n, index.dimension(), dots.data());
  const double qn = std::sqrt(simd::dot(query.data(), query.data(), query.size()));

  std::vector<Hit> hits(n);
  for (std::size_t i = 0; i < n; ++i) {
    double denom = qn * index.norms()[i];
    hits[i] = {i, denom == 0 ? 0.0 : std::clamp(dots[i] / denom, -1.0, 1.0)};
  }
  auto better = [&](const Hit& a, const Hit& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto& ca = index.chunk(a.chunk);
    const auto& cb = index.chunk(b.chunk);
    if (ca.doc_id != cb.doc_id) return ca.doc_id < cb.doc_id;
    return ca.chunk_index < cb.chunk_index;
  };
  RetrievalResult r;
  r.truncated = k > n;
  const std::size_t take = std::min(k, n);
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(), better);
  hits.resize(take);
  r.hits = std::move(hits);
  return r;
}

RetrievalResult retrieve_top_k(std::string_view query, const RetrievalIndex& index, std::size_t k) {
  auto v = embed(query);
  if (v.size() != index.dimension()) throw std::invalid_argument("query dimension does not match the index");
  return retrieve_top_k(std::span<const double>(v), index, k);
}

}  // namespace tbstream::reason
