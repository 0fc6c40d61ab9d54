#include "tbstream/reason/scoring.hpp"

#include <map>

#include "tbstream/reason/retrieval.hpp"

namespace tbstream::reason {

ScoredResponse score_tokens(const std::vector<std::string>& prediction, const std::vector<std::string>& reference) {
  ScoredResponse s;
  if (prediction.empty() || reference.empty()) return s;
  std::map<std::string, std::size_t> ref;
  for (const auto& t : reference) ++ref[t];
  for (const auto& t : prediction) {
    auto it = ref.find(t);
    if (it != ref.end() && it->second > 0) {
      --it->second;
      ++s.overlap;
    }
  }
  if (s.overlap == 0) return s;
  s.precision = static_cast<double>(s.overlap) / static_cast<double>(prediction.size());
  s.recall = static_cast<double>(s.overlap) / static_cast<double>(reference.size());
  s.f1 = 2.0 * static_cast<double>(s.overlap) / static_cast<double>(prediction.size() + reference.size());
  return s;
}

ScoredResponse score_response(std::string_view prediction, std::string_view reference) {
  return score_tokens(normalize_tokens(prediction), normalize_tokens(reference));
}

}  // namespace tbstream::reason
