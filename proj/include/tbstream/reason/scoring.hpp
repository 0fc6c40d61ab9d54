#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tbstream::reason {

struct ScoredResponse {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t overlap = 0;  // multiset intersection size
};

/// Multiset token overlap over normalized tokens. P = overlap/|pred|,
/// R = overlap/|ref|, F1 = 2PR/(P+R) or 0. Empty prediction or reference
/// scores 0 throughout.
ScoredResponse score_response(std::string_view prediction, std::string_view reference);
ScoredResponse score_tokens(const std::vector<std::string>& prediction, const std::vector<std::string>& reference);

}  // namespace tbstream::reason
