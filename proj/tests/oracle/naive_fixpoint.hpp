#pragma once

#include <map>
#include <string>
#include <vector>

#include "tbstream/rules/engine.hpp"

namespace oracle {

struct NaiveResult {
  tbstream::rules::FactBase facts;
  std::map<tbstream::rules::Fact, std::string> first_rule;  // derived fact -> smallest rule id in its round
  std::size_t rounds = 0;
};

/// Repeat-until-no-change evaluation: every round re-joins every rule over the
/// whole fact set with plain nested loops, then adds all new facts at once.
NaiveResult naive_fixpoint(const tbstream::rules::FactBase& facts,
                           const std::vector<tbstream::rules::Rule>& rules);

}  // namespace oracle
