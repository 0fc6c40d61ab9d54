#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tbstream/ingest/clinical_ingest.hpp"
#include "tbstream/rdf/graph.hpp"
#include "tbstream/rules/rule.hpp"

namespace tbstream::rules {

/// Class assertion when `object` is empty, property assertion otherwise.
struct Fact {
  std::string predicate;
  Value subject;
  std::optional<Value> object;

  static Fact cls(std::string name, Value subject) { return {std::move(name), std::move(subject), std::nullopt}; }
  static Fact prop(std::string name, Value subject, Value object) {
    return {std::move(name), std::move(subject), std::move(object)};
  }
  bool is_class() const { return !object.has_value(); }
  std::string repr() const;

  auto operator<=>(const Fact&) const = default;
  bool operator==(const Fact&) const = default;
};

class FactBase {
 public:
  FactBase() = default;
  FactBase(std::initializer_list<Fact> facts) : facts_(facts) {}

  bool add(Fact f) { return facts_.insert(std::move(f)).second; }
  bool contains(const Fact& f) const { return facts_.count(f) > 0; }
  std::size_t size() const { return facts_.size(); }
  bool empty() const { return facts_.empty(); }
  auto begin() const { return facts_.begin(); }
  auto end() const { return facts_.end(); }
  const std::set<Fact>& facts() const { return facts_; }
  void merge(const FactBase& other) { facts_.insert(other.facts_.begin(), other.facts_.end()); }

  bool operator==(const FactBase&) const = default;

 private:
  std::set<Fact> facts_;
};

struct Derivation {
  std::string rule_id;
  std::size_t round = 0;
  std::vector<Fact> actions;  // instantiated consequent of rule_id
};

struct Classification {
  std::string patient;
  std::string label;
  std::string triggering_rule;
  std::vector<Fact> derived_actions;
  Fact fact;

  bool operator==(const Classification&) const = default;
};

struct ApplyResult {
  FactBase facts;
  std::vector<Classification> classifications;
  /// Every derived fact with the smallest rule id that derived it in the
  /// round it first appeared.
  std::map<Fact, Derivation> derivations;
  std::size_t rounds = 0;
};

/// Semi-naive forward chaining to the least fixpoint.
ApplyResult apply_rules(const FactBase& facts, const std::vector<Rule>& rules);

/// Severity rank used to order classifications (lower is more severe).
int severity_rank(std::string_view label);
void sort_classifications(std::vector<Classification>& cs);

inline constexpr std::string_view kPatientClassName = "Patient";

FactBase facts_from_record(const ingest::PatientRecord& rec);
std::vector<Classification> classify_patient(const ingest::PatientRecord& rec,
                                             const std::vector<Rule>& rules,
                                             const ingest::ClinicalFacts& extra = {});

Value value_from_clinical(const ingest::ClinicalValue& v);

/// Facts for every triple whose predicate lives in `ns`; rdf:type triples
/// whose class lives in `ns` become class assertions.
FactBase facts_from_graph(const rdf::Graph& g, std::string_view ns = rdf::kDefaultNamespace);
rdf::Triple fact_to_triple(const Fact& f, std::string_view ns = rdf::kDefaultNamespace);

}  // namespace tbstream::rules
