#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tbstream/metrics/metrics.hpp"
#include "tbstream/rdf/graph.hpp"
#include "tbstream/rules/rule.hpp"

namespace tbstream::reason {

enum class TermKind { Concept, Property };

struct ExtractedTerm {
  std::string name;  // Class_Case or snake_case identifier
  TermKind kind = TermKind::Concept;
  std::string snippet;  // surrounding words, for evidence

  bool operator==(const ExtractedTerm&) const = default;
};

struct LexiconEntry {
  std::string phrase;  // normalized words, e.g. "multidrug resistant tb"
  std::string term;    // e.g. "MDR_TB"
};

/// Built-in clinical phrases recognised by extract_terms.
const std::vector<LexiconEntry>& default_lexicon();

/// Identifiers in Class_Case (Upper_Word...) or snake_case with at least one
/// underscore, plus lexicon phrase matches. has_/is_/undergoes_ prefixes
/// mark properties; everything else is a concept. Sorted by name, unique.
std::vector<ExtractedTerm> extract_terms(std::string_view text,
                                         const std::vector<LexiconEntry>& lexicon = default_lexicon());

/// Lines of the form "antecedent -> consequent" that parse as rules.
std::vector<std::string> extract_rules(std::string_view text);

enum class SuggestionKind { AddClass, AddProperty, AddRule };
enum class SuggestionStatus { Pending, Approved, Rejected };

std::string to_string(SuggestionKind k);
std::string to_string(SuggestionStatus s);

struct UpdateSuggestion {
  std::string id;  // S1, S2, ...
  SuggestionKind kind = SuggestionKind::AddClass;
  std::string payload;  // term name or rule text
  std::string parent;   // AddClass only; empty = top level
  std::string evidence_doc;
  std::string evidence_snippet;
  SuggestionStatus status = SuggestionStatus::Pending;

  bool operator==(const UpdateSuggestion&) const = default;
};

/// Terms whose IRI is not declared as a class or property in `onto`, and
/// rules whose text is not already among `known_rules`, each as one
/// Pending suggestion.
std::vector<UpdateSuggestion> suggest_updates(const std::vector<ExtractedTerm>& terms,
                                              const std::vector<std::string>& rule_texts, const rdf::Graph& onto,
                                              const std::vector<rules::Rule>& known_rules,
                                              const std::string& doc_id,
                                              std::string_view ns = rdf::kDefaultNamespace);

/// {"suggestions": [{id, kind, payload, parent, evidence: {doc, snippet}, status}]}
std::string suggestions_json(const std::vector<UpdateSuggestion>& s);
std::vector<UpdateSuggestion> parse_suggestions(std::string_view json);
void save_suggestions(const std::filesystem::path& path, const std::vector<UpdateSuggestion>& s);
std::vector<UpdateSuggestion> load_suggestions(const std::filesystem::path& path);

class UpdateGateError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ApplyReport {
  bool applied = false;
  bool rolled_back = false;
  std::vector<rdf::Triple> added;          // empty after a rollback
  std::vector<rules::Rule> added_rules;    // empty after a rollback
  metrics::ConsistencyReport consistency;  // of the candidate ontology
  std::vector<std::string> errors;
};

struct ApplyOptions {
  std::string ns = std::string(rdf::kDefaultNamespace);
  std::string domain_class = "TBPatient";  // domain of added properties
  /// When set, approved rules are appended here after a clean check.
  std::optional<std::filesystem::path> rule_file;
};

/// Throws UpdateGateError if any suggestion is not Approved. Asserts the
/// batch into `onto` and `rule_set`, runs consistency_check, and undoes the
/// whole batch on any violation or invalid rule.
ApplyReport apply_updates(const std::vector<UpdateSuggestion>& approved, rdf::Graph& onto,
                          std::vector<rules::Rule>& rule_set, const ApplyOptions& options = {});

}  // namespace tbstream::reason
