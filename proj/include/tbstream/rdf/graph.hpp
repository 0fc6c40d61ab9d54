#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tbstream::rdf {

namespace iri {
inline constexpr std::string_view kRdf = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
inline constexpr std::string_view kRdfs = "http://www.w3.org/2000/01/rdf-schema#";
inline constexpr std::string_view kXsd = "http://www.w3.org/2001/XMLSchema#";
inline constexpr std::string_view kOwl = "http://www.w3.org/2002/07/owl#";

inline constexpr std::string_view kType = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
inline constexpr std::string_view kSubClassOf = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
inline constexpr std::string_view kDomain = "http://www.w3.org/2000/01/rdf-schema#domain";
inline constexpr std::string_view kRange = "http://www.w3.org/2000/01/rdf-schema#range";
inline constexpr std::string_view kLabel = "http://www.w3.org/2000/01/rdf-schema#label";
inline constexpr std::string_view kOwlClass = "http://www.w3.org/2002/07/owl#Class";
inline constexpr std::string_view kObjectProperty = "http://www.w3.org/2002/07/owl#ObjectProperty";
inline constexpr std::string_view kDatatypeProperty = "http://www.w3.org/2002/07/owl#DatatypeProperty";
inline constexpr std::string_view kAnnotationProperty = "http://www.w3.org/2002/07/owl#AnnotationProperty";
inline constexpr std::string_view kNamedIndividual = "http://www.w3.org/2002/07/owl#NamedIndividual";
inline constexpr std::string_view kEquivalentClass = "http://www.w3.org/2002/07/owl#equivalentClass";
inline constexpr std::string_view kDisjointWith = "http://www.w3.org/2002/07/owl#disjointWith";
inline constexpr std::string_view kXsdString = "http://www.w3.org/2001/XMLSchema#string";
inline constexpr std::string_view kXsdInteger = "http://www.w3.org/2001/XMLSchema#integer";
inline constexpr std::string_view kXsdDecimal = "http://www.w3.org/2001/XMLSchema#decimal";
inline constexpr std::string_view kXsdDouble = "http://www.w3.org/2001/XMLSchema#double";
inline constexpr std::string_view kXsdBoolean = "http://www.w3.org/2001/XMLSchema#boolean";
inline constexpr std::string_view kXsdDateTime = "http://www.w3.org/2001/XMLSchema#dateTime";
}  // namespace iri

/// Default namespace for patient data and the ontology (`ex:`).
inline constexpr std::string_view kDefaultNamespace = "http://tbstream.example/onto#";

enum class TermKind : std::uint8_t { Iri, Literal, Blank };

struct Term {
  TermKind kind = TermKind::Iri;
  std::string value;
  std::string datatype;  // literals only; empty for plain literals
  std::string lang;      // literals only

  static Term iri(std::string value) { return {TermKind::Iri, std::move(value), {}, {}}; }
  static Term blank(std::string label) { return {TermKind::Blank, std::move(label), {}, {}}; }
  static Term literal(std::string value) { return {TermKind::Literal, std::move(value), {}, {}}; }
  static Term typed(std::string value, std::string_view datatype) {
    return {TermKind::Literal, std::move(value), std::string(datatype), {}};
  }
  static Term lang_literal(std::string value, std::string lang) {
    return {TermKind::Literal, std::move(value), {}, std::move(lang)};
  }

  bool is_iri() const { return kind == TermKind::Iri; }
  bool is_literal() const { return kind == TermKind::Literal; }
  bool is_blank() const { return kind == TermKind::Blank; }

  /// Numeric value of xsd numeric literals.
  std::optional<double> numeric() const;

  auto operator<=>(const Term&) const = default;
  bool operator==(const Term&) const = default;
};

struct TermHash {
  std::size_t operator()(const Term& t) const noexcept;
};

struct Triple {
  Term subject;
  Term predicate;
  Term object;

  auto operator<=>(const Triple&) const = default;
  bool operator==(const Triple&) const = default;
};

/// Throws std::invalid_argument when a triple violates term-position rules.
void validate(const Triple& t);

/// Local part of an IRI (after the last '#' or '/').
std::string_view local_name(std::string_view iri);

using TermId = std::uint32_t;
using IdTriple = std::array<TermId, 3>;  // subject, predicate, object

enum class IndexOrder { SPO, POS, OSP };

struct Pattern {
  std::optional<Term> subject;
  std::optional<Term> predicate;
  std::optional<Term> object;
};

/// In-memory triple set with SPO/POS/OSP indexes over interned terms.
/// Reads take a shared lock and writes an exclusive one, so each operation
/// observes a consistent snapshot.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph& other);
  Graph& operator=(const Graph& other);
  Graph(Graph&& other) noexcept;
  Graph& operator=(Graph&& other) noexcept;

  bool insert(const Triple& t);
  template <typename It>
  std::size_t insert(It first, It last) {
    std::size_t added = 0;
    for (; first != last; ++first) added += insert(*first) ? 1 : 0;
    return added;
  }
  bool erase(const Triple& t);
  bool contains(const Triple& t) const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  void clear();

  std::vector<Triple> match(const Pattern& pattern) const;
  /// Same as match() but forces a specific index (used to check coherence).
  std::vector<Triple> match_with(const Pattern& pattern, IndexOrder order) const;
  std::vector<Triple> triples() const { return match({}); }

  /// Index chosen for a pattern with the given bound positions.
  static IndexOrder index_for(bool s, bool p, bool o);

  std::optional<TermId> lookup(const Term& t) const;
  Term term(TermId id) const;
  std::size_t term_count() const;

  /// Id-level scan for the query evaluator; unbound positions are nullopt.
  std::vector<IdTriple> match_ids(std::optional<TermId> s, std::optional<TermId> p,
                                  std::optional<TermId> o) const;
  /// Number of triples matching the pattern (for join ordering).
  std::size_t count_ids(std::optional<TermId> s, std::optional<TermId> p,
                        std::optional<TermId> o) const;

  /// Every term in id order; index == TermId.
  std::vector<Term> term_table() const;

 private:
  TermId intern(const Term& t);
  std::optional<TermId> lookup_unlocked(const Term& t) const;
  std::vector<IdTriple> scan(std::optional<TermId> s, std::optional<TermId> p,
                             std::optional<TermId> o, IndexOrder order, std::size_t limit) const;

  mutable std::shared_mutex mutex_;
  std::vector<Term> terms_;
  std::unordered_map<Term, TermId, TermHash> ids_;
  std::set<IdTriple> spo_;
  std::set<IdTriple> pos_;
  std::set<IdTriple> osp_;
};

/// Per-class link counts: for each rdf:type class, the number of triples
/// whose subject or object is an instance of that class.
std::map<std::string, std::size_t> store_stats(const Graph& g);

}  // namespace tbstream::rdf
