#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbstream/rdf/graph.hpp"

namespace tbstream::metrics {

struct SchemaCounts {
  std::uint64_t classes = 0;
  std::uint64_t object_properties = 0;
  std::uint64_t data_properties = 0;
  std::uint64_t individuals = 0;
  std::uint64_t subclass_axioms = 0;
  std::uint64_t classes_with_instances = 0;
  std::uint64_t equivalent_class_axioms = 0;
  std::uint64_t disjoint_class_axioms = 0;
  std::uint64_t annotation_properties = 0;

  std::uint64_t properties() const { return object_properties + data_properties; }
  bool operator==(const SchemaCounts&) const = default;
};

/// Declaration-based counts; no inference. Classes, properties and
/// individuals are distinct IRIs typed owl:Class / owl:ObjectProperty /
/// owl:DatatypeProperty / owl:AnnotationProperty. Individuals are subjects
/// typed owl:NamedIndividual or typed by a declared class. Subclass axioms
/// are rdfs:subClassOf triples between two IRIs.
SchemaCounts count_schema(const rdf::Graph& g);

class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Exact num/den, rounded for display.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }
  /// Round-half-up to `decimals` places, computed on the integers.
  double rounded(int decimals = 3) const;
  std::string str(int decimals = 3) const;
};

/// |Prop| / (|SubClass| + |Prop|) with |Prop| = object + data properties;
/// 0 when both are zero.
Ratio relationship_richness(const SchemaCounts& c);
/// Same with object properties only.
Ratio relationship_richness_object(const SchemaCounts& c);
/// The next three throw MetricError when there are no classes.
Ratio attribute_richness(const SchemaCounts& c);
Ratio class_richness(const SchemaCounts& c);
Ratio average_population(const SchemaCounts& c);

struct MetricReport {
  Ratio attribute_richness;
  Ratio class_richness;
  Ratio average_population;
  Ratio relationship_richness;
  Ratio relationship_richness_object;
  std::vector<std::string> warnings;
};

MetricReport compute_metrics(const SchemaCounts& c);

/// {"counts": {...}, "metrics": {...}} with metrics rounded to 3 places.
std::string report_json(const SchemaCounts& c, const MetricReport& m);
SchemaCounts counts_from_json(const std::string& text);

enum class ViolationKind { SubclassCycle, UndeclaredDomain, UndeclaredRange, DisjointMembership };
std::string to_string(ViolationKind k);

struct Violation {
  ViolationKind kind;
  std::vector<std::string> terms;  // IRIs involved
  std::string detail;
};

struct ConsistencyReport {
  std::vector<Violation> violations;
  bool clean() const { return violations.empty(); }
};

/// Structural checks: acyclic subclass graph, declared domain/range classes
/// (XSD and rdfs:Literal ranges are accepted), and no individual directly
/// typed by two classes declared disjoint.
ConsistencyReport consistency_check(const rdf::Graph& g);

}  // namespace tbstream::metrics
