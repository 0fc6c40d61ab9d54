#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tbstream/ingest/clinical_ingest.hpp"
#include "tbstream/rdf/graph.hpp"

namespace tbstream::rdf {

/// One row of the published vocabulary: the predicate name used in rule
/// files and the local name of its RDF property under the data namespace.
struct VocabEntry {
  std::string_view rule_name;
  std::string_view rdf_local;
  std::string_view column;  // source CSV column, empty for derived facts
};

std::span<const VocabEntry> vocabulary();

inline constexpr std::string_view kPatientClass = "Patient";
inline constexpr std::string_view kPatientClassRdf = "TBPatient";

/// Rule predicate -> RDF local name. Unlisted names map to themselves.
std::string rdf_local_for(std::string_view rule_name);
/// RDF local name -> rule predicate. Unlisted names map to themselves.
std::string rule_name_for(std::string_view rdf_local);

std::string rdf_class_for(std::string_view rule_class);
std::string rule_class_for(std::string_view rdf_local);

std::string patient_iri(std::string_view patient_id, std::string_view ns = kDefaultNamespace);

/// Numbers become xsd:integer when integral and xsd:decimal otherwise;
/// booleans become xsd:boolean; strings stay plain literals.
Term value_term(const ingest::ClinicalValue& v);
std::string format_number(double v);

/// Type triple, gender/observed-at/month, 13 symptom triples with "Yes"/"No"
/// objects, plus one triple per clinical fact.
std::vector<Triple> record_to_triples(const ingest::PatientRecord& rec,
                                      std::string_view ns = kDefaultNamespace);

}  // namespace tbstream::rdf
