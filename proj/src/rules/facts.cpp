#include "tbstream/rdf/vocabulary.hpp"
#include "tbstream/rules/engine.hpp"

namespace tbstream::rules {

Value value_from_clinical(const ingest::ClinicalValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return Value::num(*d);
  if (const auto* b = std::get_if<bool>(&v)) return Value::boolean(*b);
  return Value::string(std::get<std::string>(v));
}

FactBase facts_from_record(const ingest::PatientRecord& rec) {
  FactBase fb;
  Value p = Value::individual(rec.patient_id);
  fb.add(Fact::cls(std::string(kPatientClassName), p));
  auto vocab = rdf::vocabulary();
  for (std::size_t i = 0; i < ingest::kSymptomCount; ++i) {
    fb.add(Fact::prop(std::string(vocab[i].rule_name), p, Value::string(rec.symptoms[i] ? "Yes" : "No")));
  }
  for (const auto& [name, value] : rec.facts) fb.add(Fact::prop(name, p, value_from_clinical(value)));
  return fb;
}

std::vector<Classification> classify_patient(const ingest::PatientRecord& rec,
                                             const std::vector<Rule>& rules,
                                             const ingest::ClinicalFacts& extra) {
  FactBase fb = facts_from_record(rec);
  Value p = Value::individual(rec.patient_id);
  for (const auto& [name, value] : extra) fb.add(Fact::prop(name, p, value_from_clinical(value)));
  return apply_rules(fb, rules).classifications;
}

namespace {

bool in_ns(const rdf::Term& t, std::string_view ns) {
  return t.is_iri() && t.value.size() > ns.size() && t.value.compare(0, ns.size(), ns) == 0;
}

Value node_value(const rdf::Term& t, std::string_view ns) {
  if (in_ns(t, ns)) return Value::individual(t.value.substr(ns.size()));
  if (t.is_blank()) return Value::individual("_:" + t.value);
  return Value::individual(t.value);
}

rdf::Term node_term(const Value& v, std::string_view ns) {
  if (v.text.rfind("_:", 0) == 0) return rdf::Term::blank(v.text.substr(2));
  if (v.text.find(':') != std::string::npos) return rdf::Term::iri(v.text);
  return rdf::Term::iri(std::string(ns) + v.text);
}

}  // namespace

FactBase facts_from_graph(const rdf::Graph& g, std::string_view ns) {
  FactBase fb;
  const std::string type(rdf::iri::kType);
  for (const auto& t : g.triples()) {
    if (t.predicate.value == type) {
      if (in_ns(t.object, ns)) {
        fb.add(Fact::cls(rdf::rule_class_for(t.object.value.substr(ns.size())), node_value(t.subject, ns)));
      }
      continue;
    }
    if (!in_ns(t.predicate, ns)) continue;
    std::string pred = rdf::rule_name_for(t.predicate.value.substr(ns.size()));
    Value obj;
    if (t.object.is_literal()) {
      if (auto n = t.object.numeric()) {
        obj = Value::num(*n);
      } else if (t.object.datatype == rdf::iri::kXsdBoolean) {
        obj = Value::boolean(t.object.value == "true" || t.object.value == "1");
      } else {
        obj = Value::string(t.object.value);
      }
    } else {
      obj = node_value(t.object, ns);
    }
    fb.add(Fact::prop(std::move(pred), node_value(t.subject, ns), std::move(obj)));
  }
  return fb;
}

rdf::Triple fact_to_triple(const Fact& f, std::string_view ns) {
  const std::string base(ns);
  rdf::Term s = node_term(f.subject, ns);
  if (f.is_class()) {
    return {s, rdf::Term::iri(std::string(rdf::iri::kType)), rdf::Term::iri(base + rdf::rdf_class_for(f.predicate))};
  }
  rdf::Term p = rdf::Term::iri(base + rdf::rdf_local_for(f.predicate));
  const Value& v = *f.object;
  switch (v.kind) {
    case ValueKind::Individual: return {s, p, node_term(v, ns)};
    case ValueKind::String: return {s, p, rdf::Term::literal(v.text)};
    case ValueKind::Bool: return {s, p, rdf::Term::typed(v.text, rdf::iri::kXsdBoolean)};
    case ValueKind::Number: return {s, p, rdf::value_term(v.number)};
  }
  return {s, p, rdf::Term::literal(v.text)};
}

}  // namespace tbstream::rules
