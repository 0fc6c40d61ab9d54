#include "tbstream/metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <set>

#include "json.hpp"

namespace tbstream::metrics {

namespace {

using rdf::Term;

Term iri(std::string_view v) { return Term::iri(std::string(v)); }

std::set<std::string> typed_subjects(const rdf::Graph& g, std::string_view type) {
  std::set<std::string> out;
  for (const auto& t : g.match({std::nullopt, iri(rdf::iri::kType), iri(type)})) {
    if (t.subject.is_iri()) out.insert(t.subject.value);
  }
  return out;
}

Ratio safe_ratio(std::uint64_t num, std::uint64_t den, const char* what) {
  if (den == 0) throw MetricError(std::string(what) + " needs at least one class");
  return {num, den};
}

}  // namespace

SchemaCounts count_schema(const rdf::Graph& g) {
  SchemaCounts c;
  auto classes = typed_subjects(g, rdf::iri::kOwlClass);
  c.classes = classes.size();
  c.object_properties = typed_subjects(g, rdf::iri::kObjectProperty).size();
  c.data_properties = typed_subjects(g, rdf::iri::kDatatypeProperty).size();
  c.annotation_properties = typed_subjects(g, rdf::iri::kAnnotationProperty).size();

  std::set<std::string> individuals = typed_subjects(g, rdf::iri::kNamedIndividual);
  std::set<std::string> instantiated;
  for (const auto& t : g.match({std::nullopt, iri(rdf::iri::kType), std::nullopt})) {
    if (!t.object.is_iri() || !classes.count(t.object.value)) continue;
    if (!t.subject.is_blank()) individuals.insert(t.subject.value);
    instantiated.insert(t.object.value);
  }
  c.individuals = individuals.size();
  c.classes_with_instances = instantiated.size();

  for (const auto& t : g.match({std::nullopt, iri(rdf::iri::kSubClassOf), std::nullopt})) {
    if (t.subject.is_iri() && t.object.is_iri()) ++c.subclass_axioms;
  }
  c.equivalent_class_axioms = g.match({std::nullopt, iri(rdf::iri::kEquivalentClass), std::nullopt}).size();
  c.disjoint_class_axioms = g.match({std::nullopt, iri(rdf::iri::kDisjointWith), std::nullopt}).size();
  return c;
}

double Ratio::rounded(int decimals) const {
  if (den == 0) return 0.0;
  std::uint64_t scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;
  // floor(num * scale / den + 1/2) without leaving the integers
  std::uint64_t q = (2 * num * scale + den) / (2 * den);
  return static_cast<double>(q) / static_cast<double>(scale);
}

std::string Ratio::str(int decimals) const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, rounded(decimals));
  return buf;
}

Ratio relationship_richness(const SchemaCounts& c) {
  std::uint64_t den = c.subclass_axioms + c.properties();
  if (den == 0) return {0, 1};
  return {c.properties(), den};
}

Ratio relationship_richness_object(const SchemaCounts& c) {
  std::uint64_t den = c.subclass_axioms + c.object_properties;
  if (den == 0) return {0, 1};
  return {c.object_properties, den};
}

Ratio attribute_richness(const SchemaCounts& c) { return safe_ratio(c.data_properties, c.classes, "attribute richness"); }

Ratio class_richness(const SchemaCounts& c) {
  return safe_ratio(c.classes_with_instances, c.classes, "class richness");
}

Ratio average_population(const SchemaCounts& c) { return safe_ratio(c.individuals, c.classes, "average population"); }

MetricReport compute_metrics(const SchemaCounts& c) {
  MetricReport m;
  m.attribute_richness = attribute_richness(c);
  m.class_richness = class_richness(c);
  m.average_population = average_population(c);
  m.relationship_richness = relationship_richness(c);
  m.relationship_richness_object = relationship_richness_object(c);
  if (c.subclass_axioms + c.properties() == 0) {
    m.warnings.push_back("no subclass axioms or properties; relationship richness set to 0");
  }
  return m;
}

namespace {

nlohmann::ordered_json counts_json(const SchemaCounts& c) {
  nlohmann::ordered_json j;
  j["classes"] = c.classes;
  j["object_properties"] = c.object_properties;
  j["data_properties"] = c.data_properties;
  j["individuals"] = c.individuals;
  j["subclass_axioms"] = c.subclass_axioms;
  j["classes_with_instances"] = c.classes_with_instances;
  j["equivalent_class_axioms"] = c.equivalent_class_axioms;
  j["disjoint_class_axioms"] = c.disjoint_class_axioms;
  j["annotation_properties"] = c.annotation_properties;
  return j;
}

nlohmann::ordered_json ratio_json(const Ratio& r) {
  nlohmann::ordered_json j;
  j["value"] = r.rounded(3);
  j["num"] = r.num;
  j["den"] = r.den;
  return j;
}

}  // namespace

std::string report_json(const SchemaCounts& c, const MetricReport& m) {
  nlohmann::ordered_json j;
  j["counts"] = counts_json(c);
  nlohmann::ordered_json mj;
  mj["attribute_richness"] = ratio_json(m.attribute_richness);
  mj["class_richness"] = ratio_json(m.class_richness);
  mj["average_population"] = ratio_json(m.average_population);
  mj["relationship_richness"] = ratio_json(m.relationship_richness);
  mj["relationship_richness_object"] = ratio_json(m.relationship_richness_object);
  j["metrics"] = mj;
  j["warnings"] = m.warnings;
  return j.dump(2);
}

SchemaCounts counts_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  if (j.contains("counts")) j = j["counts"];
  SchemaCounts c;
  auto get = [&](const char* k, std::uint64_t& v) {
    if (j.contains(k)) v = j[k].get<std::uint64_t>();
  };
  get("classes", c.classes);
  get("object_properties", c.object_properties);
  get("data_properties", c.data_properties);
  get("individuals", c.individuals);
  get("subclass_axioms", c.subclass_axioms);
  get("classes_with_instances", c.classes_with_instances);
  get("equivalent_class_axioms", c.equivalent_class_axioms);
  get("disjoint_class_axioms", c.disjoint_class_axioms);
  get("annotation_properties", c.annotation_properties);
  return c;
}

std::string to_string(ViolationKind k) {
  switch (k) {
    case ViolationKind::SubclassCycle: return "subclass-cycle";
    case ViolationKind::UndeclaredDomain: return "undeclared-domain";
    case ViolationKind::UndeclaredRange: return "undeclared-range";
    case ViolationKind::DisjointMembership: return "disjoint-membership";
  }
  return "unknown";
}

ConsistencyReport consistency_check(const rdf::Graph& g) {
  ConsistencyReport report;

  // Tarjan SCC over the named subclass graph.
  std::map<std::string, std::vector<std::string>> edges;
  std::set<std::string> self_loops;
  for (const auto& t : g.match({std::nullopt, iri(rdf::iri::kSubClassOf), std::nullopt})) {
    if (!t.subject.is_iri() || !t.object.is_iri()) continue;
    edges[t.subject.value].push_back(t.object.value);
    edges[t.object.value];
    if (t.subject.value == t.object.value) self_loops.insert(t.subject.value);
  }
  std::map<std::string, int> index, low;
  std::set<std::string> on_stack;
  std::vector<std::string> stack;
  int counter = 0;
  std::function<void(const std::string&)> strongconnect = [&](const std::string& v) {
    index[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack.insert(v);
    for (const auto& w : edges[v]) {
      if (!index.count(w)) {
        strongconnect(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack.count(w)) {
        low[v] = std::min(low[v], index[w]);
      }
    }
    if (low[v] != index[v]) return;
    std::vector<std::string> scc;
    std::string w;
    do {
      w = stack.back();
      stack.pop_back();
      on_stack.erase(w);
      scc.push_back(w);
    } while (w != v);
    if (scc.size() > 1 || self_loops.count(v)) {
      std::sort(scc.begin(), scc.end());
      std::string detail = "subclass cycle through";
      for (const auto& c : scc) detail += " " + std::string(rdf::local_name(c));
      report.violations.push_back({ViolationKind::SubclassCycle, scc, detail});
    }
  };
  for (const auto& [v, _] : edges) {
    if (!index.count(v)) strongconnect(v);
  }

  auto classes = typed_subjects(g, rdf::iri::kOwlClass);
  auto check_refs = [&](std::string_view pred, ViolationKind kind, const char* what) {
    for (const auto& t : g.match({std::nullopt, iri(pred), std::nullopt})) {
      if (!t.object.is_iri()) continue;
      const std::string& c = t.object.value;
      if (c.rfind(rdf::iri::kXsd, 0) == 0 || c == std::string(rdf::iri::kRdfs) + "Literal") continue;
      if (classes.count(c)) continue;
      report.violations.push_back({kind, {t.subject.value, c},
                                   std::string(rdf::local_name(t.subject.value)) + " has undeclared " + what + " " +
                                       std::string(rdf::local_name(c))});
    }
  };
  check_refs(rdf::iri::kDomain, ViolationKind::UndeclaredDomain, "domain");
  check_refs(rdf::iri::kRange, ViolationKind::UndeclaredRange, "range");

  for (const auto& d : g.match({std::nullopt, iri(rdf::iri::kDisjointWith), std::nullopt})) {
    if (!d.object.is_iri()) continue;
    std::set<std::string> a;
    for (const auto& t : g.match({std::nullopt, iri(rdf::iri::kType), d.subject})) a.insert(t.subject.value);
    for (const auto& t : g.match({std::nullopt, iri(rdf::iri::kType), d.object})) {
      if (!a.count(t.subject.value)) continue;
      report.violations.push_back({ViolationKind::DisjointMembership,
                                   {t.subject.value, d.subject.value, d.object.value},
                                   std::string(rdf::local_name(t.subject.value)) + " is typed by disjoint classes " +
                                       std::string(rdf::local_name(d.subject.value)) + " and " +
                                       std::string(rdf::local_name(d.object.value))});
    }
  }
  return report;
}

}  // namespace tbstream::metrics
