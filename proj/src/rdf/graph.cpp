#include <charconv>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "tbstream/rdf/graph.hpp"

namespace tbstream::rdf {

namespace {

bool is_numeric_datatype(std::string_view dt) {
  return dt == iri::kXsdInteger || dt == iri::kXsdDecimal || dt == iri::kXsdDouble ||
         dt == "http://www.w3.org/2001/XMLSchema#float" ||
         dt == "http://www.w3.org/2001/XMLSchema#int" ||
         dt == "http://www.w3.org/2001/XMLSchema#long" ||
         dt == "http://www.w3.org/2001/XMLSchema#nonNegativeInteger";
}

// Permutes an SPO triple into the key order of `order`, and back.
IdTriple to_key(const IdTriple& spo, IndexOrder order) {
  switch (order) {
    case IndexOrder::SPO: return spo;
    case IndexOrder::POS: return {spo[1], spo[2], spo[0]};
    case IndexOrder::OSP: return {spo[2], spo[0], spo[1]};
  }
  return spo;
}

IdTriple from_key(const IdTriple& key, IndexOrder order) {
  switch (order) {
    case IndexOrder::SPO: return key;
    case IndexOrder::POS: return {key[2], key[0], key[1]};
    case IndexOrder::OSP: return {key[1], key[2], key[0]};
  }
  return key;
}

}  // namespace

std::optional<double> Term::numeric() const {
  if (kind != TermKind::Literal || !is_numeric_datatype(datatype)) return std::nullopt;
  double v = 0;
  const char* b = value.data();
  const char* e = b + value.size();
  if (b != e && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr != e) return std::nullopt;
  return v;
}

std::size_t TermHash::operator()(const Term& t) const noexcept {
  std::size_t h = std::hash<std::string>{}(t.value);
  h ^= std::hash<std::string>{}(t.datatype) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  h ^= std::hash<std::string>{}(t.lang) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h ^ static_cast<std::size_t>(t.kind);
}

void validate(const Triple& t) {
  if (t.subject.is_literal()) throw std::invalid_argument("literal in subject position");
  if (!t.predicate.is_iri()) throw std::invalid_argument("predicate must be an IRI");
  for (const Term* term : {&t.subject, &t.predicate, &t.object}) {
    if (term->is_iri() && term->value.find(':') == std::string::npos) {
      throw std::invalid_argument("IRI is not absolute: " + term->value);
    }
    if (!term->is_literal() && (!term->datatype.empty() || !term->lang.empty())) {
      throw std::invalid_argument("datatype/lang on a non-literal");
    }
  }
  if (!t.object.datatype.empty() && !t.object.lang.empty()) {
    throw std::invalid_argument("literal with both datatype and language");
  }
}

std::string_view local_name(std::string_view iri) {
  auto pos = iri.find_last_of("#/");
  return pos == std::string_view::npos ? iri : iri.substr(pos + 1);
}

Graph::Graph(const Graph& other) {
  std::shared_lock lock(other.mutex_);
  terms_ = other.terms_;
  ids_ = other.ids_;
  spo_ = other.spo_;
  pos_ = other.pos_;
  osp_ = other.osp_;
}

Graph& Graph::operator=(const Graph& other) {
  if (this == &other) return *this;
  Graph copy(other);
  *this = std::move(copy);
  return *this;
}

Graph::Graph(Graph&& other) noexcept {
  std::unique_lock lock(other.mutex_);
  terms_ = std::move(other.terms_);
  ids_ = std::move(other.ids_);
  spo_ = std::move(other.spo_);
  pos_ = std::move(other.pos_);
  osp_ = std::move(other.osp_);
}

Graph& Graph::operator=(Graph&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_, other.mutex_);
  terms_ = std::move(other.terms_);
  ids_ = std::move(other.ids_);
  spo_ = std::move(other.spo_);
  pos_ = std::move(other.pos_);
  osp_ = std::move(other.osp_);
  return *this;
}

TermId Graph::intern(const Term& t) {
  auto it = ids_.find(t);
  if (it != ids_.end()) return it->second;
  auto id = static_cast<TermId>(terms_.size());
  terms_.push_back(t);
  ids_.emplace(t, id);
  return id;
}

std::optional<TermId> Graph::lookup_unlocked(const Term& t) const {
  auto it = ids_.find(t);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

bool Graph::insert(const Triple& t) {
  validate(t);
  std::unique_lock lock(mutex_);
  IdTriple spo{intern(t.subject), intern(t.predicate), intern(t.object)};
  if (!spo_.insert(spo).second) return false;
  pos_.insert(to_key(spo, IndexOrder::POS));
  osp_.insert(to_key(spo, IndexOrder::OSP));
  return true;
}

bool Graph::erase(const Triple& t) {
  std::unique_lock lock(mutex_);
  auto s = lookup_unlocked(t.subject), p = lookup_unlocked(t.predicate),
       o = lookup_unlocked(t.object);
  if (!s || !p || !o) return false;
  IdTriple spo{*s, *p, *o};
  if (!spo_.erase(spo)) return false;
  pos_.erase(to_key(spo, IndexOrder::POS));
  osp_.erase(to_key(spo, IndexOrder::OSP));
  return true;
}

bool Graph::contains(const Triple& t) const {
  std::shared_lock lock(mutex_);
  auto s = lookup_unlocked(t.subject), p = lookup_unlocked(t.predicate),
       o = lookup_unlocked(t.object);
  return s && p && o && spo_.count({*s, *p, *o});
}

std::size_t Graph::size() const {
  std::shared_lock lock(mutex_);
  return spo_.size();
}

void Graph::clear() {
  std::unique_lock lock(mutex_);
  terms_.clear();
  ids_.clear();
  spo_.clear();
  pos_.clear();
  osp_.clear();
}

IndexOrder Graph::index_for(bool s, bool p, bool o) {
  if (s && !p && o) return IndexOrder::OSP;
  if (s) return IndexOrder::SPO;
  if (p) return IndexOrder::POS;
  if (o) return IndexOrder::OSP;
  return IndexOrder::SPO;
}

std::vector<IdTriple> Graph::scan(std::optional<TermId> s, std::optional<TermId> p,
                                  std::optional<TermId> o, IndexOrder order,
                                  std::size_t limit) const {
  const std::set<IdTriple>& index =
      order == IndexOrder::SPO ? spo_ : (order == IndexOrder::POS ? pos_ : osp_);
  std::array<std::optional<TermId>, 3> bound_spo{s, p, o};
  std::array<std::optional<TermId>, 3> key_bound;
  switch (order) {
    case IndexOrder::SPO: key_bound = {s, p, o}; break;
    case IndexOrder::POS: key_bound = {p, o, s}; break;
    case IndexOrder::OSP: key_bound = {o, s, p}; break;
  }
  std::size_t prefix = 0;
  while (prefix < 3 && key_bound[prefix]) ++prefix;

  IdTriple low{0, 0, 0};
  for (std::size_t i = 0; i < prefix; ++i) low[i] = *key_bound[i];

  std::vector<IdTriple> out;
  for (auto it = index.lower_bound(low); it != index.end(); ++it) {
    bool in_prefix = true;
    for (std::size_t i = 0; i < prefix; ++i) {
      if ((*it)[i] != low[i]) {
        in_prefix = false;
        break;
      }
    }
    if (!in_prefix) break;
    IdTriple spo = from_key(*it, order);
    bool ok = true;
    for (std::size_t i = 0; i < 3; ++i) {
      if (bound_spo[i] && spo[i] != *bound_spo[i]) ok = false;
    }
    if (!ok) continue;
    out.push_back(spo);
    if (out.size() >= limit) break;
  }
  return out;
}

std::vector<IdTriple> Graph::match_ids(std::optional<TermId> s, std::optional<TermId> p,
                                       std::optional<TermId> o) const {
  std::shared_lock lock(mutex_);
  return scan(s, p, o, index_for(s.has_value(), p.has_value(), o.has_value()), SIZE_MAX);
}

std::size_t Graph::count_ids(std::optional<TermId> s, std::optional<TermId> p,
                             std::optional<TermId> o) const {
  std::shared_lock lock(mutex_);
  if (!s && !p && !o) return spo_.size();
  return scan(s, p, o, index_for(s.has_value(), p.has_value(), o.has_value()), SIZE_MAX).size();
}

std::vector<Triple> Graph::match(const Pattern& pattern) const {
  return match_with(pattern, index_for(pattern.subject.has_value(), pattern.predicate.has_value(),
                                       pattern.object.has_value()));
}

std::vector<Triple> Graph::match_with(const Pattern& pattern, IndexOrder order) const {
  std::shared_lock lock(mutex_);
  std::optional<TermId> s, p, o;
  if (pattern.subject && !(s = lookup_unlocked(*pattern.subject))) return {};
  if (pattern.predicate && !(p = lookup_unlocked(*pattern.predicate))) return {};
  if (pattern.object && !(o = lookup_unlocked(*pattern.object))) return {};
  std::vector<Triple> out;
  for (const auto& t : scan(s, p, o, order, SIZE_MAX)) {
    out.push_back({terms_[t[0]], terms_[t[1]], terms_[t[2]]});
  }
  return out;
}

std::optional<TermId> Graph::lookup(const Term& t) const {
  std::shared_lock lock(mutex_);
  return lookup_unlocked(t);
}

Term Graph::term(TermId id) const {
  std::shared_lock lock(mutex_);
  return terms_.at(id);
}

std::size_t Graph::term_count() const {
  std::shared_lock lock(mutex_);
  return terms_.size();
}

std::vector<Term> Graph::term_table() const {
  std::shared_lock lock(mutex_);
  return terms_;
}

std::map<std::string, std::size_t> store_stats(const Graph& g) {
  std::map<std::string, std::size_t> counts;
  auto type = g.lookup(Term::iri(std::string(iri::kType)));
  if (!type) return counts;
  auto terms = g.term_table();
  std::unordered_map<TermId, std::vector<TermId>> classes_of;
  for (const auto& t : g.match_ids(std::nullopt, *type, std::nullopt)) {
    classes_of[t[0]].push_back(t[2]);
  }
  for (const auto& t : g.match_ids(std::nullopt, std::nullopt, std::nullopt)) {
    std::set<TermId> touched;
    for (TermId node : {t[0], t[2]}) {
      auto it = classes_of.find(node);
      if (it != classes_of.end()) touched.insert(it->second.begin(), it->second.end());
    }
    for (auto c : touched) ++counts[terms[c].value];
  }
  return counts;
}

}  // namespace tbstream::rdf
