#include "tbstream/reason/updates.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tbstream/rdf/vocabulary.hpp"
#include "tbstream/reason/retrieval.hpp"

namespace tbstream::reason {

const std::vector<LexiconEntry>& default_lexicon() {
  static const std::vector<LexiconEntry> lexicon = {
      {"multidrug resistant tuberculosis", "MDR_TB"},
      {"multidrug resistant tb", "MDR_TB"},
      {"latent tb infection", "Latent_TB_Infection"},
      {"tb meningitis", "TB_Meningitis"},
      {"miliary tuberculosis", "Miliary_TB"},
      {"spinal tuberculosis", "Spinal_TB"},
      {"extra pulmonary tb", "Extra_Pulmonary_TB"},
      {"suspected tb", "Suspected_TB"},
      {"severe tb", "Severe_TB"},
      {"contact tracing", "Contact_Tracing"},
      {"directly observed therapy", "Directly_Observed_Therapy"},
      {"sputum smear microscopy", "Sputum_Smear_Microscopy"},
  };
  return lexicon;
}

namespace {

const std::regex kClassCase("[A-Z][A-Za-z0-9]*(_[A-Za-z0-9]+)+");
const std::regex kSnakeCase("[a-z][a-z0-9]*(_[A-Za-z0-9]+)+");

bool is_ident(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

TermKind kind_for(const std::string& name) {
  for (std::string_view p : {"has_", "is_", "undergoes_"}) {
    if (name.rfind(p, 0) == 0) return TermKind::Property;
  }
  return TermKind::Concept;
}

std::string collapse(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::string snippet_at(std::string_view text, std::size_t pos, std::size_t len) {
  std::size_t b = pos > 40 ? pos - 40 : 0;
  std::size_t e = std::min(text.size(), pos + len + 40);
  while (b > 0 && !std::isspace(static_cast<unsigned char>(text[b - 1]))) --b;
  while (e < text.size() && !std::isspace(static_cast<unsigned char>(text[e]))) ++e;
  return collapse(text.substr(b, e - b));
}

std::string rule_key(const rules::Rule& r) { return r.repr(); }

}  // namespace

std::vector<ExtractedTerm> extract_terms(std::string_view text, const std::vector<LexiconEntry>& lexicon) {
  std::map<std::string, ExtractedTerm> found;
  for (std::size_t i = 0; i < text.size();) {
    if (!is_ident(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_ident(text[j])) ++j;
    std::string word(text.substr(i, j - i));
    while (!word.empty() && word.back() == '_') word.pop_back();
    if (!found.count(word) && (std::regex_match(word, kClassCase) || std::regex_match(word, kSnakeCase))) {
      found[word] = {word, kind_for(word), snippet_at(text, i, j - i)};
    }
    i = j;
  }

  auto tokens = normalize_tokens(text);
  for (const auto& entry : lexicon) {
    auto phrase = normalize_tokens(entry.phrase);
    if (phrase.empty() || phrase.size() > tokens.size() || found.count(entry.term)) continue;
    for (std::size_t i = 0; i + phrase.size() <= tokens.size(); ++i) {
      if (!std::equal(phrase.begin(), phrase.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) continue;
      std::size_t b = i >= 6 ? i - 6 : 0;
      std::size_t e = std::min(tokens.size(), i + phrase.size() + 6);
      std::string snip;
      for (std::size_t k = b; k < e; ++k) snip += (k > b ? " " : "") + tokens[k];
      found[entry.term] = {entry.term, kind_for(entry.term), snip};
      break;
    }
  }

  std::vector<ExtractedTerm> out;
  for (auto& [_, t] : found) out.push_back(std::move(t));
  return out;
}

std::vector<std::string> extract_rules(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.find("->") == std::string::npos && line.find("\xE2\x86\x92") == std::string::npos) continue;
    auto t = collapse(line);
    try {
      auto parsed = rules::parse_rules(t, "X");
      if (parsed.empty()) continue;
      for (const auto& r : parsed) rules::validate_rule(r);
      out.push_back(t);
    } catch (const std::exception&) {
      // prose that merely contains an arrow
    }
  }
  return out;
}

std::string to_string(SuggestionKind k) {
  switch (k) {
    case SuggestionKind::AddClass: return "AddClass";
    case SuggestionKind::AddProperty: return "AddProperty";
    case SuggestionKind::AddRule: return "AddRule";
  }
  return "AddClass";
}

std::string to_string(SuggestionStatus s) {
  switch (s) {
    case SuggestionStatus::Pending: return "Pending";
    case SuggestionStatus::Approved: return "Approved";
    case SuggestionStatus::Rejected: return "Rejected";
  }
  return "Pending";
}

std::vector<UpdateSuggestion> suggest_updates(const std::vector<ExtractedTerm>& terms,
                                              const std::vector<std::string>& rule_texts, const rdf::Graph& onto,
                                              const std::vector<rules::Rule>& known_rules,
                                              const std::string& doc_id, std::string_view ns) {
  const rdf::Term type = rdf::Term::iri(std::string(rdf::iri::kType));
  auto declared = [&](const std::string& local) {
    rdf::Term s = rdf::Term::iri(std::string(ns) + local);
    for (std::string_view k : {rdf::iri::kOwlClass, rdf::iri::kObjectProperty, rdf::iri::kDatatypeProperty,
                               rdf::iri::kAnnotationProperty}) {
      if (onto.contains({s, type, rdf::Term::iri(std::string(k))})) return true;
    }
    return false;
  };

  std::vector<UpdateSuggestion> out;
  auto next_id = [&] { return "S" + std::to_string(out.size() + 1); };
  for (TermKind pass : {TermKind::Concept, TermKind::Property}) {
    for (const auto& t : terms) {
      if (t.kind != pass) continue;
      std::string local = pass == TermKind::Concept ? rdf::rdf_class_for(t.name) : rdf::rdf_local_for(t.name);
      if (declared(local) || declared(t.name)) continue;
      UpdateSuggestion s;
      s.id = next_id();
      s.kind = pass == TermKind::Concept ? SuggestionKind::AddClass : SuggestionKind::AddProperty;
      s.payload = t.name;
      s.evidence_doc = doc_id;
      s.evidence_snippet = t.snippet;
      out.push_back(std::move(s));
    }
  }

  std::set<std::string> known;
  for (const auto& r : known_rules) known.insert(rule_key(r));
  for (const auto& text : rule_texts) {
    std::vector<rules::Rule> parsed;
    try {
      parsed = rules::parse_rules(text, "X");
    } catch (const std::exception&) {
      continue;
    }
    bool novel = std::any_of(parsed.begin(), parsed.end(), [&](const rules::Rule& r) { return !known.count(rule_key(r)); });
    if (!novel) continue;
    for (const auto& r : parsed) known.insert(rule_key(r));
    UpdateSuggestion s;
    s.id = next_id();
    s.kind = SuggestionKind::AddRule;
    s.payload = text;
    s.evidence_doc = doc_id;
    s.evidence_snippet = text;
    out.push_back(std::move(s));
  }
  return out;
}

std::string suggestions_json(const std::vector<UpdateSuggestion>& list) {
  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (const auto& s : list) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["kind"] = to_string(s.kind);
    j["payload"] = s.payload;
    j["parent"] = s.parent;
    j["evidence"] = {{"doc", s.evidence_doc}, {"snippet", s.evidence_snippet}};
    j["status"] = to_string(s.status);
    arr.push_back(std::move(j));
  }
  nlohmann::ordered_json root;
  root["suggestions"] = std::move(arr);
  return root.dump(2) + "\n";
}

std::vector<UpdateSuggestion> parse_suggestions(std::string_view text) {
  auto root = nlohmann::json::parse(text);
  std::vector<UpdateSuggestion> out;
  for (const auto& j : root.at("suggestions")) {
    UpdateSuggestion s;
    s.id = j.at("id").get<std::string>();
    auto kind = j.at("kind").get<std::string>();
    if (kind == "AddClass") s.kind = SuggestionKind::AddClass;
    else if (kind == "AddProperty") s.kind = SuggestionKind::AddProperty;
    else if (kind == "AddRule") s.kind = SuggestionKind::AddRule;
    else throw std::invalid_argument("unknown suggestion kind '" + kind + "'");
    s.payload = j.at("payload").get<std::string>();
    s.parent = j.value("parent", "");
    if (j.contains("evidence")) {
      s.evidence_doc = j["evidence"].value("doc", "");
      s.evidence_snippet = j["evidence"].value("snippet", "");
    }
    auto status = j.value("status", "Pending");
    if (status == "Pending") s.status = SuggestionStatus::Pending;
    else if (status == "Approved") s.status = SuggestionStatus::Approved;
    else if (status == "Rejected") s.status = SuggestionStatus::Rejected;
    else throw std::invalid_argument("unknown suggestion status '" + status + "'");
    out.push_back(std::move(s));
  }
  return out;
}

void save_suggestions(const std::filesystem::path& path, const std::vector<UpdateSuggestion>& s) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << suggestions_json(s);
}

std::vector<UpdateSuggestion> load_suggestions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_suggestions(ss.str());
}

ApplyReport apply_updates(const std::vector<UpdateSuggestion>& approved, rdf::Graph& onto,
                          std::vector<rules::Rule>& rule_set, const ApplyOptions& options) {
  std::string not_approved;
  for (const auto& s : approved) {
    if (s.status != SuggestionStatus::Approved) not_approved += " " + s.id + "(" + to_string(s.status) + ")";
  }
  if (!not_approved.empty()) throw UpdateGateError("only Approved suggestions may be applied:" + not_approved);

  ApplyReport report;
  auto iri = [&](const std::string& local) { return rdf::Term::iri(options.ns + local); };
  const rdf::Term type = rdf::Term::iri(std::string(rdf::iri::kType));
  std::vector<rdf::Triple> wanted;
  std::vector<rules::Rule> new_rules;
  std::vector<std::string> rule_blocks;

  for (const auto& s : approved) {
    switch (s.kind) {
      case SuggestionKind::AddClass: {
        auto c = iri(rdf::rdf_class_for(s.payload));
        wanted.push_back({c, type, rdf::Term::iri(std::string(rdf::iri::kOwlClass))});
        if (!s.parent.empty()) {
          wanted.push_back({c, rdf::Term::iri(std::string(rdf::iri::kSubClassOf)), iri(rdf::rdf_class_for(s.parent))});
        }
        break;
      }
      case SuggestionKind::AddProperty: {
        auto p = iri(rdf::rdf_local_for(s.payload));
        wanted.push_back({p, type, rdf::Term::iri(std::string(rdf::iri::kDatatypeProperty))});
        wanted.push_back({p, rdf::Term::iri(std::string(rdf::iri::kDomain)), iri(options.domain_class)});
        break;
      }
      case SuggestionKind::AddRule: {
        std::string block = "@id UPD-" + s.id + "\n@source Update " + s.id;
        if (!s.evidence_doc.empty()) block += ": " + s.evidence_doc;
        block += "\n" + s.payload + "\n";
        try {
          auto parsed = rules::parse_rules(block, "UPD-");
          for (const auto& r : parsed) rules::validate_rule(r);
          new_rules.insert(new_rules.end(), parsed.begin(), parsed.end());
          rule_blocks.push_back(block);
        } catch (const std::exception& e) {
          report.errors.push_back(s.id + ": " + e.what());
        }
        break;
      }
    }
  }

  std::vector<rdf::Triple> inserted;
  for (const auto& t : wanted) {
    if (onto.insert(t)) inserted.push_back(t);
  }
  report.consistency = metrics::consistency_check(onto);
  if (!report.errors.empty() || !report.consistency.clean()) {
    for (const auto& t : inserted) onto.erase(t);
    report.rolled_back = true;
    for (const auto& v : report.consistency.violations) report.errors.push_back(v.detail);
    return report;
  }

  if (options.rule_file && !rule_blocks.empty()) {
    std::ofstream out(*options.rule_file, std::ios::app);
    if (!out) {
      for (const auto& t : inserted) onto.erase(t);
      report.rolled_back = true;
      report.errors.push_back("cannot append to " + options.rule_file->string());
      return report;
    }
    for (const auto& b : rule_blocks) out << "\n" << b;
  }
  rule_set.insert(rule_set.end(), new_rules.begin(), new_rules.end());
  report.added = std::move(inserted);
  report.added_rules = std::move(new_rules);
  report.applied = true;
  return report;
}

}  // namespace tbstream::reason
