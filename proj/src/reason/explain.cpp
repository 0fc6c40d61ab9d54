#include "tbstream/reason/explain.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "json.hpp"

namespace tbstream::reason {

HttpCompletionService::HttpCompletionService(std::string url, std::chrono::milliseconds timeout)
    : url_(std::move(url)), timeout_(timeout) {}

std::string HttpCompletionService::complete(const std::string& prompt) {
  static const std::regex kUrl(R"(http://([^/:]+)(?::(\d+))?(/.*)?)");
  std::smatch m;
  if (!std::regex_match(url_, m, kUrl)) throw CompletionError("unsupported completion URL " + url_);
  const std::string host = m[1];
  const int port = m[2].matched ? std::stoi(m[2]) : 80;
  const std::string path = m[3].matched ? std::string(m[3]) : "/";

  httplib::Client client(host, port);
  auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  nlohmann::json body{{"prompt", prompt}};
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) throw CompletionError("completion service unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw CompletionError("completion service returned HTTP " + std::to_string(res->status));
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_object()) {
    for (const char* k : {"text", "completion"}) {
      if (j.contains(k) && j[k].is_string()) return j[k].get<std::string>();
    }
    throw CompletionError("completion response has no text field");
  }
  return res->body;
}

std::unique_ptr<HttpCompletionService> HttpCompletionService::from_env() {
  const char* url = std::getenv("TBSTREAM_COMPLETION_URL");
  if (!url || !*url) return nullptr;
  std::chrono::milliseconds timeout{2000};
  if (const char* t = std::getenv("TBSTREAM_COMPLETION_TIMEOUT_MS"); t && *t) timeout = std::chrono::milliseconds{std::atol(t)};
  return std::make_unique<HttpCompletionService>(url, timeout);
}

PrecautionSet parse_precautions(std::string_view text) {
  auto j = nlohmann::json::parse(text);
  PrecautionSet p;
  p.source = j.value("source", "");
  auto sev = j.value("min_severity", "Warning");
  if (sev == "Info") p.min_severity = cep::Severity::Info;
  else if (sev == "Warning") p.min_severity = cep::Severity::Warning;
  else if (sev == "Critical") p.min_severity = cep::Severity::Critical;
  else throw std::invalid_argument("unknown severity '" + sev + "'");
  p.actions = j.at("actions").get<std::vector<std::string>>();
  return p;
}

PrecautionSet load_precautions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_precautions(ss.str());
}

namespace {

std::string words(const std::string& label) {
  std::string out = label;
  for (char& c : out) {
    if (c == '_') c = ' ';
  }
  return out;
}

std::string summary_for(const std::string& label) {
  auto has = [&](const char* w) { return label.find(w) != std::string::npos; };
  if (has("Recovery") || has("Cured")) return "Findings are consistent with recovery; continue follow-up until treatment completion is documented.";
  if (has("Severe") || has("Critical")) return "Findings indicate severe disease; arrange urgent clinical review and supportive care.";
  if (has("Confirmed")) return "Bacteriological evidence confirms pulmonary disease; start the standard treatment regimen.";
  if (has("Extra_Pulmonary")) return "Findings point to disease outside the lungs; refer for site-specific investigation.";
  if (has("Suspected")) return "Symptoms meet the screening criteria; confirm with diagnostic testing before treatment.";
  return "Rule conditions were met; review the derived actions below.";
}

const rules::Rule* find_rule(const std::vector<rules::Rule>& rules, const std::string& id) {
  for (const auto& r : rules) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

std::string citation(const cep::Alert& a, const std::vector<rules::Rule>& rules) {
  std::string out = "rule " + a.rule_id;
  if (const auto* r = find_rule(rules, a.rule_id); r && !r->provenance.empty()) out += " (" + r->provenance + ")";
  return out;
}

bool precautions_apply(const cep::Alert& a, const PrecautionSet* p) {
  return p && !p->actions.empty() && static_cast<int>(a.severity) >= static_cast<int>(p->min_severity);
}

std::string precaution_line(const PrecautionSet& p) {
  std::string out = "Precautions";
  if (!p.source.empty()) out += " (" + p.source + ")";
  out += ":";
  for (std::size_t i = 0; i < p.actions.size(); ++i) out += (i ? "; " : " ") + p.actions[i];
  return out + ".";
}

std::string excerpt(const std::string& text, std::size_t max_words) {
  std::istringstream in(text);
  std::string w, out;
  std::size_t n = 0;
  while (in >> w) {
    if (n == max_words) return out + " ...";
    out += (n++ ? " " : "") + w;
  }
  return out;
}

std::string stub_text(const cep::Alert& a, const std::vector<DocumentChunk>& context,
                      const std::vector<rules::Rule>& rules, const PrecautionSet* precautions) {
  std::ostringstream out;
  out << "[" << cep::to_string(a.severity) << "] " << words(a.label) << " for patient " << a.patient << " (window "
      << a.window_id << ").\n";
  out << summary_for(a.label) << "\n";
  out << "Triggered by " << citation(a, rules) << ".\n";
  if (!a.actions.empty()) {
    out << "Derived:";
    for (std::size_t i = 0; i < a.actions.size(); ++i) out << (i ? "; " : " ") << a.actions[i].repr();
    out << ".\n";
  }
  if (precautions_apply(a, precautions)) out << precaution_line(*precautions) << "\n";
  for (const auto& c : context) out << "Guidance [" << c.doc_id << "#" << c.chunk_index << "]: " << excerpt(c.text, 25) << "\n";
  return out.str();
}

}  // namespace

std::string explanation_prompt(const cep::Alert& alert, const std::vector<DocumentChunk>& context,
                               const std::vector<rules::Rule>& rules, const PrecautionSet* precautions) {
  std::ostringstream out;
  out << "Explain this tuberculosis alert for a clinician in plain language and list precautionary steps.\n";
  out << "Patient: " << alert.patient << "\n";
  out << "Classification: " << alert.label << "\n";
  out << "Severity: " << cep::to_string(alert.severity) << "\n";
  out << "Triggered by: " << citation(alert, rules) << "\n";
  if (const auto* r = find_rule(rules, alert.rule_id)) out << "Rule: " << r->repr() << "\n";
  if (precautions_apply(alert, precautions)) out << precaution_line(*precautions) << "\n";
  out << "Context:\n";
  for (const auto& c : context) out << "- [" << c.doc_id << "#" << c.chunk_index << "] " << c.text << "\n";
  return out.str();
}

Explanation explain_alert(const cep::Alert& alert, const std::vector<DocumentChunk>& context,
                          const std::vector<rules::Rule>& rules, const PrecautionSet* precautions,
                          CompletionService* service) {
  Explanation e;
  if (service) {
    try {
      e.text = service->complete(explanation_prompt(alert, context, rules, precautions));
      e.mode = "service";
      return e;
    } catch (const std::exception& ex) {
      e.fallback = true;
      e.error = ex.what();
    }
  }
  e.mode = "stub";
  e.text = stub_text(alert, context, rules, precautions);
  if (e.fallback) e.text = "[fallback: completion service unavailable]\n" + e.text;
  return e;
}

}  // namespace tbstream::reason
