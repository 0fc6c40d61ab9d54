#include "tbstream/app/workflows.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "tbstream/rdf/ntriples.hpp"
#include "tbstream/rdf/vocabulary.hpp"

namespace tbstream::app {

namespace {

using SteadyClock = std::chrono::steady_clock;

double ms_since(SteadyClock::time_point start) {
  return std::chrono::duration<double, std::milli>(SteadyClock::now() - start).count();
}

cep::Severity severity_from_string(const std::string& s) {
  if (s == "Info") return cep::Severity::Info;
  if (s == "Warning") return cep::Severity::Warning;
  if (s == "Critical") return cep::Severity::Critical;
  throw DataError("unknown severity '" + s + "'");
}

std::string label_words(std::string label) {
  std::replace(label.begin(), label.end(), '_', ' ');
  return label;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ingest::IngestResult load_records(const std::filesystem::path& csv) {
  auto text = read_file(csv);
  try {
    return ingest::ingest_text(text);
  } catch (const ingest::HeaderError& e) {
    throw DataError(csv.string() + ": " + e.what());
  }
}

ingest::IngestResult generated_records(std::size_t rows, std::uint64_t seed) {
  ingest::GeneratorOptions opt;
  opt.rows = rows;
  opt.seed = seed;
  opt.with_clinical = true;
  return ingest::ingest_text(ingest::generate_synthetic_csv(opt));
}

rdf::Graph records_to_graph(const std::vector<ingest::PatientRecord>& records) {
  rdf::Graph g;
  for (const auto& r : records) {
    auto ts = rdf::record_to_triples(r);
    g.insert(ts.begin(), ts.end());
  }
  return g;
}

rdf::Graph load_store(const std::vector<std::filesystem::path>& files) {
  rdf::Graph g;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw DataError("cannot read " + f.string());
    try {
      rdf::parse_ntriples(in, g);
    } catch (const std::exception& e) {
      throw DataError(f.string() + ": " + e.what());
    }
  }
  return g;
}

std::vector<cep::Alert> classify_records(const std::vector<ingest::PatientRecord>& records,
                                         const std::vector<rules::Rule>& rules, const cep::SeverityMap& severity) {
  std::vector<cep::Alert> out;
  for (const auto& rec : records) {
    for (auto& c : rules::classify_patient(rec, rules)) {
      cep::Alert a;
      a.patient = c.patient;
      a.label = c.label;
      a.rule_id = c.triggering_rule;
      a.severity = severity(c.label);
      a.window_id = -1;
      a.actions = std::move(c.derived_actions);
      a.fact = std::move(c.fact);
      out.push_back(std::move(a));
    }
  }
  return out;
}

sparql::ResultTable alert_table(const std::vector<cep::Alert>& alerts) {
  sparql::ResultTable t;
  t.header = {"patient", "label", "rule", "severity", "window"};
  for (const auto& a : alerts) {
    t.rows.push_back({rdf::Term::literal(a.patient), rdf::Term::literal(a.label), rdf::Term::literal(a.rule_id),
                      rdf::Term::literal(cep::to_string(a.severity)),
                      rdf::Term::typed(std::to_string(a.window_id), rdf::iri::kXsdInteger)});
  }
  return t;
}

cep::Alert parse_alert_json(std::string_view line) {
  auto j = nlohmann::json::parse(line, nullptr, false);
  if (!j.is_object()) throw DataError("alert line is not a JSON object");
  try {
    cep::Alert a;
    a.patient = j.at("patient").get<std::string>();
    a.label = j.at("label").get<std::string>();
    a.rule_id = j.at("rule").get<std::string>();
    a.severity = severity_from_string(j.at("severity").get<std::string>());
    a.window_id = j.at("window").get<long long>();
    auto ts = j.value("ts", std::string());
    if (!ts.empty()) {
      auto dot = ts.find('.');
      auto secs = ingest::parse_timestamp(ts.substr(0, dot));
      if (!secs) throw DataError("bad alert timestamp '" + ts + "'");
      long long ms = dot == std::string::npos ? 0 : std::stoll(ts.substr(dot + 1, 3));
      a.emitted_at = cep::Instant{std::chrono::time_point_cast<cep::Millis>(*secs)} + cep::Millis{ms};
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad alert: ") + e.what());
  }
}

std::vector<cep::Alert> load_alerts(const std::filesystem::path& jsonl) {
  std::istringstream in(read_file(jsonl));
  std::vector<cep::Alert> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(parse_alert_json(line));
  }
  return out;
}

std::vector<NamedQuery> load_query_suite(const std::filesystem::path& dir) {
  static const std::regex kName(R"(q(\d+)\.rq)");
  if (!std::filesystem::is_directory(dir)) throw DataError("no query directory " + dir.string());
  std::vector<std::pair<int, std::filesystem::path>> found;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    std::smatch m;
    auto name = e.path().filename().string();
    if (std::regex_match(name, m, kName)) found.emplace_back(std::stoi(m[1]), e.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<NamedQuery> out;
  for (const auto& [n, p] : found) out.push_back({p.stem().string(), read_file(p)});
  return out;
}

std::string explanation_json(const cep::Alert& alert, const reason::Explanation& e,
                             const std::vector<reason::DocumentChunk>& sources) {
  nlohmann::ordered_json j;
  j["patient"] = alert.patient;
  j["label"] = alert.label;
  j["rule"] = alert.rule_id;
  j["severity"] = cep::to_string(alert.severity);
  j["window"] = alert.window_id;
  j["mode"] = e.mode;
  j["fallback"] = e.fallback;
  j["sources"] = nlohmann::json::array();
  for (const auto& c : sources) j["sources"].push_back(c.doc_id + "#" + std::to_string(c.chunk_index));
  j["text"] = e.text;
  return j.dump();
}

std::string explain_to_json(const cep::Alert& alert, const Explainer& ex) {
  std::vector<reason::DocumentChunk> context;
  if (ex.corpus && ex.corpus->size() > 0) {
    for (const auto& h : reason::retrieve_top_k(label_words(alert.label), *ex.corpus, ex.k).hits) {
      context.push_back(ex.corpus->chunk(h.chunk));
    }
  }
  static const std::vector<rules::Rule> kNoRules;
  auto e = reason::explain_alert(alert, context, ex.rules ? *ex.rules : kNoRules, ex.precautions, ex.service);
  return explanation_json(alert, e, context);
}

StreamResult run_stream(const std::vector<ingest::PatientRecord>& records, const cep::RuleSet& rules,
                        const StreamOptions& opt) {
  if (opt.rate_per_s <= 0) throw std::invalid_argument("rate must be positive");
  StreamResult result;

  auto clock = std::make_shared<bus::ManualClock>();
  bus::BusOptions bo;
  bo.brokers = opt.brokers;
  bo.clock = clock;
  bus::Bus stream(bo);
  stream.create_topic({opt.topic, opt.partitions, opt.replication_factor});

  auto t0 = SteadyClock::now();
  const double step_ms = 1000.0 / opt.rate_per_s;
  for (std::size_t i = 0; i < records.size(); ++i) {
    clock->set(cep::Instant{cep::Millis{static_cast<long long>(std::floor(static_cast<double>(i) * step_ms))}});
    stream.publish(opt.topic, records[i].patient_id, ingest::encode_record(records[i]));
  }
  result.stages.push_back({"publish", ms_since(t0)});

  t0 = SteadyClock::now();
  for (;;) {
    auto batch = stream.consume(opt.topic, "rdf", 4096);
    if (batch.empty()) break;
    for (const auto& e : batch) {
      try {
        auto ts = rdf::record_to_triples(ingest::decode_record(e.payload));
        result.store.insert(ts.begin(), ts.end());
        ++result.persisted;
      } catch (const std::exception&) {
        // counted by the CEP consumer as undecodable
      }
    }
    stream.commit("rdf", batch);
  }
  result.stages.push_back({"persist", ms_since(t0)});

  cep::PipelineConfig pc;
  pc.topic = opt.topic;
  pc.group = "cep";
  pc.window = opt.window;
  pc.batch_interval = opt.batch_interval;
  pc.allowed_lateness = opt.allowed_lateness;
  pc.severity = opt.severity;
  pc.deterministic = opt.deterministic;
  pc.workers = opt.deterministic ? 1 : std::max(1u, opt.workers);

  cep::CallbackSink collect("collect", [&](const cep::Alert& a) { result.alerts.push_back(a); });
  cep::GraphWriteback writeback(result.store);
  std::optional<cep::JsonlAlertLog> log;
  if (opt.alert_log) log.emplace(*opt.alert_log);
  std::optional<cep::DeadLetter> dead;
  if (opt.dead_letter) dead.emplace(*opt.dead_letter);
  std::vector<cep::AlertSink*> sinks{&collect, &writeback};
  if (log) sinks.push_back(&*log);

  t0 = SteadyClock::now();
  result.report = cep::run_pipeline(stream, pc, rules, sinks, dead ? &*dead : nullptr);
  result.stages.push_back({"cep", ms_since(t0)});

  if (opt.explanations) {
    t0 = SteadyClock::now();
    for (const auto& a : result.alerts) {
      *opt.explanations << explain_to_json(a, opt.explainer) << '\n';
      ++result.explained;
    }
    result.stages.push_back({"explain", ms_since(t0)});
  }
  return result;
}

std::string stream_summary_json(const StreamResult& r) {
  nlohmann::ordered_json j;
  j["events_ingested"] = r.report.events_ingested;
  j["events_processed"] = r.report.events_processed;
  j["windows_closed"] = r.report.windows_closed;
  j["alerts_emitted"] = r.report.alerts_emitted;
  j["dropped_late"] = r.report.dropped_late;
  j["undecodable"] = r.report.undecodable;
  j["dead_lettered"] = r.report.dead_lettered;
  j["persisted_records"] = r.persisted;
  j["store_triples"] = r.store.size();
  j["explained"] = r.explained;
  std::map<std::string, std::size_t> by_label;
  for (const auto& a : r.alerts) ++by_label[a.label];
  j["alerts_by_label"] = by_label;
  return j.dump(2);
}

bool TimingReport::ordered() const {
  return cep_window_mean_ms < query_stage_ms && query_stage_ms < end_to_end_ms;
}

TimingReport timing_run(std::string_view csv_text, const cep::RuleSet& rules, const std::vector<NamedQuery>& queries,
                        const StreamOptions& options) {
  TimingReport t;
  auto start = SteadyClock::now();

  auto t0 = SteadyClock::now();
  auto ingested = ingest::ingest_text(csv_text);
  t.stages.push_back({"ingest", ms_since(t0)});

  auto run = run_stream(ingested.records, rules, options);
  t.stages.insert(t.stages.end(), run.stages.begin(), run.stages.end());

  std::vector<sparql::QueryAst> parsed;
  for (const auto& q : queries) parsed.push_back(sparql::parse_query(q.text));
  t0 = SteadyClock::now();
  for (std::size_t i = 0; i < parsed.size(); ++i) {
    auto q0 = SteadyClock::now();
    auto rows = sparql::evaluate(parsed[i], run.store).rows.size();
    t.queries.push_back({queries[i].name, ms_since(q0)});
    t.query_rows.emplace_back(queries[i].name, rows);
  }
  t.query_stage_ms = ms_since(t0);
  t.stages.push_back({"query", t.query_stage_ms});

  t.end_to_end_ms = ms_since(start);
  t.records = ingested.records.size();
  t.windows = run.report.windows_closed;
  t.alerts = run.alerts.size();
  t.cep_window_mean_ms = run.report.mean_latency_ms();
  return t;
}

std::string timing_json(const TimingReport& t) {
  nlohmann::ordered_json j;
  j["records"] = t.records;
  j["windows"] = t.windows;
  j["alerts"] = t.alerts;
  j["cep_window_mean_ms"] = t.cep_window_mean_ms;
  j["query_stage_ms"] = t.query_stage_ms;
  j["end_to_end_ms"] = t.end_to_end_ms;
  j["ordered"] = t.ordered();
  j["stages"] = nlohmann::json::array();
  for (const auto& s : t.stages) j["stages"].push_back({{"stage", s.stage}, {"ms", s.ms}});
  j["queries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < t.queries.size(); ++i) {
    j["queries"].push_back({{"query", t.queries[i].stage}, {"ms", t.queries[i].ms}, {"rows", t.query_rows[i].second}});
  }
  return j.dump(2);
}

void write_timing_table(std::ostream& out, const TimingReport& t) {
  char buf[128];
  out << "records " << t.records << ", windows " << t.windows << ", alerts " << t.alerts << "\n";
  for (const auto& s : t.stages) {
    std::snprintf(buf, sizeof buf, "  %-10s %10.3f ms\n", s.stage.c_str(), s.ms);
    out << buf;
  }
  for (std::size_t i = 0; i < t.queries.size(); ++i) {
    std::snprintf(buf, sizeof buf, "  %-10s %10.3f ms  %zu rows\n", t.queries[i].stage.c_str(), t.queries[i].ms,
                  t.query_rows[i].second);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "cep window mean %.3f ms < query stage %.3f ms < end to end %.3f ms: %s\n",
                t.cep_window_mean_ms, t.query_stage_ms, t.end_to_end_ms, t.ordered() ? "yes" : "no");
  out << buf;
}

}  // namespace tbstream::app
