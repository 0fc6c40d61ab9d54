#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tbstream/cep/cep.hpp"
#include "tbstream/ingest/clinical_ingest.hpp"
#include "tbstream/rdf/graph.hpp"
#include "tbstream/reason/explain.hpp"
#include "tbstream/reason/retrieval.hpp"
#include "tbstream/sparql/query.hpp"

namespace tbstream::app {

/// Bad input data (unreadable file, malformed content). The CLI maps it to
/// exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::filesystem::path& path);

ingest::IngestResult load_records(const std::filesystem::path& csv);
ingest::IngestResult generated_records(std::size_t rows, std::uint64_t seed);

/// record_to_triples for every record.
rdf::Graph records_to_graph(const std::vector<ingest::PatientRecord>& records);

/// Loads and merges N-Triples files.
rdf::Graph load_store(const std::vector<std::filesystem::path>& files);

/// Offline per-record classification as alerts (window id -1).
std::vector<cep::Alert> classify_records(const std::vector<ingest::PatientRecord>& records,
                                         const std::vector<rules::Rule>& rules,
                                         const cep::SeverityMap& severity = {});

/// Alerts as a patient/label/rule/severity/window table.
sparql::ResultTable alert_table(const std::vector<cep::Alert>& alerts);

/// Inverse of cep::alert_json (actions are not carried).
cep::Alert parse_alert_json(std::string_view line);
std::vector<cep::Alert> load_alerts(const std::filesystem::path& jsonl);

struct NamedQuery {
  std::string name;  // file stem
  std::string text;
};

/// q<N>.rq files under `dir` in numeric order.
std::vector<NamedQuery> load_query_suite(const std::filesystem::path& dir);

struct Explainer {
  const reason::RetrievalIndex* corpus = nullptr;
  std::size_t k = 2;
  const std::vector<rules::Rule>* rules = nullptr;
  const reason::PrecautionSet* precautions = nullptr;
  reason::CompletionService* service = nullptr;
};

/// One JSON object: alert fields, mode, fallback, sources and text.
std::string explanation_json(const cep::Alert& alert, const reason::Explanation& e,
                             const std::vector<reason::DocumentChunk>& sources);
/// Retrieves context for the alert's label and explains it.
std::string explain_to_json(const cep::Alert& alert, const Explainer& explainer);

struct StreamOptions {
  std::string topic = "records";
  int brokers = 3;
  int partitions = 3;
  int replication_factor = 2;
  double rate_per_s = 20;  // event spacing on the simulated clock
  cep::WindowSpec window = cep::WindowSpec::tumbling(cep::Millis{5000});
  cep::Millis batch_interval{1000};
  std::optional<cep::Millis> allowed_lateness;
  bool deterministic = true;
  unsigned workers = 4;
  cep::SeverityMap severity;
  std::ostream* alert_log = nullptr;
  std::ostream* dead_letter = nullptr;
  std::ostream* explanations = nullptr;
  Explainer explainer;
};

struct StageTiming {
  std::string stage;
  double ms = 0;
};

struct StreamResult {
  cep::PipelineReport report;
  std::vector<cep::Alert> alerts;
  rdf::Graph store;  // record triples plus written-back classifications
  std::vector<StageTiming> stages;
  std::size_t persisted = 0;  // records converted by the RDF consumer
  std::size_t explained = 0;
};

/// Publishes the records on a simulated clock, converts them to RDF through
/// one consumer group and runs the CEP pipeline through another, with the
/// alert log, graph writeback and (when configured) explanations as sinks.
StreamResult run_stream(const std::vector<ingest::PatientRecord>& records, const cep::RuleSet& rules,
                        const StreamOptions& options);

/// Counts only, so deterministic reruns print identical summaries.
std::string stream_summary_json(const StreamResult& r);

struct TimingReport {
  std::size_t records = 0;
  std::size_t windows = 0;
  std::size_t alerts = 0;
  double cep_window_mean_ms = 0;
  double query_stage_ms = 0;
  double end_to_end_ms = 0;
  std::vector<StageTiming> stages;
  std::vector<std::pair<std::string, std::size_t>> query_rows;
  std::vector<StageTiming> queries;

  /// CEP mean window latency < query stage < end to end.
  bool ordered() const;
};

/// Ingest, stream, persist and query over one CSV text, timing every stage.
TimingReport timing_run(std::string_view csv_text, const cep::RuleSet& rules, const std::vector<NamedQuery>& queries,
                        const StreamOptions& options);
std::string timing_json(const TimingReport& t);
void write_timing_table(std::ostream& out, const TimingReport& t);

}  // namespace tbstream::app
