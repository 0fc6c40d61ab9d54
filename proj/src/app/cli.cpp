#include "tbstream/app/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tbstream/app/workflows.hpp"
#include "tbstream/bus/bus.hpp"
#include "tbstream/metrics/metrics.hpp"
#include "tbstream/rdf/ntriples.hpp"
#include "tbstream/reason/scoring.hpp"
#include "tbstream/reason/updates.hpp"

namespace tbstream::app {

namespace fs = std::filesystem;

namespace {

/// Raised by handlers for option combinations CLI11 cannot express.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Writes to `path`, or to `fallback` when the path is empty or "-".
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty() || path == "-") return;
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*file_) throw DataError("cannot write " + path);
    os_ = file_.get();
  }
  std::ostream& operator*() { return *os_; }
  std::ostream* get() { return os_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* os_;
};

sparql::OutputFormat format_of(const std::string& name) {
  auto f = sparql::output_format_from_string(name);
  if (!f) throw UsageError("unknown format '" + name + "' (table, csv, json)");
  return *f;
}

cep::RuleSet rules_at(const std::string& path) {
  if (!fs::exists(path)) throw DataError("no rules at " + path);
  try {
    return cep::deploy_rules(path);
  } catch (const std::exception& e) {
    throw DataError(path + ": " + e.what());
  }
}

cep::WindowSpec window_of(const std::string& length, const std::string& slide) {
  auto len = cep::parse_duration(length);
  auto spec = slide.empty() ? cep::WindowSpec::tumbling(len) : cep::WindowSpec::sliding(len, cep::parse_duration(slide));
  spec.validate();
  return spec;
}

ingest::IngestResult records_from(const std::string& in, std::size_t rows, std::uint64_t seed) {
  return in.empty() ? generated_records(rows, seed) : load_records(in);
}

std::string json_line(const bus::EventEnvelope& e) {
  nlohmann::ordered_json j;
  j["topic"] = e.topic;
  j["partition"] = e.partition;
  j["offset"] = e.offset;
  j["key"] = e.key ? nlohmann::json(*e.key) : nlohmann::json();
  j["ts"] = cep::format_instant(e.ingest_time);
  j["payload"] = e.payload;
  return j.dump();
}

struct Common {
  bool deterministic = false;
};

struct BusState {
  std::string dir;
  bool deterministic = false;

  bus::Bus open() const {
    bus::BusOptions opt;
    if (deterministic) opt.clock = std::make_shared<bus::ManualClock>();
    if (!fs::exists(fs::path(dir) / "meta.json")) throw DataError("no bus state under " + dir + " (run 'bus create')");
    return bus::Bus::load(dir, opt);
  }
};

std::unique_ptr<reason::CompletionService> completion_service(bool deterministic) {
  if (deterministic) return nullptr;
  return reason::HttpCompletionService::from_env();
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Streaming tuberculosis analytics: ingest, rules, CEP, RDF, SPARQL, metrics and reasoning.", "tbstream"};
  app.set_config("--config", "", "TOML or INI file with option defaults (flags win)");
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_flag("--deterministic", common.deterministic, "Single-threaded scheduling and stable output");

  std::function<int()> action;

  // gen
  auto* gen = app.add_subcommand("gen", "Write a synthetic clinical CSV");
  struct {
    std::size_t rows = 1000;
    std::uint64_t seed = 7;
    bool clinical = false;
    double prevalence = 0.3, noise = 0.0;
    std::string out;
  } g;
  gen->add_option("--rows", g.rows, "Number of rows")->capture_default_str();
  gen->add_option("--seed", g.seed, "Random seed")->capture_default_str();
  gen->add_flag("--clinical", g.clinical, "Add numeric clinical columns (cough duration, lymph size, smear result)");
  gen->add_option("--prevalence", g.prevalence, "Symptom probability")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen->add_option("--noise", g.noise, "Fraction of deliberately malformed rows")->capture_default_str()->check(CLI::Range(0.0, 1.0));
  gen->add_option("-o,--out", g.out, "Output file (default stdout)");
  gen->callback([&] {
    action = [&] {
      ingest::GeneratorOptions opt;
      opt.rows = g.rows;
      opt.seed = g.seed;
      opt.with_clinical = g.clinical;
      opt.symptom_prevalence = g.prevalence;
      opt.noise_rate = g.noise;
      Output o(g.out, out);
      *o << ingest::generate_synthetic_csv(opt);
      return kExitOk;
    };
  });

  // ingest
  auto* ing = app.add_subcommand("ingest", "Preprocess a CSV into encoded records (JSON lines)");
  struct {
    std::string in, out, rejections;
  } in;
  ing->add_option("-i,--in", in.in, "Input CSV")->required();
  ing->add_option("-o,--out", in.out, "Records output (default stdout)");
  ing->add_option("--rejections", in.rejections, "Rejected rows as JSON lines");
  ing->callback([&] {
    action = [&] {
      auto r = load_records(in.in);
      Output o(in.out, out);
      for (const auto& rec : r.records) *o << ingest::encode_record(rec) << '\n';
      if (!in.rejections.empty()) {
        Output rej(in.rejections, err);
        ingest::write_rejections_jsonl(*rej, r.rejections);
      }
      err << "accepted " << r.records.size() << ", rejected " << r.rejections.size() << "\n";
      return kExitOk;
    };
  });

  // convert
  auto* conv = app.add_subcommand("convert", "Convert a clinical CSV to N-Triples");
  struct {
    std::string in, out, onto;
  } cv;
  conv->add_option("-i,--in", cv.in, "Input CSV")->required();
  conv->add_option("-o,--out", cv.out, "N-Triples output (default stdout)");
  conv->add_option("--with-onto", cv.onto, "Merge an ontology N-Triples file into the output");
  conv->callback([&] {
    action = [&] {
      auto r = load_records(cv.in);
      auto graph = records_to_graph(r.records);
      if (!cv.onto.empty()) {
        auto onto = load_store({cv.onto});
        auto ts = onto.triples();
        graph.insert(ts.begin(), ts.end());
      }
      Output o(cv.out, out);
      rdf::serialize_ntriples(graph, *o);
      err << r.records.size() << " records, " << graph.size() << " triples\n";
      return kExitOk;
    };
  });

  // classify
  auto* cls = app.add_subcommand("classify", "Classify every record with the rule set (offline batch)");
  struct {
    std::string in, rules = "rules", format = "table", out;
  } cl;
  cls->add_option("-i,--in", cl.in, "Input CSV")->required();
  cls->add_option("--rules", cl.rules, "Rule directory or file")->capture_default_str();
  cls->add_option("--format", cl.format, "table, csv or json")->capture_default_str();
  cls->add_option("-o,--out", cl.out, "Output file (default stdout)");
  cls->callback([&] {
    action = [&] {
      auto fmt = format_of(cl.format);
      auto rs = rules_at(cl.rules);
      auto r = load_records(cl.in);
      Output o(cl.out, out);
      sparql::write_result(*o, alert_table(classify_records(r.records, rs.rules)), fmt);
      return kExitOk;
    };
  });

  // pipeline
  auto* pipe = app.add_subcommand("pipeline", "Streaming runs, window benchmark and stage timing");
  pipe->require_subcommand(1);

  struct StreamFlags {
    std::string in;
    std::size_t rows = 1000;
    std::uint64_t seed = 7;
    std::string rules = "rules";
    std::string window = "5s", slide, batch = "1s", lateness;
    double rate = 20;
    int brokers = 3, partitions = 3, rf = 2;
    unsigned workers = 4;
  };
  auto add_stream_flags = [](CLI::App* sub, StreamFlags& f) {
    sub->add_option("-i,--in", f.in, "Input CSV (default: generate --rows records)");
    sub->add_option("--rows", f.rows, "Generated records when --in is absent")->capture_default_str();
    sub->add_option("--seed", f.seed, "Generator seed")->capture_default_str();
    sub->add_option("--rules", f.rules, "Rule directory or file")->capture_default_str();
    sub->add_option("--window", f.window, "Window length (e.g. 5s, 500ms)")->capture_default_str();
    sub->add_option("--slide", f.slide, "Slide for sliding windows (default tumbling)");
    sub->add_option("--batch", f.batch, "Micro-batch interval")->capture_default_str();
    sub->add_option("--lateness", f.lateness, "Allowed lateness (default: batch interval)");
    sub->add_option("--rate", f.rate, "Events per second on the simulated clock")->capture_default_str();
    sub->add_option("--brokers", f.brokers, "Brokers")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--partitions", f.partitions, "Topic partitions")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--replication", f.rf, "Replication factor")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--workers", f.workers, "Concurrent window evaluations (ignored with --deterministic)")
        ->capture_default_str();
  };
  auto stream_options = [&](const StreamFlags& f) {
    StreamOptions opt;
    opt.brokers = f.brokers;
    opt.partitions = f.partitions;
    opt.replication_factor = f.rf;
    opt.rate_per_s = f.rate;
    if (f.rate <= 0) throw UsageError("--rate must be positive");
    try {
      opt.window = window_of(f.window, f.slide);
      opt.batch_interval = cep::parse_duration(f.batch);
      if (opt.batch_interval.count() <= 0) throw std::invalid_argument("batch interval must be positive");
      if (!f.lateness.empty()) opt.allowed_lateness = cep::parse_duration(f.lateness);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    opt.deterministic = common.deterministic;
    opt.workers = f.workers;
    return opt;
  };

  auto* run = pipe->add_subcommand("run", "Stream records through the bus and the CEP engine");
  StreamFlags rf;
  struct {
    std::string alerts, store, dead_letter, explain, corpus = "corpus", precautions = "rules/precautions.json",
                                                    summary;
  } ro;
  add_stream_flags(run, rf);
  run->add_option("--alerts", ro.alerts, "Alert log (JSON lines)");
  run->add_option("--store", ro.store, "Write the RDF store (records plus derived classifications)");
  run->add_option("--dead-letter", ro.dead_letter, "Dead-letter file for failed sink deliveries");
  run->add_option("--explain", ro.explain, "Write an explanation per alert (JSON lines)");
  run->add_option("--corpus", ro.corpus, "Guideline corpus for explanations")->capture_default_str();
  run->add_option("--precautions", ro.precautions, "Precaution list for explanations")->capture_default_str();
  run->add_option("--summary", ro.summary, "Run summary JSON (default stdout)");
  run->callback([&] {
    action = [&] {
      auto opt = stream_options(rf);
      auto rs = rules_at(rf.rules);
      auto recs = records_from(rf.in, rf.rows, rf.seed);
      std::optional<Output> alerts, dead, expl;
      if (!ro.alerts.empty()) alerts.emplace(ro.alerts, out), opt.alert_log = alerts->get();
      if (!ro.dead_letter.empty()) dead.emplace(ro.dead_letter, err), opt.dead_letter = dead->get();
      std::optional<reason::RetrievalIndex> corpus;
      std::optional<reason::PrecautionSet> precautions;
      std::unique_ptr<reason::CompletionService> service;
      if (!ro.explain.empty()) {
        expl.emplace(ro.explain, out);
        opt.explanations = expl->get();
        if (fs::is_directory(ro.corpus)) corpus = reason::RetrievalIndex::from_directory(ro.corpus);
        if (fs::exists(ro.precautions)) precautions = reason::load_precautions(ro.precautions);
        service = completion_service(common.deterministic);
        opt.explainer.corpus = corpus ? &*corpus : nullptr;
        opt.explainer.rules = &rs.rules;
        opt.explainer.precautions = precautions ? &*precautions : nullptr;
        opt.explainer.service = service.get();
      }
      auto result = run_stream(recs.records, rs, opt);
      if (!ro.store.empty()) {
        Output s(ro.store, out);
        rdf::serialize_ntriples(result.store, *s);
      }
      Output summary(ro.summary, out);
      *summary << stream_summary_json(result) << '\n';
      return kExitOk;
    };
  });

  auto* bench = pipe->add_subcommand("bench", "Window-length and rule-count sweep (CSV)");
  struct {
    std::vector<std::string> windows{"5s", "10s", "15s", "20s", "25s"};
    std::vector<std::size_t> rule_counts{5, 10, 15, 20, 25};
    double rate = 100;
    std::string duration = "60s", rules = "rules", out;
    std::uint64_t seed = 7;
    int repeats = 50;
  } bo;
  bench->add_option("--windows", bo.windows, "Window lengths")->delimiter(',')->capture_default_str();
  bench->add_option("--rule-counts", bo.rule_counts, "Rule counts (first n shipped rules)")
      ->delimiter(',')
      ->capture_default_str();
  bench->add_option("--rate", bo.rate, "Events per second")->capture_default_str();
  bench->add_option("--duration", bo.duration, "Stream length")->capture_default_str();
  bench->add_option("--seed", bo.seed, "Generator seed")->capture_default_str();
  bench->add_option("--repeats", bo.repeats, "Deployment timing repeats (fastest kept)")->capture_default_str();
  bench->add_option("--rules", bo.rules, "Rule directory")->capture_default_str();
  bench->add_option("-o,--out", bo.out, "CSV output (default stdout)");
  bench->callback([&] {
    action = [&] {
      cep::BenchConfig bc;
      try {
        for (const auto& w : bo.windows) bc.windows.push_back(cep::parse_duration(w));
        bc.duration = cep::parse_duration(bo.duration);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      bc.rule_counts = bo.rule_counts;
      bc.rate_per_s = bo.rate;
      bc.seed = bo.seed;
      bc.deployment_repeats = bo.repeats;
      auto rs = rules_at(bo.rules);
      std::vector<cep::BenchRow> rows;
      try {
        rows = cep::bench(bc, rs.rules);
      } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
      }
      Output o(bo.out, out);
      cep::write_bench_csv(*o, rows);
      return kExitOk;
    };
  });

  auto* timing = pipe->add_subcommand("timing", "Per-stage timing of one run, including the query suite");
  StreamFlags tf;
  struct {
    std::string queries = "queries", format = "table", out;
  } to;
  add_stream_flags(timing, tf);
  timing->add_option("--queries", to.queries, "Directory holding q<N>.rq")->capture_default_str();
  timing->add_option("--format", to.format, "table or json")->capture_default_str();
  timing->add_option("-o,--out", to.out, "Output file (default stdout)");
  timing->callback([&] {
    action = [&] {
      auto opt = stream_options(tf);
      auto fmt = format_of(to.format);
      auto rs = rules_at(tf.rules);
      std::string csv;
      if (tf.in.empty()) {
        ingest::GeneratorOptions gen;
        gen.rows = tf.rows;
        gen.seed = tf.seed;
        gen.with_clinical = true;
        csv = ingest::generate_synthetic_csv(gen);
      } else {
        csv = read_file(tf.in);
      }
      auto report = timing_run(csv, rs, load_query_suite(to.queries), opt);
      Output o(to.out, out);
      if (fmt == sparql::OutputFormat::Json) *o << timing_json(report) << '\n';
      else write_timing_table(*o, report);
      return kExitOk;
    };
  });

  // query
  auto* query = app.add_subcommand("query", "SPARQL queries over N-Triples stores");
  query->require_subcommand(1);
  auto* qrun = query->add_subcommand("run", "Run one query file");
  struct {
    std::string file, in, format = "table", out;
    std::vector<std::string> stores;
  } q;
  qrun->add_option("query", q.file, "Query file (.rq)")->required();
  qrun->add_option("--store", q.stores, "N-Triples file(s)");
  qrun->add_option("-i,--in", q.in, "Clinical CSV converted on the fly");
  qrun->add_option("--format", q.format, "table, csv or json")->capture_default_str();
  qrun->add_option("-o,--out", q.out, "Output file (default stdout)");
  qrun->callback([&] {
    action = [&] {
      auto fmt = format_of(q.format);
      if (q.stores.empty() && q.in.empty()) throw UsageError("query run needs --store or --in");
      auto graph = load_store({q.stores.begin(), q.stores.end()});
      if (!q.in.empty()) {
        auto extra = records_to_graph(load_records(q.in).records);
        auto ts = extra.triples();
        graph.insert(ts.begin(), ts.end());
      }
      auto text = read_file(q.file);
      sparql::ResultTable table;
      try {
        table = sparql::run_query(text, graph);
      } catch (const sparql::QuerySyntaxError& e) {
        throw DataError(q.file + ":" + std::to_string(e.line()) + ":" + std::to_string(e.column()) + ": " + e.what());
      } catch (const sparql::QueryEvalError& e) {
        throw DataError(q.file + ": " + e.what());
      }
      Output o(q.out, out);
      sparql::write_result(*o, table, fmt);
      return kExitOk;
    };
  });

  // metrics
  auto* met = app.add_subcommand("metrics", "Schema counts and richness metrics of an ontology");
  struct {
    std::vector<std::string> stores;
    std::string counts;
    bool json = false, check = false;
  } m;
  met->add_option("--store", m.stores, "Ontology N-Triples file(s)");
  met->add_option("--counts", m.counts, "Counts JSON instead of a store");
  met->add_flag("--json", m.json, "JSON output");
  met->add_flag("--check", m.check, "Also run the consistency check (exit 2 on violations)");
  met->callback([&] {
    action = [&] {
      if (m.stores.empty() == m.counts.empty()) throw UsageError("metrics needs exactly one of --store or --counts");
      if (m.check && m.stores.empty()) throw UsageError("--check needs --store");
      metrics::SchemaCounts counts;
      std::optional<rdf::Graph> graph;
      if (!m.counts.empty()) {
        try {
          counts = metrics::counts_from_json(read_file(m.counts));
        } catch (const nlohmann::json::exception& e) {
          throw DataError(m.counts + ": " + e.what());
        }
      } else {
        graph = load_store({m.stores.begin(), m.stores.end()});
        counts = metrics::count_schema(*graph);
      }
      metrics::MetricReport report;
      try {
        report = metrics::compute_metrics(counts);
      } catch (const metrics::MetricError& e) {
        throw DataError(e.what());
      }
      std::optional<metrics::ConsistencyReport> consistency;
      if (m.check) consistency = metrics::consistency_check(*graph);
      if (m.json) {
        auto j = nlohmann::ordered_json::parse(metrics::report_json(counts, report));
        if (consistency) {
          j["consistency"] = nlohmann::json::array();
          for (const auto& v : consistency->violations) {
            j["consistency"].push_back({{"kind", metrics::to_string(v.kind)}, {"terms", v.terms}, {"detail", v.detail}});
          }
        }
        out << j.dump(2) << '\n';
      } else {
        out << "classes " << counts.classes << "\nobject_properties " << counts.object_properties
            << "\ndata_properties " << counts.data_properties << "\nindividuals " << counts.individuals
            << "\nsubclass_axioms " << counts.subclass_axioms << "\nclasses_with_instances "
            << counts.classes_with_instances << "\n";
        auto line = [&](const char* name, const metrics::Ratio& r) {
          out << name << " " << r.str() << " (" << r.num << "/" << r.den << ")\n";
        };
        line("attribute_richness", report.attribute_richness);
        line("class_richness", report.class_richness);
        line("average_population", report.average_population);
        line("relationship_richness", report.relationship_richness);
        line("relationship_richness_object", report.relationship_richness_object);
        for (const auto& w : report.warnings) err << "warning: " << w << "\n";
        if (consistency) {
          out << "consistency " << (consistency->clean() ? "clean" : "violations") << "\n";
          for (const auto& v : consistency->violations) out << "  " << metrics::to_string(v.kind) << ": " << v.detail << "\n";
        }
      }
      return consistency && !consistency->clean() ? kExitData : kExitOk;
    };
  });

  // reason
  auto* rsn = app.add_subcommand("reason", "Retrieval, scoring, explanations and ontology updates");
  rsn->require_subcommand(1);

  auto* retr = rsn->add_subcommand("retrieve", "Top-k guideline chunks for a query");
  struct {
    std::string corpus = "corpus", query, format = "table";
    std::size_t k = 2, chunk = 40, overlap = 10;
  } rt;
  retr->add_option("--corpus", rt.corpus, "Directory of text documents")->capture_default_str();
  retr->add_option("-q,--query", rt.query, "Query text")->required();
  retr->add_option("-k", rt.k, "Number of chunks")->capture_default_str()->check(CLI::PositiveNumber);
  retr->add_option("--chunk", rt.chunk, "Chunk size in tokens")->capture_default_str();
  retr->add_option("--overlap", rt.overlap, "Chunk overlap in tokens")->capture_default_str();
  retr->add_option("--format", rt.format, "table, csv or json")->capture_default_str();
  retr->callback([&] {
    action = [&] {
      auto fmt = format_of(rt.format);
      if (!fs::is_directory(rt.corpus)) throw DataError("no corpus directory " + rt.corpus);
      if (rt.chunk <= rt.overlap) throw UsageError("--chunk must exceed --overlap");
      auto index = reason::RetrievalIndex::from_directory(rt.corpus, rt.chunk, rt.overlap);
      if (index.empty()) throw DataError("corpus " + rt.corpus + " has no text");
      auto r = reason::retrieve_top_k(rt.query, index, rt.k);
      sparql::ResultTable t;
      t.header = {"rank", "doc", "chunk", "score", "text"};
      for (std::size_t i = 0; i < r.hits.size(); ++i) {
        const auto& c = index.chunk(r.hits[i].chunk);
        char score[32];
        std::snprintf(score, sizeof score, "%.6f", r.hits[i].score);
        t.rows.push_back({rdf::Term::typed(std::to_string(i + 1), rdf::iri::kXsdInteger), rdf::Term::literal(c.doc_id),
                          rdf::Term::typed(std::to_string(c.chunk_index), rdf::iri::kXsdInteger),
                          rdf::Term::typed(score, rdf::iri::kXsdDecimal), rdf::Term::literal(c.text)});
      }
      sparql::write_result(out, t, fmt);
      if (r.truncated) err << "note: k exceeds the " << index.size() << " indexed chunks\n";
      return kExitOk;
    };
  });

  auto* score = rsn->add_subcommand("score", "Token-overlap precision, recall and F1");
  struct {
    std::string pred, ref, pred_file, ref_file;
  } sc;
  score->add_option("--pred", sc.pred, "Predicted answer text");
  score->add_option("--ref", sc.ref, "Reference answer text");
  score->add_option("--pred-file", sc.pred_file, "Predicted answer file");
  score->add_option("--ref-file", sc.ref_file, "Reference answer file");
  score->callback([&] {
    action = [&] {
      auto pred = sc.pred_file.empty() ? sc.pred : read_file(sc.pred_file);
      auto ref = sc.ref_file.empty() ? sc.ref : read_file(sc.ref_file);
      auto s = reason::score_response(pred, ref);
      nlohmann::ordered_json j{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"overlap", s.overlap}};
      out << j.dump() << '\n';
      return kExitOk;
    };
  });

  auto* sug = rsn->add_subcommand("suggest", "Extract candidate ontology updates from documents");
  struct {
    std::vector<std::string> docs;
    std::string onto = "onto/tb_skeleton.nt", rules = "rules", out = "updates/pending.json";
  } sg;
  sug->add_option("--doc", sg.docs, "Guideline document(s)")->required();
  sug->add_option("--onto", sg.onto, "Ontology N-Triples")->capture_default_str();
  sug->add_option("--rules", sg.rules, "Rule directory or file")->capture_default_str();
  sug->add_option("-o,--out", sg.out, "Pending suggestions JSON")->capture_default_str();
  sug->callback([&] {
    action = [&] {
      auto onto = load_store({sg.onto});
      auto rs = rules_at(sg.rules);
      std::vector<reason::UpdateSuggestion> all;
      for (const auto& d : sg.docs) {
        auto text = read_file(d);
        auto s = reason::suggest_updates(reason::extract_terms(text), reason::extract_rules(text), onto, rs.rules,
                                         fs::path(d).stem().string());
        for (auto& x : s) {
          bool dup = std::any_of(all.begin(), all.end(), [&](const auto& y) { return y.kind == x.kind && y.payload == x.payload; });
          if (!dup) all.push_back(std::move(x));
        }
      }
      for (std::size_t i = 0; i < all.size(); ++i) all[i].id = "S" + std::to_string(i + 1);
      Output o(sg.out, out);
      *o << reason::suggestions_json(all);
      err << all.size() << " pending suggestion(s)\n";
      return kExitOk;
    };
  });

  auto* apply = rsn->add_subcommand("apply", "Apply approved suggestions with rollback on inconsistency");
  struct {
    std::string in = "updates/approved.json", onto = "onto/tb_skeleton.nt", rules = "rules", onto_out, rule_file;
  } ap;
  apply->add_option("-i,--in", ap.in, "Approved suggestions JSON")->capture_default_str();
  apply->add_option("--onto", ap.onto, "Ontology N-Triples")->capture_default_str();
  apply->add_option("--rules", ap.rules, "Rule directory or file")->capture_default_str();
  apply->add_option("--onto-out", ap.onto_out, "Write the updated ontology here");
  apply->add_option("--rule-file", ap.rule_file, "Append approved rules to this file");
  apply->callback([&] {
    action = [&] {
      std::vector<reason::UpdateSuggestion> batch;
      try {
        batch = reason::load_suggestions(ap.in);
      } catch (const std::exception& e) {
        throw DataError(ap.in + ": " + e.what());
      }
      auto onto = load_store({ap.onto});
      auto rs = rules_at(ap.rules);
      reason::ApplyOptions opt;
      if (!ap.rule_file.empty()) opt.rule_file = ap.rule_file;
      reason::ApplyReport report;
      try {
        report = reason::apply_updates(batch, onto, rs.rules, opt);
      } catch (const reason::UpdateGateError& e) {
        throw DataError(e.what());
      }
      nlohmann::ordered_json j;
      j["applied"] = report.applied;
      j["rolled_back"] = report.rolled_back;
      j["added_triples"] = report.added.size();
      j["added_rules"] = report.added_rules.size();
      j["violations"] = nlohmann::json::array();
      for (const auto& v : report.consistency.violations) {
        j["violations"].push_back({{"kind", metrics::to_string(v.kind)}, {"detail", v.detail}});
      }
      j["errors"] = report.errors;
      out << j.dump(2) << '\n';
      if (report.applied && !ap.onto_out.empty()) {
        Output o(ap.onto_out, out);
        rdf::serialize_ntriples(onto, *o);
      }
      return report.applied ? kExitOk : kExitData;
    };
  });

  auto* expl = rsn->add_subcommand("explain", "Explain alerts from an alert log");
  struct {
    std::string alerts, corpus = "corpus", rules = "rules", precautions = "rules/precautions.json", out;
    std::size_t k = 2;
  } ex;
  expl->add_option("--alerts", ex.alerts, "Alert log (JSON lines)")->required();
  expl->add_option("--corpus", ex.corpus, "Guideline corpus")->capture_default_str();
  expl->add_option("--rules", ex.rules, "Rule directory or file")->capture_default_str();
  expl->add_option("--precautions", ex.precautions, "Precaution list")->capture_default_str();
  expl->add_option("-k", ex.k, "Context chunks per alert")->capture_default_str()->check(CLI::PositiveNumber);
  expl->add_option("-o,--out", ex.out, "Output file (default stdout)");
  expl->callback([&] {
    action = [&] {
      auto alerts = load_alerts(ex.alerts);
      auto rs = rules_at(ex.rules);
      std::optional<reason::RetrievalIndex> corpus;
      if (fs::is_directory(ex.corpus)) corpus = reason::RetrievalIndex::from_directory(ex.corpus);
      std::optional<reason::PrecautionSet> precautions;
      if (fs::exists(ex.precautions)) precautions = reason::load_precautions(ex.precautions);
      auto service = completion_service(common.deterministic);
      Explainer e{corpus ? &*corpus : nullptr, ex.k, &rs.rules, precautions ? &*precautions : nullptr, service.get()};
      Output o(ex.out, out);
      for (const auto& a : alerts) *o << explain_to_json(a, e) << '\n';
      return kExitOk;
    };
  });

  // bus
  auto* bs = app.add_subcommand("bus", "Inspect and drive a persisted bus (state directory)");
  bs->require_subcommand(1);
  BusState state;
  bs->add_option("--dir", state.dir, "Bus state directory")->required();

  auto* bcreate = bs->add_subcommand("create", "Create a topic (and the state directory)");
  struct {
    std::string topic = "records";
    int partitions = 3, rf = 2, brokers = 3;
  } bc;
  bcreate->add_option("--topic", bc.topic, "Topic name")->capture_default_str();
  bcreate->add_option("--partitions", bc.partitions, "Partitions")->capture_default_str()->check(CLI::PositiveNumber);
  bcreate->add_option("--replication", bc.rf, "Replication factor")->capture_default_str()->check(CLI::PositiveNumber);
  bcreate->add_option("--brokers", bc.brokers, "Brokers (new state only)")->capture_default_str()->check(CLI::PositiveNumber);
  bcreate->callback([&] {
    action = [&] {
      state.deterministic = common.deterministic;
      bus::BusOptions opt;
      opt.brokers = bc.brokers;
      auto b = fs::exists(fs::path(state.dir) / "meta.json") ? state.open() : bus::Bus(opt);
      try {
        b.create_topic({bc.topic, bc.partitions, bc.rf});
      } catch (const bus::BusError& e) {
        throw DataError(e.what());
      }
      b.save(state.dir);
      return kExitOk;
    };
  });

  auto* bpub = bs->add_subcommand("publish", "Publish one payload per input line");
  struct {
    std::string topic = "records", in, key_field = "patient_id";
  } bp;
  bpub->add_option("--topic", bp.topic, "Topic")->capture_default_str();
  bpub->add_option("-i,--in", bp.in, "Payload lines (e.g. output of 'ingest')")->required();
  bpub->add_option("--key-field", bp.key_field, "JSON field used as the record key")->capture_default_str();
  bpub->callback([&] {
    action = [&] {
      state.deterministic = common.deterministic;
      auto b = state.open();
      std::istringstream lines(read_file(bp.in));
      std::string line;
      std::size_t n = 0;
      try {
        while (std::getline(lines, line)) {
          if (line.empty()) continue;
          std::optional<std::string> key;
          auto j = nlohmann::json::parse(line, nullptr, false);
          if (j.is_object() && j.contains(bp.key_field) && j[bp.key_field].is_string()) key = j[bp.key_field].get<std::string>();
          b.publish(bp.topic, key, line);
          ++n;
        }
      } catch (const bus::BusError& e) {
        throw DataError(e.what());
      }
      b.save(state.dir);
      err << "published " << n << "\n";
      return kExitOk;
    };
  });

  auto* bcons = bs->add_subcommand("consume", "Read records past a group's committed offsets");
  struct {
    std::string topic = "records", group = "cli";
    std::size_t max = 100;
    bool commit = false;
  } bcn;
  bcons->add_option("--topic", bcn.topic, "Topic")->capture_default_str();
  bcons->add_option("--group", bcn.group, "Consumer group")->capture_default_str();
  bcons->add_option("--max", bcn.max, "Maximum records")->capture_default_str();
  bcons->add_flag("--commit", bcn.commit, "Commit the consumed offsets");
  bcons->callback([&] {
    action = [&] {
      state.deterministic = common.deterministic;
      auto b = state.open();
      try {
        auto events = b.consume(bcn.topic, bcn.group, bcn.max);
        for (const auto& e : events) out << json_line(e) << '\n';
        if (bcn.commit) {
          b.commit(bcn.group, events);
          b.save(state.dir);
        }
      } catch (const bus::BusError& e) {
        throw DataError(e.what());
      }
      return kExitOk;
    };
  });

  auto* btopics = bs->add_subcommand("topics", "Brokers, topics, leaders and end offsets (JSON)");
  btopics->callback([&] {
    action = [&] {
      state.deterministic = common.deterministic;
      auto b = state.open();
      nlohmann::ordered_json j;
      j["brokers"] = nlohmann::json::array();
      for (int id : b.broker_ids()) {
        j["brokers"].push_back({{"id", id}, {"status", b.broker(id).status == bus::BrokerStatus::Up ? "up" : "down"}});
      }
      j["topics"] = nlohmann::json::array();
      for (const auto& t : b.topics()) {
        nlohmann::ordered_json jt{{"name", t.name}, {"partitions", t.partitions}, {"replication_factor", t.replication_factor}};
        jt["detail"] = nlohmann::json::array();
        for (const auto& p : b.partitions(t.name)) {
          jt["detail"].push_back({{"partition", p.partition},
                                  {"replicas", p.replicas},
                                  {"leader", p.leader ? nlohmann::json(*p.leader) : nlohmann::json()},
                                  {"end_offset", p.end_offset}});
        }
        j["topics"].push_back(jt);
      }
      out << j.dump(2) << '\n';
      return kExitOk;
    };
  });

  int broker_id = 0;
  auto* bfail = bs->add_subcommand("fail", "Mark a broker down");
  bfail->add_option("--broker", broker_id, "Broker id")->required();
  auto* brec = bs->add_subcommand("recover", "Bring a broker back and catch its replicas up");
  brec->add_option("--broker", broker_id, "Broker id")->required();
  auto broker_action = [&](bool fail) {
    return [&, fail] {
      state.deterministic = common.deterministic;
      auto b = state.open();
      try {
        if (fail) b.fail_broker(broker_id);
        else b.recover_broker(broker_id);
      } catch (const bus::BusError& e) {
        throw DataError(e.what());
      }
      b.save(state.dir);
      return kExitOk;
    };
  };
  bfail->callback([&] { action = broker_action(true); });
  brec->callback([&] { action = broker_action(false); });

  // store
  auto* st = app.add_subcommand("store", "Load, dump and summarise N-Triples stores");
  st->require_subcommand(1);
  struct {
    std::vector<std::string> files;
    std::string out;
    bool json = false;
  } so;
  auto* sload = st->add_subcommand("load", "Parse and merge files into one canonical N-Triples file");
  sload->add_option("files", so.files, "N-Triples file(s)")->required();
  sload->add_option("-o,--out", so.out, "Output file (default stdout)");
  auto* sdump = st->add_subcommand("dump", "Print the canonical N-Triples of a store");
  sdump->add_option("files", so.files, "N-Triples file(s)")->required();
  auto* sstats = st->add_subcommand("stats", "Triple and term counts plus per-class link counts");
  sstats->add_option("files", so.files, "N-Triples file(s)")->required();
  sstats->add_flag("--json", so.json, "JSON output");
  auto serialize = [&] {
    auto g = load_store({so.files.begin(), so.files.end()});
    Output o(so.out, out);
    rdf::serialize_ntriples(g, *o);
    err << g.size() << " triples\n";
    return kExitOk;
  };
  sload->callback([&] { action = serialize; });
  sdump->callback([&] { action = serialize; });
  sstats->callback([&] {
    action = [&] {
      auto g = load_store({so.files.begin(), so.files.end()});
      auto links = rdf::store_stats(g);
      if (so.json) {
        nlohmann::ordered_json j{{"triples", g.size()}, {"terms", g.term_count()}};
        j["links_by_class"] = links;
        out << j.dump(2) << '\n';
      } else {
        out << "triples " << g.size() << "\nterms " << g.term_count() << "\n";
        for (const auto& [cls, n] : links) out << "  " << rdf::local_name(cls) << " " << n << "\n";
      }
      return kExitOk;
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return kExitOk;
    }
    app.exit(e, err, err);
    return kExitUsage;
  }
  if (!action) {
    err << app.help();
    return kExitUsage;
  }
  try {
    return action();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace tbstream::app
