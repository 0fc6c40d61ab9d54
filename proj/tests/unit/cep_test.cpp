#include <algorithm>
#include <map>
#include <random>
#include <sstream>
#include <tuple>

#include <gtest/gtest.h>

#include "json.hpp"
#include "tbstream/cep/cep.hpp"
#include "tbstream/ingest/clinical_ingest.hpp"

using namespace tbstream;
using namespace tbstream::cep;
using namespace std::chrono_literals;

namespace {

const std::string kRuleDir = std::string(TBSTREAM_DATA_DIR) + "/rules";

const std::vector<rules::Rule>& all_rules() {
  static const std::vector<rules::Rule> rs = rules::load_rule_set(kRuleDir);
  return rs;
}

RuleSet stage_rules() { return deploy_rules(kRuleDir + "/stage.swrlx"); }

Instant at(long long ms) { return Instant{Millis{ms}}; }

ingest::PatientRecord record(const std::string& id) {
  ingest::PatientRecord r;
  r.patient_id = id;
  r.gender = 1;
  r.observed_at = std::chrono::sys_days{std::chrono::year{2020} / 6 / 2} + std::chrono::hours{10};
  r.hour = 10;
  r.month = 6;
  return r;
}

bus::EventEnvelope envelope(const ingest::PatientRecord& r, long long ms, std::uint64_t offset = 0) {
  bus::EventEnvelope e;
  e.topic = "records";
  e.offset = offset;
  e.key = r.patient_id;
  e.payload = ingest::encode_record(r);
  e.ingest_time = at(ms);
  return e;
}

std::vector<ingest::PatientRecord> synthetic(std::size_t rows, std::uint64_t seed) {
  ingest::GeneratorOptions opt;
  opt.rows = rows;
  opt.seed = seed;
  opt.with_clinical = true;
  return ingest::ingest_text(ingest::generate_synthetic_csv(opt)).records;
}

struct Published {
  std::shared_ptr<bus::ManualClock> clock = std::make_shared<bus::ManualClock>();
  bus::Bus bus;
  Published() : bus(bus::BusOptions{3, clock}) { bus.create_topic({"records", 3, 2}); }
};

void publish_all(Published& p, const std::vector<ingest::PatientRecord>& recs, long long step_ms) {
  for (std::size_t i = 0; i < recs.size(); ++i) {
    p.clock->set(at(static_cast<long long>(i) * step_ms));
    p.bus.publish("records", recs[i].patient_id, ingest::encode_record(recs[i]));
  }
}

using AlertKey = std::tuple<std::string, std::string, std::string>;

std::multiset<AlertKey> keys(const std::vector<Alert>& alerts) {
  std::multiset<AlertKey> out;
  for (const auto& a : alerts) out.emplace(a.patient, a.label, a.rule_id);
  return out;
}

std::multiset<AlertKey> batch_oracle(const std::vector<ingest::PatientRecord>& recs,
                                     const std::vector<rules::Rule>& rules) {
  std::multiset<AlertKey> out;
  for (const auto& r : recs) {
    for (const auto& c : rules::classify_patient(r, rules)) out.emplace(c.patient, c.label, c.triggering_rule);
  }
  return out;
}

struct Collect {
  std::vector<Alert> alerts;
  CallbackSink sink{"collect", [this](const Alert& a) { alerts.push_back(a); }};
};

}  // namespace

TEST(Windows, AssignExamples) {
  EXPECT_EQ(assign_windows(at(7000), WindowSpec::tumbling(5s)), (std::vector<long long>{1}));
  EXPECT_EQ(assign_windows(at(7000), WindowSpec::sliding(10s, 5s)), (std::vector<long long>{0, 1}));
  EXPECT_EQ(assign_windows(at(0), WindowSpec::tumbling(5s)), (std::vector<long long>{0}));
  auto ids = assign_windows(at(0), WindowSpec::sliding(10s, 3s));
  EXPECT_NE(std::find(ids.begin(), ids.end(), 0), ids.end());
  EXPECT_EQ(assign_windows(at(-1), WindowSpec::tumbling(5s)), (std::vector<long long>{-1}));
}

TEST(Windows, SlidingMatchesMembershipOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    long long len = 1 + static_cast<long long>(rng() % 20000);
    long long slide = 1 + static_cast<long long>(rng() % static_cast<std::uint64_t>(len));
    long long t = static_cast<long long>(rng() % 200000) - 50000;
    auto spec = WindowSpec::sliding(Millis{len}, Millis{slide});
    std::vector<long long> expected;
    for (long long k = (t - len) / slide - 2; k <= t / slide + 2; ++k) {
      if (k * slide <= t && t < k * slide + len) expected.push_back(k);
    }
    ASSERT_EQ(assign_windows(at(t), spec), expected) << "t=" << t << " len=" << len << " slide=" << slide;
    for (long long k : expected) {
      EXPECT_LE(window_start(k, spec), at(t));
      EXPECT_GT(window_end(k, spec), at(t));
    }
  }
}

TEST(Windows, TumblingPartitionsTimeline) {
  auto spec = WindowSpec::tumbling(5s);
  for (long long t = -12000; t < 12000; t += 250) {
    auto ids = assign_windows(at(t), spec);
    ASSERT_EQ(ids.size(), 1u);
    EXPECT_LE(window_start(ids[0], spec), at(t));
    EXPECT_LT(at(t), window_end(ids[0], spec));
  }
}

TEST(Windows, SpecValidationAndDurations) {
  EXPECT_THROW(WindowSpec::tumbling(0ms), std::invalid_argument);
  EXPECT_THROW(WindowSpec::sliding(5s, 6s), std::invalid_argument);
  EXPECT_THROW(WindowSpec::sliding(5s, 0ms), std::invalid_argument);
  EXPECT_NO_THROW(WindowSpec::sliding(5s, 5s));
  EXPECT_EQ(parse_duration("5s"), 5000ms);
  EXPECT_EQ(parse_duration("250ms"), 250ms);
  EXPECT_EQ(parse_duration("2m"), 120000ms);
  EXPECT_EQ(parse_duration("10"), 10000ms);
  EXPECT_EQ(parse_duration("1.5s"), 1500ms);
  EXPECT_THROW(parse_duration("fast"), std::invalid_argument);
  EXPECT_THROW(parse_duration("5h"), std::invalid_argument);
  EXPECT_EQ(format_duration(5000ms), "5s");
  EXPECT_EQ(format_duration(250ms), "250ms");
}

TEST(Severity, DefaultMappingAndOverrides) {
  SeverityMap m;
  EXPECT_EQ(m("Recovery_Stage"), Severity::Info);
  EXPECT_EQ(m("Suspected_TB"), Severity::Warning);
  EXPECT_EQ(m("Extra_Pulmonary_TB"), Severity::Warning);
  EXPECT_EQ(m("Confirmed_Pulmonary_TB"), Severity::Critical);
  EXPECT_EQ(m("Severe_TB"), Severity::Critical);
  EXPECT_EQ(m("Something_Else"), Severity::Info);
  for (const auto& r : all_rules()) {
    for (const auto& a : r.consequent) {
      auto s = m(a.name);
      EXPECT_TRUE(s == Severity::Info || s == Severity::Warning || s == Severity::Critical);
    }
  }
  auto o = SeverityMap::from_json(R"({"Suspected_TB": "Critical"})");
  EXPECT_EQ(o("Suspected_TB"), Severity::Critical);
  EXPECT_EQ(o("Severe_TB"), Severity::Critical);
  EXPECT_THROW(SeverityMap::from_json(R"({"X": "Loud"})"), std::invalid_argument);
}

TEST(ProcessWindow, EmptyWindowHasNoAlerts) {
  auto out = process_window({}, all_rules(), 0, at(5000));
  EXPECT_TRUE(out.alerts.empty());
  EXPECT_EQ(out.undecodable, 0u);
}

TEST(ProcessWindow, StageOneEventGivesSuspectedWarning) {
  auto rec = record("P7");
  rec.symptoms[0] = 1;
  rec.facts["has_Cough_Duration"] = 15.0;
  auto rs = stage_rules();
  auto out = process_window({envelope(rec, 1200)}, rs.rules, 0, at(5000));
  auto oracle = rules::classify_patient(rec, rs.rules);
  ASSERT_EQ(out.alerts.size(), 1u);
  ASSERT_EQ(oracle.size(), 1u);
  EXPECT_EQ(out.alerts[0].label, "Suspected_TB");
  EXPECT_EQ(out.alerts[0].label, oracle[0].label);
  EXPECT_EQ(out.alerts[0].rule_id, oracle[0].triggering_rule);
  EXPECT_EQ(out.alerts[0].severity, Severity::Warning);
  EXPECT_EQ(out.alerts[0].patient, "P7");
  EXPECT_EQ(out.alerts[0].window_id, 0);
}

TEST(ProcessWindow, HighRiskTrioRaisesAtLeastThreeAlerts) {
  std::vector<bus::EventEnvelope> events;
  std::vector<ingest::PatientRecord> recs;
  std::pair<const char*, double> trio[] = {{"P109", 18}, {"P126", 21}, {"P164", 16}};
  long long t = 100;
  for (auto [id, cough] : trio) {
    auto r = record(id);
    r.symptoms[0] = 1;
    r.facts["has_Cough_Duration"] = cough;
    r.facts["has_Risk_Level"] = std::string("High");
    recs.push_back(r);
    events.push_back(envelope(r, t += 700));
  }
  auto out = process_window(events, all_rules(), 0, at(5000));
  EXPECT_GE(out.alerts.size(), 3u);
  EXPECT_EQ(keys(out.alerts), batch_oracle(recs, all_rules()));
  std::set<std::string> patients;
  for (const auto& a : out.alerts) patients.insert(a.patient);
  EXPECT_EQ(patients, (std::set<std::string>{"P109", "P126", "P164"}));
}

TEST(ProcessWindow, UndecodablePayloadIsCountedAndSkipped) {
  auto good = record("P1");
  good.symptoms[0] = 1;
  good.facts["has_Cough_Duration"] = 20.0;
  auto bad = envelope(good, 10);
  bad.payload = "{not json";
  auto rs = stage_rules();
  auto out = process_window({bad, envelope(good, 20)}, rs.rules, 3, at(20000));
  EXPECT_EQ(out.undecodable, 1u);
  ASSERT_EQ(out.errors.size(), 1u);
  EXPECT_EQ(out.alerts.size(), 1u);
}

TEST(ProcessWindow, OrderInsensitive) {
  auto recs = synthetic(60, 5);
  std::vector<bus::EventEnvelope> events;
  for (std::size_t i = 0; i < recs.size(); ++i) events.push_back(envelope(recs[i], static_cast<long long>(i)));
  auto forward = process_window(events, all_rules(), 0, at(5000));
  std::reverse(events.begin(), events.end());
  auto backward = process_window(events, all_rules(), 0, at(5000));
  EXPECT_EQ(forward.alerts, backward.alerts);
}

TEST(Pipeline, BatchEquivalenceOnThousandRecords) {
  auto recs = synthetic(1000, 21);
  Published p;
  publish_all(p, recs, 37);
  PipelineConfig cfg;
  cfg.window = WindowSpec::tumbling(5s);
  for (const char* set : {"stage", "all"}) {
    RuleSet rs = std::string(set) == "stage" ? stage_rules() : deploy_rules(kRuleDir);
    cfg.group = std::string("g-") + set;
    Collect c;
    auto report = run_pipeline(p.bus, cfg, rs, {&c.sink});
    EXPECT_EQ(report.events_ingested, 1000u);
    EXPECT_EQ(report.events_processed, 1000u);
    EXPECT_EQ(report.alerts_emitted, c.alerts.size());
    EXPECT_EQ(report.dropped_late, 0u);
    EXPECT_EQ(keys(c.alerts), batch_oracle(recs, rs.rules)) << set;
    EXPECT_GT(c.alerts.size(), 0u);
    EXPECT_EQ(report.windows_closed, static_cast<std::size_t>((999 * 37) / 5000 + 1));
    EXPECT_EQ(report.window_latency_ms.size(), report.windows_closed);
    for (const auto& a : c.alerts) {
      auto w = window_end(a.window_id, cfg.window);
      EXPECT_EQ(a.emitted_at, w);
      EXPECT_EQ(a.severity, cfg.severity(a.label));
    }
  }
}

TEST(Pipeline, SlidingWindowsRespectOverlapBound) {
  auto recs = synthetic(300, 3);
  Published p;
  publish_all(p, recs, 50);
  PipelineConfig cfg;
  cfg.window = WindowSpec::sliding(10s, 4s);
  auto rs = stage_rules();
  auto report = run_pipeline(p.bus, cfg, rs, {});
  EXPECT_EQ(report.max_overlap, 3u);
  EXPECT_EQ(report.events_ingested, 300u);
  EXPECT_GT(report.events_processed, report.events_ingested);
  EXPECT_LE(report.events_processed, report.events_ingested * report.max_overlap);
  EXPECT_EQ(report.window_latency_ms.size(), report.windows_closed);
  std::size_t sum = 0;
  for (const auto& [id, n] : report.window_events) sum += n;
  EXPECT_EQ(sum, report.events_processed);
}

TEST(Pipeline, ZeroEventStream) {
  Published p;
  Collect c;
  auto rs = stage_rules();
  auto report = run_pipeline(p.bus, PipelineConfig{}, rs, {&c.sink});
  EXPECT_EQ(report.events_ingested, 0u);
  EXPECT_EQ(report.events_processed, 0u);
  EXPECT_EQ(report.alerts_emitted, 0u);
  EXPECT_EQ(report.windows_closed, 0u);
  EXPECT_EQ(report.dropped_late, 0u);
  EXPECT_EQ(report.dead_lettered, 0u);
  EXPECT_TRUE(report.window_latency_ms.empty());
  EXPECT_DOUBLE_EQ(report.mean_latency_ms(), 0.0);
  EXPECT_TRUE(c.alerts.empty());
}

TEST(Pipeline, FlakySinkIsRetriedOnce) {
  auto recs = synthetic(200, 9);
  Published p;
  publish_all(p, recs, 40);
  std::map<std::string, int> attempts;
  std::size_t delivered = 0;
  CallbackSink flaky("flaky", [&](const Alert& a) {
    if (attempts[a.patient + a.label]++ == 0) throw std::runtime_error("transient");
    ++delivered;
  });
  CallbackSink broken("broken", [](const Alert&) { throw std::runtime_error("disk full"); });
  std::ostringstream dl;
  DeadLetter dead(dl);
  auto rs = deploy_rules(kRuleDir);
  auto report = run_pipeline(p.bus, PipelineConfig{}, rs, {&flaky, &broken}, &dead);
  ASSERT_GT(report.alerts_emitted, 0u);
  EXPECT_EQ(delivered, report.alerts_emitted);
  EXPECT_EQ(report.dead_lettered, report.alerts_emitted);
  EXPECT_EQ(dead.count(), report.alerts_emitted);
  std::istringstream lines(dl.str());
  std::string line;
  std::size_t n = 0;
  while (std::getline(lines, line)) {
    auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["sink"], "broken");
    EXPECT_EQ(j["error"], "disk full");
    EXPECT_TRUE(j["alert"].contains("patient"));
    ++n;
  }
  EXPECT_EQ(n, report.alerts_emitted);
}

TEST(Pipeline, LateEventsAreDropped) {
  PipelineConfig cfg;
  cfg.window = WindowSpec::tumbling(5s);
  auto rs = stage_rules();
  PipelineReport report;
  Collect c;
  WindowManager wm(cfg, rs, {&c.sink}, nullptr, report);
  auto r = record("P1");
  r.symptoms[0] = 1;
  r.facts["has_Cough_Duration"] = 30.0;
  wm.on_batch({at(0), at(1000), {envelope(r, 500)}});
  wm.on_batch({at(5000), at(6000), {}});
  EXPECT_EQ(report.windows_closed, 0u);  // still within the allowed lateness
  wm.on_batch({at(6000), at(7000), {envelope(r, 4900)}});
  EXPECT_EQ(report.windows_closed, 1u);
  EXPECT_EQ(report.window_events.back().second, 2u);
  wm.on_batch({at(7000), at(8000), {envelope(r, 4950), envelope(r, 7100)}});
  wm.finish();
  EXPECT_EQ(report.dropped_late, 1u);
  EXPECT_EQ(report.events_ingested, 4u);
  EXPECT_EQ(report.events_processed, 3u);
  EXPECT_EQ(report.windows_closed, 2u);
  EXPECT_EQ(c.alerts.size(), 2u);
}

TEST(Pipeline, DeterministicAlertLogIsByteIdentical) {
  auto run = [] {
    auto recs = synthetic(500, 13);
    Published p;
    publish_all(p, recs, 25);
    std::ostringstream log;
    JsonlAlertLog sink(log);
    auto rs = deploy_rules(kRuleDir);
    run_pipeline(p.bus, PipelineConfig{}, rs, {&sink});
    return log.str();
  };
  auto a = run();
  auto b = run();
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  auto first = nlohmann::json::parse(a.substr(0, a.find('\n')));
  for (const char* k : {"patient", "label", "rule", "severity", "window", "ts"}) EXPECT_TRUE(first.contains(k)) << k;
}

TEST(Pipeline, ConcurrentEvaluationMatchesDeterministic) {
  auto recs = synthetic(800, 17);
  Published p;
  publish_all(p, recs, 20);
  auto rs = deploy_rules(kRuleDir);
  PipelineConfig cfg;
  Collect serial;
  cfg.group = "serial";
  run_pipeline(p.bus, cfg, rs, {&serial.sink});
  Collect parallel;
  cfg.group = "parallel";
  cfg.deterministic = false;
  cfg.workers = 4;
  auto report = run_pipeline(p.bus, cfg, rs, {&parallel.sink});
  EXPECT_EQ(keys(parallel.alerts), keys(serial.alerts));
  EXPECT_EQ(report.window_latency_ms.size(), report.windows_closed);
}

TEST(Pipeline, WritebackStoresDerivedClassifications) {
  auto recs = synthetic(200, 4);
  Published p;
  publish_all(p, recs, 30);
  rdf::Graph g;
  GraphWriteback wb(g);
  Collect c;
  auto rs = deploy_rules(kRuleDir);
  run_pipeline(p.bus, PipelineConfig{}, rs, {&wb, &c.sink});
  ASSERT_FALSE(c.alerts.empty());
  for (const auto& a : c.alerts) {
    ASSERT_TRUE(a.fact.has_value());
    EXPECT_TRUE(g.contains(rules::fact_to_triple(*a.fact)));
  }
  EXPECT_LE(g.size(), c.alerts.size());
}

TEST(Deploy, RuleTextRoundTrips) {
  auto text = rules_text(all_rules());
  auto back = rules::parse_rules(text);
  ASSERT_EQ(back.size(), all_rules().size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(back[i].id, all_rules()[i].id);
    EXPECT_EQ(back[i].provenance, all_rules()[i].provenance);
    EXPECT_EQ(back[i].repr(), all_rules()[i].repr());
  }
  auto rs = deploy_rule_text("all", text);
  EXPECT_EQ(rs.rules.size(), all_rules().size());
  EXPECT_GT(rs.deployment_ms, 0.0);
  EXPECT_THROW(deploy_rule_text("bad", "A(?p) -> "), std::exception);
}

TEST(Bench, EventsPerWindowGrowWithWindowAndTrackRate) {
  BenchConfig cfg;
  cfg.windows = {5s, 10s};
  cfg.rule_counts = {5};
  cfg.duration = 60s;
  cfg.rate_per_s = 100;
  cfg.deployment_repeats = 3;
  auto rows = bench(cfg, all_rules());
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_GE(rows[1].events_per_window, rows[0].events_per_window);
  for (const auto& r : rows) {
    double expected = cfg.rate_per_s * static_cast<double>(r.window.count()) / 1000.0;
    EXPECT_NEAR(r.events_per_window, expected, 0.2 * expected);
    EXPECT_EQ(r.events, 6000u);
    EXPECT_GT(r.complete_windows, 0u);
  }
  std::ostringstream csv;
  write_bench_csv(csv, rows);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "window_s,rules,events,complete_windows,events_per_window,mean_latency_ms,deployment_ms");
}

TEST(Bench, DeploymentRecordedPerRuleCount) {
  BenchConfig cfg;
  cfg.windows = {5s};
  cfg.rule_counts = {5, 10, 15, 20, 25};
  cfg.duration = 10s;
  cfg.deployment_repeats = 3;
  auto rows = bench(cfg, all_rules());
  ASSERT_EQ(rows.size(), 5u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].rules, cfg.rule_counts[i]);
    EXPECT_GT(rows[i].deployment_ms, 0.0);
  }
}

TEST(Bench, DegenerateParameters) {
  BenchConfig cfg;
  cfg.windows = {5s};
  cfg.rule_counts = {5};
  cfg.duration = 0s;
  EXPECT_TRUE(bench(cfg, all_rules()).empty());
  cfg.duration = 5s;
  cfg.rule_counts = {all_rules().size() + 1};
  EXPECT_THROW(bench(cfg, all_rules()), std::invalid_argument);
  cfg.rule_counts = {5};
  cfg.rate_per_s = 0;
  EXPECT_THROW(bench(cfg, all_rules()), std::invalid_argument);
}
