#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "json.hpp"
#include "oracle/nested_loop_sparql.hpp"
#include "tbstream/app/cli.hpp"
#include "tbstream/app/workflows.hpp"
#include "tbstream/rdf/ntriples.hpp"

using namespace tbstream;
namespace fs = std::filesystem;

namespace {

const std::string kData = TBSTREAM_DATA_DIR;

struct Run {
  int code = 0;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Run r;
  r.code = app::dispatch(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l)) out.push_back(l);
  return out;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("tbstream_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
           std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  std::string path(const std::string& name) const { return (dir / name).string(); }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, GenWritesRequestedRows) {
  auto r = cli({"gen", "--rows", "1000", "--seed", "7", "-o", path("d.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(slurp(path("d.csv"))).size(), 1001u);
  EXPECT_EQ(cli({"gen", "--rows", "50", "--seed", "7"}).out, cli({"gen", "--rows", "50", "--seed", "7"}).out);
  EXPECT_NE(cli({"gen", "--rows", "50", "--seed", "7"}).out, cli({"gen", "--rows", "50", "--seed", "8"}).out);
}

TEST_F(CliTest, AllNegativeRowsClassifyToNothing) {
  ASSERT_EQ(cli({"gen", "--rows", "200", "--prevalence", "0", "-o", path("neg.csv")}).code, 0);
  auto r = cli({"classify", "-i", path("neg.csv"), "--rules", kData + "/rules", "--format", "csv"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines(r.out), (std::vector<std::string>{"patient,label,rule,severity,window"}));
}

TEST_F(CliTest, ConvertThenQueryMatchesScanOracle) {
  ASSERT_EQ(cli({"gen", "--rows", "300", "--clinical", "-o", path("d.csv")}).code, 0);
  ASSERT_EQ(cli({"convert", "-i", path("d.csv"), "-o", path("s.nt")}).code, 0);
  auto graph = rdf::load_ntriples_file(path("s.nt"));
  auto triples = graph.triples();
  for (const auto& q : app::load_query_suite(kData + "/queries")) {
    auto file = kData + "/queries/" + q.name + ".rq";
    auto r = cli({"query", "run", file, "--store", path("s.nt"), "--format", "csv"});
    ASSERT_EQ(r.code, 0) << q.name << ": " << r.err;
    auto ast = sparql::parse_query(q.text);
    sparql::ResultTable expected;
    expected.header = sparql::evaluate(ast, graph).header;
    expected.rows = oracle::nested_loop_select(ast, triples);
    std::ostringstream ss;
    sparql::write_result(ss, expected, sparql::OutputFormat::Csv);
    auto got = lines(r.out), want = lines(ss.str());
    ASSERT_FALSE(want.empty());
    EXPECT_EQ(got.front(), want.front()) << q.name;
    std::sort(got.begin() + 1, got.end());
    std::sort(want.begin() + 1, want.end());
    EXPECT_EQ(got, want) << q.name;
  }
}

TEST_F(CliTest, DeterministicPipelineRunsAreByteIdentical) {
  ASSERT_EQ(cli({"gen", "--rows", "400", "--clinical", "--seed", "3", "-o", path("d.csv")}).code, 0);
  std::vector<std::string> outputs;
  for (int i = 0; i < 2; ++i) {
    auto n = std::to_string(i);
    auto r = cli({"--deterministic", "pipeline", "run", "-i", path("d.csv"), "--rules", kData + "/rules", "--alerts",
                  path("a" + n), "--store", path("s" + n), "--explain", path("e" + n), "--corpus", kData + "/corpus",
                  "--precautions", kData + "/rules/precautions.json"});
    ASSERT_EQ(r.code, 0) << r.err;
    outputs.push_back(r.out);
  }
  EXPECT_EQ(outputs[0], outputs[1]);
  for (const char* f : {"a", "s", "e"}) {
    auto a = slurp(path(std::string(f) + "0")), b = slurp(path(std::string(f) + "1"));
    EXPECT_FALSE(a.empty()) << f;
    EXPECT_EQ(a, b) << f;
  }
  auto summary = nlohmann::json::parse(outputs[0]);
  EXPECT_EQ(summary["events_processed"], 400);
  EXPECT_EQ(summary["persisted_records"], 400);
  EXPECT_EQ(lines(slurp(path("a0"))).size(), summary["alerts_emitted"].get<std::size_t>());
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(cli({}).code, app::kExitUsage);
  EXPECT_EQ(cli({"frobnicate"}).code, app::kExitUsage);
  EXPECT_EQ(cli({"classify"}).code, app::kExitUsage);
  EXPECT_EQ(cli({"gen", "--rows", "ten"}).code, app::kExitUsage);
  auto help = cli({"--help"});
  EXPECT_EQ(help.code, app::kExitOk);
  EXPECT_NE(help.out.find("pipeline"), std::string::npos);
  EXPECT_EQ(cli({"classify", "-i", path("missing.csv")}).code, app::kExitData);
  std::ofstream(path("bad.rq")) << "SELECT ?x WHERE { ?x ";
  std::ofstream(path("s.nt")) << "";
  EXPECT_EQ(cli({"query", "run", path("bad.rq"), "--store", path("s.nt")}).code, app::kExitData);
  EXPECT_EQ(cli({"query", "run", path("bad.rq")}).code, app::kExitUsage);
  std::ofstream(path("bad.csv")) << "nothing,useful\n1,2\n";
  EXPECT_EQ(cli({"classify", "-i", path("bad.csv"), "--rules", kData + "/rules"}).code, app::kExitData);
  ASSERT_EQ(cli({"gen", "--rows", "5", "-o", path("d.csv")}).code, 0);
  EXPECT_EQ(cli({"classify", "-i", path("d.csv"), "--rules", kData + "/rules", "--format", "xml"}).code,
            app::kExitUsage);
  EXPECT_EQ(cli({"pipeline", "run", "-i", path("d.csv"), "--rules", kData + "/rules", "--window", "5s", "--slide",
                 "10s"})
                .code,
            app::kExitUsage);
}

TEST_F(CliTest, ConfigFileDefaultsYieldToFlags) {
  std::ofstream(path("c.ini")) << "[gen]\nrows=5\nseed=11\n";
  auto from_file = cli({"--config", path("c.ini"), "gen"});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_EQ(lines(from_file.out).size(), 6u);
  EXPECT_EQ(from_file.out, cli({"gen", "--rows", "5", "--seed", "11"}).out);
  auto flag = cli({"--config", path("c.ini"), "gen", "--rows", "3"});
  EXPECT_EQ(lines(flag.out).size(), 4u);
}

TEST_F(CliTest, SuggestApproveApply) {
  auto onto = kData + "/onto/tb_skeleton.nt";
  auto r = cli({"reason", "suggest", "--doc", kData + "/tests/fixtures/novel_guideline.txt", "--onto", onto, "--rules",
                kData + "/rules", "-o", path("pending.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  auto pending = nlohmann::json::parse(slurp(path("pending.json")));
  ASSERT_EQ(pending["suggestions"].size(), 1u);
  EXPECT_EQ(pending["suggestions"][0]["payload"], "Drug_Resistant_TB");

  EXPECT_EQ(cli({"reason", "apply", "-i", path("pending.json"), "--onto", onto, "--rules", kData + "/rules"}).code,
            app::kExitData);

  pending["suggestions"][0]["status"] = "Approved";
  std::ofstream(path("approved.json")) << pending.dump(2);
  r = cli({"reason", "apply", "-i", path("approved.json"), "--onto", onto, "--rules", kData + "/rules", "--onto-out",
           path("updated.nt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(r.out)["applied"].get<bool>());

  auto before = nlohmann::json::parse(cli({"metrics", "--store", onto, "--json"}).out);
  auto after = cli({"metrics", "--store", path("updated.nt"), "--json", "--check"});
  ASSERT_EQ(after.code, 0) << after.out;
  auto ja = nlohmann::json::parse(after.out);
  EXPECT_EQ(ja["counts"]["classes"].get<int>(), before["counts"]["classes"].get<int>() + 1);
  EXPECT_TRUE(ja["consistency"].empty());

  r = cli({"reason", "suggest", "--doc", kData + "/tests/fixtures/novel_guideline.txt", "--onto", path("updated.nt"),
           "--rules", kData + "/rules", "-o", path("again.json")});
  EXPECT_TRUE(nlohmann::json::parse(slurp(path("again.json")))["suggestions"].empty());
}

TEST_F(CliTest, MetricsFromCounts) {
  std::ofstream(path("counts.json")) << R"({"classes": 306, "object_properties": 193, "data_properties": 140,
    "individuals": 18, "subclass_axioms": 299, "classes_with_instances": 5})";
  auto r = cli({"metrics", "--counts", path("counts.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("attribute_richness 0.458 (140/306)"), std::string::npos);
  EXPECT_NE(r.out.find("average_population 0.059 (18/306)"), std::string::npos);
  std::ofstream(path("zero.json")) << R"({"classes": 0})";
  EXPECT_EQ(cli({"metrics", "--counts", path("zero.json")}).code, app::kExitData);
  EXPECT_EQ(cli({"metrics"}).code, app::kExitUsage);
}

TEST_F(CliTest, BusRoundTrip) {
  auto st = path("bus");
  ASSERT_EQ(cli({"gen", "--rows", "30", "-o", path("d.csv")}).code, 0);
  ASSERT_EQ(cli({"ingest", "-i", path("d.csv"), "-o", path("r.jsonl")}).code, 0);
  EXPECT_EQ(cli({"bus", "--dir", st, "consume"}).code, app::kExitData);
  ASSERT_EQ(cli({"bus", "--dir", st, "create", "--topic", "records"}).code, 0);
  ASSERT_EQ(cli({"--deterministic", "bus", "--dir", st, "publish", "-i", path("r.jsonl")}).code, 0);
  ASSERT_EQ(cli({"bus", "--dir", st, "fail", "--broker", "1"}).code, 0);
  auto first = cli({"bus", "--dir", st, "consume", "--max", "20", "--commit"});
  ASSERT_EQ(first.code, 0) << first.err;
  ASSERT_EQ(cli({"bus", "--dir", st, "recover", "--broker", "1"}).code, 0);
  auto rest = cli({"bus", "--dir", st, "consume", "--max", "100", "--commit"});
  auto all = lines(first.out);
  auto more = lines(rest.out);
  all.insert(all.end(), more.begin(), more.end());
  EXPECT_EQ(all.size(), 30u);
  std::set<std::string> payloads;
  for (const auto& l : all) payloads.insert(nlohmann::json::parse(l)["payload"].get<std::string>());
  auto published = lines(slurp(path("r.jsonl")));
  EXPECT_EQ(payloads, std::set<std::string>(published.begin(), published.end()));
  EXPECT_TRUE(cli({"bus", "--dir", st, "consume"}).out.empty());
  auto topics = nlohmann::json::parse(cli({"bus", "--dir", st, "topics"}).out);
  EXPECT_EQ(topics["brokers"][1]["status"], "up");
  EXPECT_EQ(cli({"bus", "--dir", st, "fail", "--broker", "9"}).code, app::kExitData);
}

TEST_F(CliTest, BenchAndTimingOutputs) {
  auto r = cli({"pipeline", "bench", "--rules", kData + "/rules", "--windows", "1s,2s", "--rule-counts", "1,2",
                "--duration", "10s", "--rate", "20", "--repeats", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto rows = lines(r.out);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[0], "window_s,rules,events,complete_windows,events_per_window,mean_latency_ms,deployment_ms");
  EXPECT_EQ(rows[1].substr(0, 9), "1,1,200,1");
  EXPECT_EQ(cli({"pipeline", "bench", "--rules", kData + "/rules", "--rule-counts", "999"}).code, app::kExitUsage);

  auto t = cli({"pipeline", "timing", "--rows", "200", "--rules", kData + "/rules", "--queries", kData + "/queries",
                "--format", "json"});
  ASSERT_EQ(t.code, 0) << t.err;
  auto j = nlohmann::json::parse(t.out);
  EXPECT_EQ(j["records"], 200);
  EXPECT_EQ(j["queries"].size(), 7u);
  EXPECT_TRUE(j.contains("ordered"));
}

TEST_F(CliTest, RetrieveScoreAndStore) {
  auto r = cli({"reason", "retrieve", "--corpus", kData + "/corpus", "-q", "isolation of infectious patients",
                "--format", "json"});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.dump().find("infection_control") != std::string::npos, true);
  auto s = nlohmann::json::parse(cli({"reason", "score", "--pred", "a b", "--ref", "b c"}).out);
  EXPECT_EQ(s["f1"], 0.5);
  auto onto = kData + "/onto/tb_skeleton.nt";
  auto stats = cli({"store", "stats", onto, "--json"});
  ASSERT_EQ(stats.code, 0);
  EXPECT_EQ(nlohmann::json::parse(stats.out)["triples"].get<std::size_t>(), rdf::load_ntriples_file(onto).size());
  EXPECT_EQ(cli({"store", "dump", onto}).out, rdf::serialize_ntriples(rdf::load_ntriples_file(onto)));
}
