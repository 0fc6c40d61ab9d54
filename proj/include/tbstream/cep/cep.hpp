#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "tbstream/bus/bus.hpp"
#include "tbstream/rdf/graph.hpp"
#include "tbstream/rules/engine.hpp"

namespace tbstream::cep {

using bus::Instant;
using bus::Millis;

enum class WindowKind { Tumbling, Sliding };

struct WindowSpec {
  WindowKind kind = WindowKind::Tumbling;
  Millis length{5000};
  Millis slide{5000};  // equals length for tumbling windows

  static WindowSpec tumbling(Millis length);
  static WindowSpec sliding(Millis length, Millis slide);
  /// Throws std::invalid_argument unless length > 0 and 0 < slide <= length.
  void validate() const;
};

/// "250ms", "5s", "2m"; a bare number means seconds.
Millis parse_duration(std::string_view text);
std::string format_duration(Millis d);

/// Window ids holding `t`: floor(t/length) for tumbling windows, every k with
/// k*slide <= t < k*slide + length for sliding ones (ascending).
std::vector<long long> assign_windows(Instant t, const WindowSpec& spec);
Instant window_start(long long id, const WindowSpec& spec);
Instant window_end(long long id, const WindowSpec& spec);

enum class Severity { Info, Warning, Critical };
std::string to_string(Severity s);

/// Label -> severity. Recovery labels are Info; Suspected and
/// Extra-Pulmonary are Warning; Confirmed, Severe and Critical are
/// Critical; anything else is Info. Exact-label overrides win.
class SeverityMap {
 public:
  Severity operator()(std::string_view label) const;
  void set(std::string label, Severity s) { overrides_[std::move(label)] = s; }
  /// JSON object {"label": "Info|Warning|Critical", ...}.
  static SeverityMap from_json(std::string_view text);

 private:
  std::map<std::string, Severity, std::less<>> overrides_;
};

struct Alert {
  std::string patient;
  std::string label;
  std::string rule_id;
  Severity severity = Severity::Info;
  long long window_id = 0;
  Instant emitted_at{};
  std::vector<rules::Fact> actions;
  std::optional<rules::Fact> fact;  // the derived fact behind the label

  bool operator==(const Alert&) const = default;
};

/// One JSON object per alert: patient, label, rule, severity, window, ts.
std::string alert_json(const Alert& a);
std::string format_instant(Instant t);

struct WindowOutcome {
  std::vector<Alert> alerts;
  std::size_t undecodable = 0;
  std::vector<std::string> errors;
};

/// Pools the facts of every decodable record, runs the rules once, and turns
/// each classification into an alert (in severity order).
WindowOutcome process_window(const std::vector<bus::EventEnvelope>& events, const std::vector<rules::Rule>& rules,
                             long long window_id, Instant emitted_at, const SeverityMap& severity = {});

class AlertSink {
 public:
  virtual ~AlertSink() = default;
  virtual std::string name() const = 0;
  /// Throws on failure; the pipeline retries once, then dead-letters.
  virtual void deliver(const Alert& alert) = 0;
};

class JsonlAlertLog : public AlertSink {
 public:
  explicit JsonlAlertLog(std::ostream& out) : out_(&out) {}
  explicit JsonlAlertLog(const std::filesystem::path& path);
  std::string name() const override { return "alert-log"; }
  void deliver(const Alert& alert) override;

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
};

/// Writes each derived classification back into a graph as a triple.
class GraphWriteback : public AlertSink {
 public:
  explicit GraphWriteback(rdf::Graph& g, std::string ns = std::string(rdf::kDefaultNamespace))
      : graph_(g), ns_(std::move(ns)) {}
  std::string name() const override { return "rdf-writeback"; }
  void deliver(const Alert& alert) override;

 private:
  rdf::Graph& graph_;
  std::string ns_;
};

class CallbackSink : public AlertSink {
 public:
  CallbackSink(std::string name, std::function<void(const Alert&)> fn) : name_(std::move(name)), fn_(std::move(fn)) {}
  std::string name() const override { return name_; }
  void deliver(const Alert& alert) override { fn_(alert); }

 private:
  std::string name_;
  std::function<void(const Alert&)> fn_;
};

/// Dead-letter lines: {"sink":..., "error":..., "alert":{...}}.
class DeadLetter {
 public:
  explicit DeadLetter(std::ostream& out) : out_(&out) {}
  explicit DeadLetter(const std::filesystem::path& path);
  void write(const std::string& sink, const std::string& error, const Alert& alert);
  std::size_t count() const { return count_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* out_;
  std::size_t count_ = 0;
};

struct RuleSet {
  std::string name;
  std::vector<rules::Rule> rules;
  double deployment_ms = 0;  // parse + validate + compile
};

/// Loads and times a rule directory (every shipped file) or one rule file.
RuleSet deploy_rules(const std::filesystem::path& path);
RuleSet deploy_rule_text(const std::string& name, std::string_view text);
/// DSL text (with @id/@source lines) that parses back to `rules`.
std::string rules_text(const std::vector<rules::Rule>& rules);

struct PipelineConfig {
  std::string topic = "records";
  std::string group = "cep";
  WindowSpec window;
  Millis batch_interval{1000};
  /// Windows close once a batch starts at or after end + lateness; later
  /// events for a closed window are dropped and counted.
  std::optional<Millis> allowed_lateness;  // defaults to batch_interval
  SeverityMap severity;
  bool deterministic = true;
  unsigned workers = 1;  // concurrent window evaluations when not deterministic
};

struct PipelineReport {
  std::size_t events_ingested = 0;
  std::size_t events_processed = 0;  // summed over windows
  std::size_t alerts_emitted = 0;
  std::size_t windows_closed = 0;
  std::size_t dropped_late = 0;
  std::size_t undecodable = 0;
  std::size_t dead_lettered = 0;
  std::size_t max_overlap = 1;
  std::vector<double> window_latency_ms;
  std::vector<std::pair<long long, std::size_t>> window_events;  // (window id, events) in close order
  std::map<std::string, double> deployment_ms;
  std::vector<std::string> errors;

  double mean_latency_ms() const;
};

/// Routes micro-batches into windows and evaluates each window as it closes.
class WindowManager {
 public:
  WindowManager(const PipelineConfig& config, const RuleSet& rules, std::vector<AlertSink*> sinks,
                DeadLetter* dead_letter, PipelineReport& report);

  void on_batch(const bus::MicroBatch& batch);
  /// Closes every open window (end of stream).
  void finish();

 private:
  void close_until(Instant watermark, bool all);
  void deliver(const Alert& a);

  const PipelineConfig& config_;
  const RuleSet& rules_;
  std::vector<AlertSink*> sinks_;
  DeadLetter* dead_letter_;
  PipelineReport& report_;
  Millis lateness_;
  std::map<long long, std::vector<bus::EventEnvelope>> open_;
  std::optional<Instant> watermark_;  // windows ending at or before it are closed
};

/// Drains the topic through micro-batches of config.batch_interval, closes
/// windows as batches advance and at end of stream, and returns the report.
PipelineReport run_pipeline(bus::Bus& bus, const PipelineConfig& config, const RuleSet& rules,
                            std::vector<AlertSink*> sinks, DeadLetter* dead_letter = nullptr);

struct BenchConfig {
  std::vector<Millis> windows;
  std::vector<std::size_t> rule_counts;
  double rate_per_s = 100;
  Millis duration{60000};
  std::uint64_t seed = 7;
  int deployment_repeats = 50;
};

struct BenchRow {
  Millis window{};
  std::size_t rules = 0;
  std::size_t events = 0;
  std::size_t complete_windows = 0;
  double events_per_window = 0;  // mean over complete windows
  double mean_latency_ms = 0;
  double deployment_ms = 0;      // fastest of the repeats
};

/// Fixed-rate synthetic stream through tumbling windows for every
/// (window, rule count) pair; rule sets take the first n shipped rules.
std::vector<BenchRow> bench(const BenchConfig& config, const std::vector<rules::Rule>& all_rules);
void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows);

}  // namespace tbstream::cep
