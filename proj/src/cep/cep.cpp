#include "tbstream/cep/cep.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <future>
#include <stdexcept>

#include "json.hpp"
#include "tbstream/ingest/clinical_ingest.hpp"

namespace tbstream::cep {

namespace {

long long floor_div(long long a, long long b) {
  long long q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

using Stopwatch = std::chrono::steady_clock;

double elapsed_ms(Stopwatch::time_point since) {
  return std::chrono::duration<double, std::milli>(Stopwatch::now() - since).count();
}

}  // namespace

WindowSpec WindowSpec::tumbling(Millis length) {
  WindowSpec s{WindowKind::Tumbling, length, length};
  s.validate();
  return s;
}

WindowSpec WindowSpec::sliding(Millis length, Millis slide) {
  WindowSpec s{WindowKind::Sliding, length, slide};
  s.validate();
  return s;
}

void WindowSpec::validate() const {
  if (length.count() <= 0) throw std::invalid_argument("window length must be positive");
  if (kind == WindowKind::Tumbling && slide != length) throw std::invalid_argument("tumbling windows slide by their length");
  if (slide.count() <= 0 || slide > length) throw std::invalid_argument("window slide must be in (0, length]");
}

Millis parse_duration(std::string_view text) {
  double v = 0;
  const char* b = text.data();
  const char* e = b + text.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || ptr == b || v < 0) throw std::invalid_argument("bad duration '" + std::string(text) + "'");
  std::string_view unit(ptr, static_cast<std::size_t>(e - ptr));
  double scale = 0;
  if (unit.empty() || unit == "s") scale = 1000;
  else if (unit == "ms") scale = 1;
  else if (unit == "m" || unit == "min") scale = 60000;
  else throw std::invalid_argument("bad duration unit in '" + std::string(text) + "'");
  return Millis{static_cast<long long>(std::llround(v * scale))};
}

std::string format_duration(Millis d) {
  auto ms = d.count();
  if (ms % 1000 == 0) return std::to_string(ms / 1000) + "s";
  return std::to_string(ms) + "ms";
}

std::vector<long long> assign_windows(Instant t, const WindowSpec& spec) {
  spec.validate();
  const long long ts = t.time_since_epoch().count();
  const long long len = spec.length.count();
  const long long slide = spec.slide.count();
  if (spec.kind == WindowKind::Tumbling) return {floor_div(ts, len)};
  // k*slide <= t  and  t < k*slide + len  =>  (t - len) / slide < k <= t / slide
  std::vector<long long> ids;
  for (long long k = floor_div(ts - len, slide) + 1; k <= floor_div(ts, slide); ++k) ids.push_back(k);
  return ids;
}

Instant window_start(long long id, const WindowSpec& spec) { return Instant{Millis{id * spec.slide.count()}}; }

Instant window_end(long long id, const WindowSpec& spec) { return window_start(id, spec) + spec.length; }

std::string to_string(Severity s) {
  switch (s) {
    case Severity::Info: return "Info";
    case Severity::Warning: return "Warning";
    case Severity::Critical: return "Critical";
  }
  return "Info";
}

Severity SeverityMap::operator()(std::string_view label) const {
  if (auto it = overrides_.find(label); it != overrides_.end()) return it->second;
  auto has = [&](std::string_view w) { return label.find(w) != std::string_view::npos; };
  if (has("Recovery") || has("Recovered")) return Severity::Info;
  if (has("Confirmed") || has("Severe") || has("Critical")) return Severity::Critical;
  if (has("Suspected") || has("Extra_Pulmonary") || has("ExtraPulmonary")) return Severity::Warning;
  return Severity::Info;
}

SeverityMap SeverityMap::from_json(std::string_view text) {
  SeverityMap m;
  auto j = nlohmann::json::parse(text);
  for (const auto& [label, v] : j.items()) {
    std::string s = v.get<std::string>();
    if (s == "Info") m.set(label, Severity::Info);
    else if (s == "Warning") m.set(label, Severity::Warning);
    else if (s == "Critical") m.set(label, Severity::Critical);
    else throw std::invalid_argument("unknown severity '" + s + "' for " + label);
  }
  return m;
}

std::string format_instant(Instant t) {
  auto secs = std::chrono::floor<std::chrono::seconds>(t);
  auto ms = (t - secs).count();
  char buf[8];
  std::snprintf(buf, sizeof buf, ".%03lldZ", static_cast<long long>(ms));
  return ingest::format_timestamp(secs) + buf;
}

std::string alert_json(const Alert& a) {
  nlohmann::ordered_json j;
  j["patient"] = a.patient;
  j["label"] = a.label;
  j["rule"] = a.rule_id;
  j["severity"] = to_string(a.severity);
  j["window"] = a.window_id;
  j["ts"] = format_instant(a.emitted_at);
  return j.dump();
}

WindowOutcome process_window(const std::vector<bus::EventEnvelope>& events, const std::vector<rules::Rule>& rules,
                             long long window_id, Instant emitted_at, const SeverityMap& severity) {
  WindowOutcome out;
  rules::FactBase pooled;
  for (const auto& e : events) {
    try {
      pooled.merge(rules::facts_from_record(ingest::decode_record(e.payload)));
    } catch (const std::exception& ex) {
      ++out.undecodable;
      out.errors.push_back(e.topic + "/" + std::to_string(e.partition) + "@" + std::to_string(e.offset) + ": " +
                           ex.what());
    }
  }
  if (pooled.empty()) return out;
  auto result = rules::apply_rules(pooled, rules);
  for (auto& c : result.classifications) {
    Alert a;
    a.patient = c.patient;
    a.label = c.label;
    a.rule_id = c.triggering_rule;
    a.severity = severity(c.label);
    a.window_id = window_id;
    a.emitted_at = emitted_at;
    a.actions = std::move(c.derived_actions);
    a.fact = std::move(c.fact);
    out.alerts.push_back(std::move(a));
  }
  return out;
}

JsonlAlertLog::JsonlAlertLog(const std::filesystem::path& path)
    : file_(std::make_unique<std::ofstream>(path, std::ios::trunc)), out_(file_.get()) {
  if (!*file_) throw std::runtime_error("cannot open alert log " + path.string());
}

void JsonlAlertLog::deliver(const Alert& alert) {
  *out_ << alert_json(alert) << '\n';
  if (!*out_) throw std::runtime_error("alert log write failed");
}

void GraphWriteback::deliver(const Alert& alert) {
  if (alert.fact) graph_.insert(rules::fact_to_triple(*alert.fact, ns_));
}

DeadLetter::DeadLetter(const std::filesystem::path& path)
    : file_(std::make_unique<std::ofstream>(path, std::ios::trunc)), out_(file_.get()) {
  if (!*file_) throw std::runtime_error("cannot open dead-letter file " + path.string());
}

void DeadLetter::write(const std::string& sink, const std::string& error, const Alert& alert) {
  nlohmann::ordered_json j;
  j["sink"] = sink;
  j["error"] = error;
  j["alert"] = nlohmann::ordered_json::parse(alert_json(alert));
  *out_ << j.dump() << '\n';
  out_->flush();
  ++count_;
}

namespace {

RuleSet timed_deploy(const std::string& name, const std::function<std::vector<rules::Rule>()>& load) {
  auto start = Stopwatch::now();
  RuleSet rs;
  rs.name = name;
  rs.rules = load();
  for (const auto& r : rs.rules) rules::validate_rule(r);
  rules::apply_rules({}, rs.rules);  // compiles the join plans
  rs.deployment_ms = elapsed_ms(start);
  return rs;
}

}  // namespace

RuleSet deploy_rules(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) {
    return timed_deploy(path.filename().string(), [&] { return rules::load_rule_set(path.string()); });
  }
  return timed_deploy(path.stem().string(), [&] { return rules::load_rule_file(path.string()); });
}

RuleSet deploy_rule_text(const std::string& name, std::string_view text) {
  return timed_deploy(name, [&] { return rules::parse_rules(text, name + "-"); });
}

std::string rules_text(const std::vector<rules::Rule>& rules) {
  std::string out;
  for (const auto& r : rules) {
    out += "@id " + r.id + "\n";
    if (!r.provenance.empty()) out += "@source " + r.provenance + "\n";
    out += r.repr() + "\n\n";
  }
  return out;
}

double PipelineReport::mean_latency_ms() const {
  if (window_latency_ms.empty()) return 0;
  double sum = 0;
  for (double v : window_latency_ms) sum += v;
  return sum / static_cast<double>(window_latency_ms.size());
}

WindowManager::WindowManager(const PipelineConfig& config, const RuleSet& rules, std::vector<AlertSink*> sinks,
                             DeadLetter* dead_letter, PipelineReport& report)
    : config_(config),
      rules_(rules),
      sinks_(std::move(sinks)),
      dead_letter_(dead_letter),
      report_(report),
      lateness_(config.allowed_lateness.value_or(config.batch_interval)) {
  config_.window.validate();
  const auto len = config_.window.length.count(), slide = config_.window.slide.count();
  report_.max_overlap = static_cast<std::size_t>((len + slide - 1) / slide);
  report_.deployment_ms[rules_.name] = rules_.deployment_ms;
}

void WindowManager::on_batch(const bus::MicroBatch& batch) {
  for (const auto& e : batch.events) {
    ++report_.events_ingested;
    bool dropped = false;
    for (long long id : assign_windows(e.ingest_time, config_.window)) {
      if (watermark_ && window_end(id, config_.window) <= *watermark_) {
        dropped = true;
        continue;
      }
      open_[id].push_back(e);
    }
    if (dropped) ++report_.dropped_late;
  }
  close_until(batch.start - lateness_, false);
}

void WindowManager::finish() { close_until(Instant::max(), true); }

void WindowManager::close_until(Instant watermark, bool all) {
  if (!watermark_ || watermark > *watermark_) watermark_ = watermark;
  std::vector<std::pair<long long, std::vector<bus::EventEnvelope>>> closing;
  while (!open_.empty()) {
    auto it = open_.begin();
    if (!all && window_end(it->first, config_.window) > watermark) break;
    closing.emplace_back(it->first, std::move(it->second));
    open_.erase(it);
  }
  if (closing.empty()) return;

  struct Evaluated {
    WindowOutcome outcome;
    double latency_ms = 0;
  };
  auto evaluate = [&](const std::pair<long long, std::vector<bus::EventEnvelope>>& w) {
    auto start = Stopwatch::now();
    Instant stamp = config_.deterministic ? window_end(w.first, config_.window)
                                          : std::chrono::time_point_cast<Millis>(std::chrono::system_clock::now());
    Evaluated ev{process_window(w.second, rules_.rules, w.first, stamp, config_.severity), 0};
    ev.latency_ms = elapsed_ms(start);
    return ev;
  };

  std::vector<Evaluated> results(closing.size());
  unsigned workers = config_.deterministic ? 1 : std::max(1u, config_.workers);
  if (workers <= 1 || closing.size() == 1) {
    for (std::size_t i = 0; i < closing.size(); ++i) results[i] = evaluate(closing[i]);
  } else {
    std::vector<std::future<void>> tasks;
    for (unsigned w = 0; w < workers; ++w) {
      tasks.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t i = w; i < closing.size(); i += workers) results[i] = evaluate(closing[i]);
      }));
    }
    for (auto& t : tasks) t.get();
  }

  for (std::size_t i = 0; i < closing.size(); ++i) {
    ++report_.windows_closed;
    report_.events_processed += closing[i].second.size();
    report_.window_events.emplace_back(closing[i].first, closing[i].second.size());
    report_.window_latency_ms.push_back(results[i].latency_ms);
    report_.undecodable += results[i].outcome.undecodable;
    for (auto& err : results[i].outcome.errors) report_.errors.push_back(std::move(err));
    for (const auto& a : results[i].outcome.alerts) deliver(a);
  }
}

void WindowManager::deliver(const Alert& a) {
  ++report_.alerts_emitted;
  for (AlertSink* sink : sinks_) {
    std::string error;
    for (int attempt = 0; attempt < 2; ++attempt) {
      try {
        sink->deliver(a);
        error.clear();
        break;
      } catch (const std::exception& e) {
        error = e.what();
      }
    }
    if (error.empty()) continue;
    ++report_.dead_lettered;
    report_.errors.push_back("sink " + sink->name() + ": " + error);
    if (dead_letter_) dead_letter_->write(sink->name(), error, a);
  }
}

PipelineReport run_pipeline(bus::Bus& bus, const PipelineConfig& config, const RuleSet& rules,
                            std::vector<AlertSink*> sinks, DeadLetter* dead_letter) {
  PipelineReport report;
  WindowManager manager(config, rules, std::move(sinks), dead_letter, report);
  std::vector<bus::EventEnvelope> events;
  for (;;) {
    auto got = bus.consume(config.topic, config.group, 4096);
    if (got.empty()) break;
    bus.commit(config.group, got);
    events.insert(events.end(), std::make_move_iterator(got.begin()), std::make_move_iterator(got.end()));
  }
  for (const auto& batch : bus::micro_batches(std::move(events), config.batch_interval)) manager.on_batch(batch);
  manager.finish();
  return report;
}

std::vector<BenchRow> bench(const BenchConfig& config, const std::vector<rules::Rule>& all_rules) {
  if (config.rate_per_s <= 0) throw std::invalid_argument("rate must be positive");
  std::vector<BenchRow> rows;
  const auto n_events = static_cast<std::size_t>(std::llround(config.rate_per_s * config.duration.count() / 1000.0));
  if (n_events == 0) return rows;
  for (auto n : config.rule_counts) {
    if (n == 0 || n > all_rules.size()) {
      throw std::invalid_argument("rule count " + std::to_string(n) + " outside 1.." + std::to_string(all_rules.size()));
    }
  }

  ingest::GeneratorOptions gen;
  gen.rows = n_events;
  gen.seed = config.seed;
  gen.with_clinical = true;
  auto records = ingest::ingest_text(ingest::generate_synthetic_csv(gen)).records;

  auto clock = std::make_shared<bus::ManualClock>();
  bus::BusOptions bo;
  bo.clock = clock;
  bus::Bus stream(bo);
  stream.create_topic({"bench", 3, 2});
  const double step_ms = 1000.0 / config.rate_per_s;
  for (std::size_t i = 0; i < records.size(); ++i) {
    clock->set(Instant{Millis{static_cast<long long>(std::floor(static_cast<double>(i) * step_ms))}});
    stream.publish("bench", records[i].patient_id, ingest::encode_record(records[i]));
  }

  std::map<std::size_t, RuleSet> rule_sets;
  for (auto n : config.rule_counts) {
    std::vector<rules::Rule> subset(all_rules.begin(), all_rules.begin() + static_cast<std::ptrdiff_t>(n));
    auto text = rules_text(subset);
    RuleSet best;
    for (int r = 0; r < std::max(1, config.deployment_repeats); ++r) {
      auto rs = deploy_rule_text("bench" + std::to_string(n), text);
      if (r == 0 || rs.deployment_ms < best.deployment_ms) best = std::move(rs);
    }
    rule_sets[n] = std::move(best);
  }

  int run = 0;
  for (auto w : config.windows) {
    for (auto n : config.rule_counts) {
      PipelineConfig pc;
      pc.topic = "bench";
      pc.group = "bench-" + std::to_string(run++);
      pc.window = WindowSpec::tumbling(w);
      pc.batch_interval = std::min(w, Millis{1000});
      auto report = run_pipeline(stream, pc, rule_sets[n], {});
      BenchRow row;
      row.window = w;
      row.rules = n;
      row.events = report.events_processed;
      std::size_t complete = 0, in_complete = 0;
      for (const auto& [id, count] : report.window_events) {
        if (window_start(id, pc.window).time_since_epoch() >= Millis{0} &&
            window_end(id, pc.window).time_since_epoch() <= config.duration) {
          ++complete;
          in_complete += count;
        }
      }
      if (complete == 0) {
        complete = report.window_events.size();
        in_complete = report.events_processed;
      }
      row.complete_windows = complete;
      row.events_per_window = complete ? static_cast<double>(in_complete) / static_cast<double>(complete) : 0;
      row.mean_latency_ms = report.mean_latency_ms();
      row.deployment_ms = rule_sets[n].deployment_ms;
      rows.push_back(row);
    }
  }
  return rows;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << "window_s,rules,events,complete_windows,events_per_window,mean_latency_ms,deployment_ms\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%g,%zu,%zu,%zu,%.3f,%.4f,%.4f\n", static_cast<double>(r.window.count()) / 1000.0,
                  r.rules, r.events, r.complete_windows, r.events_per_window, r.mean_latency_ms, r.deployment_ms);
    out << buf;
  }
}

}  // namespace tbstream::cep
