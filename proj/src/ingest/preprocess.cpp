#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "tbstream/ingest/clinical_ingest.hpp"

namespace tbstream::ingest {

using namespace std::chrono;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::optional<int> parse_fixed_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  int value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::optional<double> parse_number(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

const std::string* cell(const RawRecord& raw, std::string_view column) {
  auto it = raw.column_values.find(std::string(column));
  return it == raw.column_values.end() ? nullptr : &it->second;
}

// Bare value in a "facts" cell: number, boolean, or string token.
ClinicalValue parse_fact_value(std::string_view text) {
  if (auto n = parse_number(text)) return *n;
  if (text == "true") return true;
  if (text == "false") return false;
  return std::string(text);
}

// Maps the optional clinical columns onto rule predicates.
std::optional<Rejection> read_clinical(const RawRecord& raw, ClinicalFacts& facts) {
  auto reject = [&](std::string detail) {
    return Rejection{raw.source_line, RejectReason::ConsistencyViolation, std::move(detail)};
  };
  struct NumericColumn {
    std::string_view column;
    std::string_view predicate;
  };
  static constexpr NumericColumn numeric[] = {
      {"cough_duration_days", "has_Cough_Duration"},
      {"lymph_size_cm", "has_Lymph_Enlargement_Value"},
      {"age_years", "age_Years"},
  };
  for (const auto& nc : numeric) {
    const auto* v = cell(raw, nc.column);
    if (!v || v->empty()) continue;
    auto n = parse_number(*v);
    if (!n || *n < 0) return reject(std::string(nc.column) + ": not a non-negative number: " + *v);
    facts[std::string(nc.predicate)] = *n;
  }
  struct TokenColumn {
    std::string_view column;
    std::string_view predicate;
  };
  static constexpr TokenColumn tokens[] = {
      {"sputum_positive", "has_Sputum_Positive"},
      {"risk_level", "has_Risk_Level"},
      {"weight_loss_severity", "has_Weight_Loss"},
  };
  for (const auto& tc : tokens) {
    const auto* v = cell(raw, tc.column);
    if (!v || v->empty()) continue;
    facts[std::string(tc.predicate)] = *v;
  }
  if (const auto* v = cell(raw, "facts"); v && !v->empty()) {
    std::string_view rest = *v;
    while (!rest.empty()) {
      auto semi = rest.find(';');
      auto item = rest.substr(0, semi);
      rest = semi == std::string_view::npos ? std::string_view{} : rest.substr(semi + 1);
      if (item.empty()) continue;
      auto eq = item.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == item.size()) {
        return reject("facts: malformed entry '" + std::string(item) + "'");
      }
      facts[std::string(item.substr(0, eq))] = parse_fact_value(item.substr(eq + 1));
    }
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::MissingCritical: return "MissingCritical";
    case RejectReason::NonBinarySymptom: return "NonBinarySymptom";
    case RejectReason::BadTimestamp: return "BadTimestamp";
    case RejectReason::ConsistencyViolation: return "ConsistencyViolation";
  }
  return "MissingCritical";
}

std::optional<RejectReason> reject_reason_from_string(std::string_view text) {
  for (auto r : {RejectReason::MissingCritical, RejectReason::NonBinarySymptom,
                 RejectReason::BadTimestamp, RejectReason::ConsistencyViolation}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::uint8_t PatientRecord::symptom(std::string_view name) const {
  for (std::size_t i = 0; i < kSymptomCount; ++i) {
    if (kSymptomColumns[i] == name) return symptoms[i];
  }
  throw std::out_of_range("unknown symptom: " + std::string(name));
}

int PatientRecord::positive_symptoms() const {
  int n = 0;
  for (auto bit : symptoms) n += bit;
  return n;
}

void assert_record_invariants(const PatientRecord& rec) {
  if (rec.patient_id.empty()) throw std::logic_error("record without patient id");
  if (rec.gender != 0 && rec.gender != 1) throw std::logic_error("gender not binary");
  for (auto bit : rec.symptoms) {
    if (bit > 1) throw std::logic_error("symptom not binary");
  }
  auto day = floor<days>(rec.observed_at);
  year_month_day ymd{day};
  auto hh = duration_cast<hours>(rec.observed_at - day).count();
  if (rec.hour != hh || rec.month != static_cast<int>(static_cast<unsigned>(ymd.month()))) {
    throw std::logic_error("hour/month inconsistent with observed_at");
  }
}

std::variant<int, Rejection> encode_gender(std::string_view raw, std::size_t line) {
  auto g = lower(raw);
  if (g == "male") return 1;
  if (g == "female") return 0;
  return Rejection{line, RejectReason::MissingCritical,
                   raw.empty() ? "gender: empty" : "gender: unrecognised value '" + std::string(raw) + "'"};
}

std::variant<TemporalFields, Rejection> derive_temporal(std::string_view date, std::string_view time,
                                                        std::size_t line) {
  if (date.empty() || time.empty()) {
    return Rejection{line, RejectReason::MissingCritical, date.empty() ? "date: empty" : "time: empty"};
  }
  auto bad = [&](std::string why) {
    return Rejection{line, RejectReason::BadTimestamp,
                     why + " ('" + std::string(date) + "' '" + std::string(time) + "')"};
  };
  if (date.size() != 10 || date[4] != '-' || date[7] != '-' || !all_digits(date.substr(0, 4)) ||
      !all_digits(date.substr(5, 2)) || !all_digits(date.substr(8, 2))) {
    return bad("date not yyyy-mm-dd");
  }
  int y = *parse_fixed_int(date.substr(0, 4));
  int mo = *parse_fixed_int(date.substr(5, 2));
  int d = *parse_fixed_int(date.substr(8, 2));
  year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return bad("invalid calendar date");

  int hh = 0, mm = 0, ss = 0;
  if ((time.size() != 5 && time.size() != 8) || time[2] != ':' || !all_digits(time.substr(0, 2)) ||
      !all_digits(time.substr(3, 2))) {
    return bad("time not HH:MM[:SS]");
  }
  hh = *parse_fixed_int(time.substr(0, 2));
  mm = *parse_fixed_int(time.substr(3, 2));
  if (time.size() == 8) {
    if (time[5] != ':' || !all_digits(time.substr(6, 2))) return bad("time not HH:MM[:SS]");
    ss = *parse_fixed_int(time.substr(6, 2));
  }
  if (hh > 23 || mm > 59 || ss > 59) return bad("time out of range");

  TemporalFields out;
  out.observed_at = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss};
  out.hour = hh;
  out.month = mo;
  return out;
}

std::optional<Rejection> consistency_check(const PatientRecord& c, const ConsistencyConfig& config,
                                           std::size_t line) {
  const auto coughing_blood = c.symptom("coughing_blood");
  const auto sputum_blood = c.symptom("sputum_blood");
  const auto phlegm = c.symptom("cough_phlegm_2to4w");
  if (config.coughing_blood_needs_related && coughing_blood && !phlegm && !sputum_blood) {
    return Rejection{line, RejectReason::ConsistencyViolation,
                     "check a: coughing_blood without cough_phlegm_2to4w or sputum_blood"};
  }
  if (config.sputum_blood_needs_related && sputum_blood && !phlegm && !coughing_blood) {
    return Rejection{line, RejectReason::ConsistencyViolation,
                     "check b: sputum_blood without cough_phlegm_2to4w or coughing_blood"};
  }
  return std::nullopt;
}

std::variant<PatientRecord, Rejection> preprocess(const RawRecord& raw, const ConsistencyConfig& config) {
  const auto line = raw.source_line;
  auto get = [&](std::string_view col) -> std::string {
    const auto* v = cell(raw, col);
    return v ? *v : std::string{};
  };

  PatientRecord rec;
  rec.patient_id = "P" + std::to_string(line);

  auto gender = encode_gender(get("gender"), line);
  if (auto* r = std::get_if<Rejection>(&gender)) return *r;
  rec.gender = std::get<int>(gender);

  auto temporal = derive_temporal(get("date"), get("time"), line);
  if (auto* r = std::get_if<Rejection>(&temporal)) return *r;
  const auto& tf = std::get<TemporalFields>(temporal);
  rec.observed_at = tf.observed_at;
  rec.hour = tf.hour;
  rec.month = tf.month;

  for (std::size_t i = 0; i < kSymptomCount; ++i) {
    auto v = get(kSymptomColumns[i]);
    if (v.empty()) {
      return Rejection{line, RejectReason::MissingCritical, std::string(kSymptomColumns[i]) + ": empty"};
    }
    if (v != "0" && v != "1") {
      return Rejection{line, RejectReason::NonBinarySymptom,
                       std::string(kSymptomColumns[i]) + ": '" + v + "' is not 0 or 1"};
    }
    rec.symptoms[i] = v == "1" ? 1 : 0;
  }

  if (auto r = consistency_check(rec, config, line)) return *r;
  if (auto r = read_clinical(raw, rec.facts)) return *r;

  assert_record_invariants(rec);
  return rec;
}

IngestResult ingest_text(std::string_view text, const ConsistencyConfig& config) {
  auto parsed = parse_csv_text(text);
  IngestResult out;
  out.rejections = std::move(parsed.rejections);
  for (const auto& raw : parsed.records) {
    auto r = preprocess(raw, config);
    if (auto* rec = std::get_if<PatientRecord>(&r)) {
      out.records.push_back(std::move(*rec));
    } else {
      out.rejections.push_back(std::get<Rejection>(r));
    }
  }
  std::stable_sort(out.rejections.begin(), out.rejections.end(),
                   [](const Rejection& a, const Rejection& b) { return a.source_line < b.source_line; });
  return out;
}

IngestResult ingest(std::istream& input, const ConsistencyConfig& config) {
  std::string text{std::istreambuf_iterator<char>(input), std::istreambuf_iterator<char>()};
  return ingest_text(text, config);
}

void write_rejections_jsonl(std::ostream& out, const std::vector<Rejection>& rejections) {
  for (const auto& r : rejections) {
    nlohmann::ordered_json j;
    j["line"] = r.source_line;
    j["reason"] = to_string(r.reason);
    j["detail"] = r.detail;
    out << j.dump() << '\n';
  }
}

std::string format_timestamp(Timestamp ts) {
  auto day = floor<days>(ts);
  year_month_day ymd{day};
  hh_mm_ss<seconds> tod{ts - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<long>(tod.hours().count()), static_cast<long>(tod.minutes().count()),
                static_cast<long>(tod.seconds().count()));
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view iso) {
  if (iso.size() < 16 || iso[10] != 'T') return std::nullopt;
  auto r = derive_temporal(iso.substr(0, 10), iso.substr(11));
  if (auto* tf = std::get_if<TemporalFields>(&r)) return tf->observed_at;
  return std::nullopt;
}

std::string encode_record(const PatientRecord& rec) {
  nlohmann::ordered_json j;
  j["patient_id"] = rec.patient_id;
  j["gender"] = rec.gender;
  j["observed_at"] = format_timestamp(rec.observed_at);
  j["hour"] = rec.hour;
  j["month"] = rec.month;
  auto& s = j["symptoms"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < kSymptomCount; ++i) s[std::string(kSymptomColumns[i])] = rec.symptoms[i];
  auto& f = j["facts"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : rec.facts) {
    std::visit([&](const auto& x) { f[k] = x; }, v);
  }
  return j.dump();
}

PatientRecord decode_record(std::string_view payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("record payload is not JSON: ") + e.what());
  }
  try {
    PatientRecord rec;
    rec.patient_id = j.at("patient_id").get<std::string>();
    rec.gender = j.at("gender").get<int>();
    auto ts = parse_timestamp(j.at("observed_at").get<std::string>());
    if (!ts) throw std::invalid_argument("bad observed_at");
    rec.observed_at = *ts;
    rec.hour = j.at("hour").get<int>();
    rec.month = j.at("month").get<int>();
    const auto& s = j.at("symptoms");
    for (std::size_t i = 0; i < kSymptomCount; ++i) {
      rec.symptoms[i] = s.at(std::string(kSymptomColumns[i])).get<std::uint8_t>();
    }
    if (j.contains("facts")) {
      for (const auto& [k, v] : j.at("facts").items()) {
        if (v.is_boolean()) rec.facts[k] = v.get<bool>();
        else if (v.is_number()) rec.facts[k] = v.get<double>();
        else rec.facts[k] = v.get<std::string>();
      }
    }
    assert_record_invariants(rec);
    return rec;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("record payload malformed: ") + e.what());
  } catch (const std::logic_error& e) {
    throw std::invalid_argument(std::string("record payload invalid: ") + e.what());
  }
}

}  // namespace tbstream::ingest
