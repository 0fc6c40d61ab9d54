#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tbstream::ingest {

/// The 13 binary symptom indicators, in dataset column order.
inline constexpr std::array<std::string_view, 13> kSymptomColumns = {
    "fever_two_weeks",   "coughing_blood",     "sputum_blood",
    "night_sweats",      "chest_pain",         "back_pain",
    "shortness_breath",  "weight_loss",        "fatigue",
    "lumps_neck_armpit", "cough_phlegm_2to4w", "swollen_lymph",
    "appetite_loss"};

inline constexpr std::size_t kSymptomCount = kSymptomColumns.size();

/// Required header columns: identifiers, demographics, timing, symptoms.
std::vector<std::string> schema_columns();

/// Optional columns carrying numeric/categorical clinical facts that the
/// dataset itself lacks. Empty cells mean "not observed".
inline constexpr std::array<std::string_view, 7> kClinicalColumns = {
    "cough_duration_days", "lymph_size_cm",        "age_years",
    "sputum_positive",     "risk_level",           "weight_loss_severity",
    "facts"};

using Timestamp = std::chrono::sys_seconds;

/// A clinical fact value: numeric, boolean, or a string token.
using ClinicalValue = std::variant<double, bool, std::string>;

/// Clinical facts keyed by rule predicate name (e.g. "has_Cough_Duration").
using ClinicalFacts = std::map<std::string, ClinicalValue>;

struct RawRecord {
  std::map<std::string, std::string> column_values;
  std::size_t source_line = 0;
};

enum class RejectReason {
  MissingCritical,
  NonBinarySymptom,
  BadTimestamp,
  ConsistencyViolation
};

std::string_view to_string(RejectReason reason);
std::optional<RejectReason> reject_reason_from_string(std::string_view text);

struct Rejection {
  std::size_t source_line = 0;
  RejectReason reason = RejectReason::MissingCritical;
  std::string detail;

  bool operator==(const Rejection&) const = default;
};

struct PatientRecord {
  std::string patient_id;
  int gender = 0;  // Male = 1, Female = 0
  Timestamp observed_at{};
  int hour = 0;
  int month = 1;
  std::array<std::uint8_t, kSymptomCount> symptoms{};
  ClinicalFacts facts;

  std::uint8_t symptom(std::string_view name) const;
  int positive_symptoms() const;

  bool operator==(const PatientRecord&) const = default;
};

/// Throws std::logic_error when `rec` breaks a PatientRecord invariant.
void assert_record_invariants(const PatientRecord& rec);

/// Fatal header problem; names every missing column.
class HeaderError : public std::runtime_error {
 public:
  explicit HeaderError(std::vector<std::string> missing);
  const std::vector<std::string>& missing() const { return missing_; }

 private:
  std::vector<std::string> missing_;
};

struct CsvParseResult {
  std::vector<std::string> header;
  std::vector<RawRecord> records;
  std::vector<Rejection> rejections;  // ragged rows
};

/// RFC-4180 CSV with a header row. Rows whose arity differs from the header
/// are reported as per-line rejections rather than records.
CsvParseResult parse_csv(std::istream& input,
                         const std::vector<std::string>& schema = schema_columns());
CsvParseResult parse_csv_text(std::string_view text,
                              const std::vector<std::string>& schema = schema_columns());

/// Splits one CSV record that contains no embedded newlines.
std::vector<std::string> split_csv_line(std::string_view line);
std::string csv_escape(std::string_view cell);

std::variant<int, Rejection> encode_gender(std::string_view raw, std::size_t line = 0);

struct TemporalFields {
  Timestamp observed_at;
  int hour = 0;
  int month = 1;
};

std::variant<TemporalFields, Rejection> derive_temporal(std::string_view date,
                                                        std::string_view time,
                                                        std::size_t line = 0);

/// Toggles for the two shipped consistency checks.
struct ConsistencyConfig {
  bool coughing_blood_needs_related = true;  // check (a)
  bool sputum_blood_needs_related = true;    // check (b)
};

std::optional<Rejection> consistency_check(const PatientRecord& candidate,
                                           const ConsistencyConfig& config = {},
                                           std::size_t line = 0);

std::variant<PatientRecord, Rejection> preprocess(const RawRecord& raw,
                                                  const ConsistencyConfig& config = {});

struct IngestResult {
  std::vector<PatientRecord> records;
  std::vector<Rejection> rejections;
};

/// parse_csv + preprocess over every row; rejections sorted by line.
IngestResult ingest(std::istream& input, const ConsistencyConfig& config = {});
IngestResult ingest_text(std::string_view text, const ConsistencyConfig& config = {});

/// One JSON object per line: {"line":N,"reason":"...","detail":"..."}.
void write_rejections_jsonl(std::ostream& out, const std::vector<Rejection>& rejections);

std::string format_timestamp(Timestamp ts);
std::optional<Timestamp> parse_timestamp(std::string_view iso);

/// Bus payload encoding of a record (JSON object).
std::string encode_record(const PatientRecord& rec);
/// Throws std::invalid_argument on malformed payloads.
PatientRecord decode_record(std::string_view payload);

/// Options for the seedable synthetic dataset generator.
struct GeneratorOptions {
  std::size_t rows = 1000;
  std::uint64_t seed = 7;
  bool with_clinical = false;
  double symptom_prevalence = 0.3;
  /// Fraction of rows deliberately corrupted (missing/non-binary/bad dates).
  double noise_rate = 0.0;
};

std::string generate_synthetic_csv(const GeneratorOptions& options);

}  // namespace tbstream::ingest
