#include <cstdio>
#include <random>
#include <sstream>

#include "tbstream/ingest/clinical_ingest.hpp"

namespace tbstream::ingest {

using namespace std::chrono;

namespace {

// Raw engine output mapped to ranges by hand so files are identical across
// standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t below(std::uint64_t n) { return engine_() % n; }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

struct FactChoice {
  const char* predicate;
  const char* values[3];
};

// Clinical facts beyond the dataset's columns, used to exercise the rule files.
constexpr FactChoice kExtraFacts[] = {
    {"is_Under_DOTs", {"Yes", "No", nullptr}},
    {"has_Symptom_Improvement", {"Yes", "No", nullptr}},
    {"has_Chest_Xray_Finding", {"Abnormal", "Cavities", "Extensive"}},
    {"has_HIV_Status", {"Positive", "Negative", nullptr}},
    {"shows_TB_Symptoms", {"true", "false", nullptr}},
    {"contact_with_TB_Patient", {"Yes", "No", nullptr}},
    {"contact_Period_Months", {"3", "6", "12"}},
    {"mantoux_Test_Result", {"Positive", "Negative", nullptr}},
    {"weight_Loss_Percentage", {"5", "12", "20"}},
    {"treatment_History", {"Incomplete", "Complete", nullptr}},
    {"has11_Smear_Result", {"positive", "negative", nullptr}},
    {"has12_SmearResult", {"positive", "negative", nullptr}},
    {"has_Contact_History", {"Yes", "No", nullptr}},
    {"has_Miliary_TB_Findings", {"Yes", "No", nullptr}},
    {"has_TB_Co_Infection", {"HIV", "None", nullptr}},
    {"has_Cavitary_Lesion", {"Yes", "No", nullptr}},
    {"has_Respiratory_Rate", {"18", "28", "34"}},
    {"has_TB_Confirmed", {"Yes", "No", nullptr}},
    {"has_Sepsis_Indicators", {"Yes", "No", nullptr}},
};

const char* pick(Rng& rng, const FactChoice& fc) {
  std::size_t n = fc.values[2] ? 3 : 2;
  return fc.values[rng.below(n)];
}

}  // namespace

std::string generate_synthetic_csv(const GeneratorOptions& options) {
  Rng rng(options.seed);
  std::ostringstream out;

  auto header = schema_columns();
  if (options.with_clinical) {
    for (auto c : kClinicalColumns) header.emplace_back(c);
  }
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';

  const sys_days first = year{2020} / January / 1;
  const sys_days last = year{2021} / January / 31;
  const auto span = static_cast<std::uint64_t>((last - first).count() + 1);

  for (std::size_t row = 0; row < options.rows; ++row) {
    std::vector<std::string> cells;
    cells.push_back(std::to_string(row + 1));
    cells.push_back(std::to_string(100000 + row));
    cells.push_back("Patient " + std::to_string(row + 1));
    cells.push_back(rng.chance(0.5) ? "Male" : "Female");

    year_month_day ymd{first + days{static_cast<int>(rng.below(span))}};
    char buf[48];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    cells.emplace_back(buf);
    std::snprintf(buf, sizeof buf, "%02u:%02u", static_cast<unsigned>(rng.below(24)),
                  static_cast<unsigned>(rng.below(60)));
    cells.emplace_back(buf);

    std::array<int, kSymptomCount> bits{};
    for (auto& b : bits) b = rng.chance(options.symptom_prevalence) ? 1 : 0;
    // Keep the shipped consistency checks satisfied: bloody sputum or
    // haemoptysis always comes with a persistent productive cough.
    constexpr std::size_t kCoughingBlood = 1, kSputumBlood = 2, kPhlegm = 10;
    if ((bits[kCoughingBlood] || bits[kSputumBlood]) && !bits[kPhlegm]) bits[kPhlegm] = 1;
    for (auto b : bits) cells.push_back(std::to_string(b));

    if (options.with_clinical) {
      cells.push_back(std::to_string(rng.below(31)));
      std::snprintf(buf, sizeof buf, "%.1f", static_cast<double>(rng.below(51)) / 10.0);
      cells.emplace_back(buf);
      cells.push_back(std::to_string(rng.below(91)));
      cells.push_back(rng.chance(0.3) ? "Yes" : "No");
      static constexpr const char* kRisk[] = {"Low", "Medium", "High"};
      cells.push_back(kRisk[rng.below(3)]);
      cells.push_back(bits[7] ? (rng.chance(0.4) ? "Severe" : "Mild") : "");
      std::string facts;
      for (const auto& fc : kExtraFacts) {
        if (!rng.chance(0.25)) continue;
        if (!facts.empty()) facts += ';';
        facts += fc.predicate;
        facts += '=';
        facts += pick(rng, fc);
      }
      cells.push_back(facts);
    }

    if (options.noise_rate > 0 && rng.chance(options.noise_rate)) {
      switch (rng.below(4)) {
        case 0: cells[6] = ""; break;             // missing fever cell
        case 1: cells[7] = "2"; break;            // non-binary symptom
        case 2: cells[4] = "2020-13-01"; break;   // impossible date
        default: cells[3] = "unknown"; break;     // unrecognised gender
      }
    }

    for (std::size_t i = 0; i < cells.size(); ++i) out << (i ? "," : "") << csv_escape(cells[i]);
    out << '\n';
  }
  return out.str();
}

}  // namespace tbstream::ingest
