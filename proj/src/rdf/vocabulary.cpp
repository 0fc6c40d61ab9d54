#include <charconv>
#include <cmath>

#include "tbstream/rdf/vocabulary.hpp"

namespace tbstream::rdf {

namespace {

constexpr VocabEntry kVocabulary[] = {
    {"has_Fever_Status", "hasFeverStatus", "fever_two_weeks"},
    {"has_Haemoptysis", "hasCoughingBlood", "coughing_blood"},
    {"has_Sputum_Blood", "hasSputumBlood", "sputum_blood"},
    {"has_Night_Sweats", "hasNightSweats", "night_sweats"},
    {"has_Chest_Pain", "hasChestPain", "chest_pain"},
    {"has_Back_Pain", "hasBackPain", "back_pain"},
    {"has_Breathing_Difficulty", "hasBreathingDifficulty", "shortness_breath"},
    {"has_Weight_Loss", "hasWeightLoss", "weight_loss"},
    {"has_Fatigue", "hasFatigue", "fatigue"},
    {"has_Lumps_Neck_Armpit", "hasLumpsNeckArmpit", "lumps_neck_armpit"},
    {"has_Persistent_Cough", "hasPersistentCough", "cough_phlegm_2to4w"},
    {"has_Swollen_Lymph_Nodes", "hasSwollenLymph", "swollen_lymph"},
    {"has_Appetite_Loss", "hasAppetiteLoss", "appetite_loss"},
    {"has_Cough_Duration", "hasCoughDuration", "cough_duration_days"},
    {"has_Lymph_Enlargement_Value", "hasLymphEnlargementValue", "lymph_size_cm"},
    {"age_Years", "hasAge", "age_years"},
    {"has_Sputum_Positive", "hasSputumPositive", "sputum_positive"},
    {"has_Risk_Level", "hasRiskLevel", "risk_level"},
    {"has_Gender", "hasGender", "gender"},
    {"has_Observed_At", "hasObservedAt", "date"},
    {"has_Month", "hasMonth", "date"},
};

const VocabEntry* symptom_entry(std::size_t i) { return &kVocabulary[i]; }

}  // namespace

std::span<const VocabEntry> vocabulary() { return kVocabulary; }

std::string rdf_local_for(std::string_view rule_name) {
  for (const auto& e : kVocabulary) {
    if (e.rule_name == rule_name) return std::string(e.rdf_local);
  }
  return std::string(rule_name);
}

std::string rule_name_for(std::string_view rdf_local) {
  for (const auto& e : kVocabulary) {
    if (e.rdf_local == rdf_local) return std::string(e.rule_name);
  }
  return std::string(rdf_local);
}

std::string rdf_class_for(std::string_view rule_class) {
  return std::string(rule_class == kPatientClass ? kPatientClassRdf : rule_class);
}

std::string rule_class_for(std::string_view rdf_local) {
  return std::string(rdf_local == kPatientClassRdf ? kPatientClass : rdf_local);
}

std::string patient_iri(std::string_view patient_id, std::string_view ns) {
  return std::string(ns) + std::string(patient_id);
}

std::string format_number(double v) {
  if (std::isfinite(v) && v == std::trunc(v) && std::fabs(v) < 1e15) {
    return std::to_string(static_cast<long long>(v));
  }
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

Term value_term(const ingest::ClinicalValue& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    bool integral = *d == std::trunc(*d) && std::fabs(*d) < 1e15;
    return Term::typed(format_number(*d), integral ? iri::kXsdInteger : iri::kXsdDecimal);
  }
  if (const auto* b = std::get_if<bool>(&v)) {
    return Term::typed(*b ? "true" : "false", iri::kXsdBoolean);
  }
  return Term::literal(std::get<std::string>(v));
}

std::vector<Triple> record_to_triples(const ingest::PatientRecord& rec, std::string_view ns) {
  const std::string base(ns);
  auto pred = [&](std::string_view local) { return Term::iri(base + std::string(local)); };
  Term subject = Term::iri(patient_iri(rec.patient_id, ns));

  std::vector<Triple> out;
  out.reserve(17 + rec.facts.size());
  out.push_back({subject, Term::iri(std::string(iri::kType)), Term::iri(base + std::string(kPatientClassRdf))});
  out.push_back({subject, pred("hasGender"), Term::typed(std::to_string(rec.gender), iri::kXsdInteger)});
  out.push_back({subject, pred("hasObservedAt"),
                 Term::typed(ingest::format_timestamp(rec.observed_at), iri::kXsdDateTime)});
  out.push_back({subject, pred("hasMonth"), Term::typed(std::to_string(rec.month), iri::kXsdInteger)});
  for (std::size_t i = 0; i < ingest::kSymptomCount; ++i) {
    out.push_back({subject, pred(symptom_entry(i)->rdf_local),
                   Term::literal(rec.symptoms[i] ? "Yes" : "No")});
  }
  for (const auto& [name, value] : rec.facts) {
    out.push_back({subject, pred(rdf_local_for(name)), value_term(value)});
  }
  return out;
}

}  // namespace tbstream::rdf
