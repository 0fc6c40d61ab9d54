#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "tbstream/cep/cep.hpp"
#include "tbstream/reason/retrieval.hpp"
#include "tbstream/rules/rule.hpp"

namespace tbstream::reason {

class CompletionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Text in, text out. Implementations throw CompletionError on failure.
class CompletionService {
 public:
  virtual ~CompletionService() = default;
  virtual std::string name() const = 0;
  virtual std::string complete(const std::string& prompt) = 0;
};

/// POSTs {"prompt": ...} to an http:// endpoint and reads {"text": ...}
/// (or the raw body when it is not JSON).
class HttpCompletionService : public CompletionService {
 public:
  HttpCompletionService(std::string url, std::chrono::milliseconds timeout = std::chrono::milliseconds{2000});
  std::string name() const override { return "http:" + url_; }
  std::string complete(const std::string& prompt) override;

  /// TBSTREAM_COMPLETION_URL and TBSTREAM_COMPLETION_TIMEOUT_MS; null when
  /// no URL is set.
  static std::unique_ptr<HttpCompletionService> from_env();

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

/// Precautions attached to explanations of alerts at or above a severity.
struct PrecautionSet {
  std::string source;  // citation shown with the list
  cep::Severity min_severity = cep::Severity::Warning;
  std::vector<std::string> actions;
};

/// {"source": ..., "min_severity": "Warning", "actions": [...]}
PrecautionSet load_precautions(const std::filesystem::path& path);
PrecautionSet parse_precautions(std::string_view json);

struct Explanation {
  std::string text;
  std::string mode;  // "stub" or "service"
  bool fallback = false;
  std::string error;  // why the service was not used
};

/// Prompt sent to a completion service: alert fields, rule citation,
/// precautions and retrieved context.
std::string explanation_prompt(const cep::Alert& alert, const std::vector<DocumentChunk>& context,
                               const std::vector<rules::Rule>& rules, const PrecautionSet* precautions);

/// Deterministic template text, or the service's answer when `service` is
/// given and reachable (otherwise the template, marked as fallback).
Explanation explain_alert(const cep::Alert& alert, const std::vector<DocumentChunk>& context,
                          const std::vector<rules::Rule>& rules, const PrecautionSet* precautions = nullptr,
                          CompletionService* service = nullptr);

}  // namespace tbstream::reason
