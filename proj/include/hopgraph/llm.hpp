#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/common.hpp"

namespace hopgraph {

using Bindings = std::map<std::string, std::string>;

struct PromptTemplate {
  std::string template_id;
  std::string body;
  std::vector<std::string> placeholders;  // distinct, in order of first use
  // JSON schema for the payload; null means the completion is free text.
  Json expected_payload;
  std::string sha256;
};

// Placeholder names in a Python-format body: "{name}" is a placeholder,
// "{{" and "}}" are literal braces. Throws UserError on an unbalanced brace.
std::vector<std::string> template_placeholders(std::string_view body);

// Substitutes every placeholder and unescapes doubled braces. Throws
// UserError when a placeholder has no binding or a binding names no
// placeholder.
std::string render_template(std::string_view body, const Bindings& bindings);

class TemplateRegistry {
 public:
  // Registry over the prompt assets compiled into the library.
  static const TemplateRegistry& builtin();

  void add(PromptTemplate t);
  const PromptTemplate& get(std::string_view template_id) const;
  bool contains(std::string_view template_id) const;
  std::vector<std::string> ids() const;
  std::string render(std::string_view template_id, const Bindings& bindings) const;

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// Payload schema shipped with each builtin template id.
Json payload_schema_for(std::string_view template_id);

struct DecodingParams {
  double temperature = 0.7;
  int max_tokens = 1024;
};

inline constexpr double kGenerationTemperature = 0.7;
inline constexpr double kJudgeTemperature = 0.0;

struct CompletionRequest {
  std::string template_id;
  std::string prompt;
  std::string model_id;
  DecodingParams decoding;
  // Structured inputs behind the prompt. Never sent to remote providers;
  // offline providers use them to build conformant answers.
  Json hints;
};

class ProviderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Network-level failure (connection, timeout, 5xx, 429). Retried.
class TransportError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// 401/403 from the provider. Not retried.
class AuthError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

// Provider refused or flagged the request content. Not retried.
class ContentError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

class LlmProvider {
 public:
  virtual ~LlmProvider() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
};

struct AttemptRecord {
  int attempt = 0;
  std::string outcome;  // "ok", "transport_error", "parse_failure", ...
  std::string detail;
};

class RetriesExhausted : public ProviderError {
 public:
  RetriesExhausted(const std::string& what, std::vector<AttemptRecord> ledger)
      : ProviderError(what), ledger_(std::move(ledger)) {}
  const std::vector<AttemptRecord>& ledger() const { return ledger_; }

 private:
  std::vector<AttemptRecord> ledger_;
};

struct ParseResult {
  std::optional<Json> value;
  std::string failure;  // reason when value is empty
  bool ok() const { return value.has_value(); }
};

// Strips code fences and surrounding prose, parses the first JSON value
// (tolerating trailing commas) and validates it against `schema`. A null
// schema accepts any non-empty text and returns it as a JSON string.
ParseResult parse_payload(std::string_view raw_completion, const Json& schema);

struct LlmExchange {
  std::string exchange_id;
  std::string template_id;
  std::string rendered_prompt;
  std::string model_id;
  std::string raw_completion;
  std::optional<Json> parsed_payload;
  std::string parse_failure;
  int attempts = 0;
  std::vector<AttemptRecord> ledger;

  bool ok() const { return parsed_payload.has_value(); }
};

Json to_json(const LlmExchange& x);

struct GatewayOptions {
  // Provider calls allowed per exchange, counting transport retries and the
  // single "valid JSON" reminder.
  int max_attempts = 4;
  std::chrono::milliseconds initial_backoff{250};
  double backoff_factor = 2.0;
  int concurrency = 8;
  std::optional<std::filesystem::path> log_path;
  // Replaced in tests to avoid real waiting.
  std::function<void(std::chrono::milliseconds)> sleep;
};

inline constexpr std::string_view kJsonReminder = "\n\nReturn only valid JSON.";

class Gateway {
 public:
  Gateway(std::shared_ptr<LlmProvider> provider, const TemplateRegistry& registry,
          GatewayOptions options = {});

  // Raw completion with bounded transport retries and exponential backoff.
  // Appends one AttemptRecord per provider call to `ledger`.
  std::string complete(const CompletionRequest& request, std::vector<AttemptRecord>& ledger,
                       int attempt_budget);

  // Render, complete and parse. On a parse failure the prompt is re-sent once
  // with a JSON reminder (JSON templates only). The returned exchange carries
  // either a validated payload or the last parse failure. Throws
  // RetriesExhausted / AuthError / ContentError for provider failures.
  // `exchange_key` seeds a stable exchange id.
  LlmExchange run(std::string_view template_id, const Bindings& bindings, const std::string& model_id,
                  DecodingParams decoding, Json hints, std::string_view exchange_key);

  const TemplateRegistry& registry() const { return registry_; }
  long provider_calls() const;

 private:
  void log(const LlmExchange& x);

  std::shared_ptr<LlmProvider> provider_;
  const TemplateRegistry& registry_;
  GatewayOptions options_;
  std::counting_semaphore<1024> permits_;
  mutable std::mutex mutex_;
  long calls_ = 0;
};

// Stable short identifier derived from a key (hex prefix of its SHA-256).
std::string exchange_id_for(std::string_view key);

}  // namespace hopgraph
