#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "hopgraph/llm.hpp"

namespace hopgraph {

struct HttpProviderConfig {
  // e.g. "http://localhost:8000/v1"; "/chat/completions" is appended.
  std::string base_url;
  std::string api_key;
  int timeout_seconds = 120;
};

// Chat-completions client for OpenAI-compatible servers (vLLM, TGI, hosted
// APIs). Maps 401/403 to AuthError, 400 and content-filter stops to
// ContentError, connection failures, 429 and 5xx to TransportError.
class OpenAiCompatibleProvider : public LlmProvider {
 public:
  explicit OpenAiCompatibleProvider(HttpProviderConfig config);
  std::string complete(const CompletionRequest& request) override;

 private:
  HttpProviderConfig config_;
  std::string scheme_host_;
  std::string path_;
};

// Canned responses for tests. Responses are consumed in order, per template
// id when one is queued for it, otherwise from the shared queue.
class ScriptedProvider : public LlmProvider {
 public:
  enum class Fault { None, Transport, Auth, Content };
  struct Response {
    std::string text;
    Fault fault = Fault::None;
  };

  void push(std::string text);
  void push_fault(Fault fault);
  void push_for(const std::string& template_id, std::string text);
  void push_fault_for(const std::string& template_id, Fault fault);

  std::string complete(const CompletionRequest& request) override;

  std::vector<CompletionRequest> requests() const;
  std::size_t call_count() const;

 private:
  mutable std::mutex mutex_;
  std::deque<Response> shared_;
  std::map<std::string, std::deque<Response>> by_template_;
  std::vector<CompletionRequest> requests_;
};

// Delegates to a function; handy for judges whose answer depends on input.
class FunctionProvider : public LlmProvider {
 public:
  explicit FunctionProvider(std::function<std::string(const CompletionRequest&)> fn) : fn_(std::move(fn)) {}
  std::string complete(const CompletionRequest& request) override;
  std::size_t call_count() const;

 private:
  std::function<std::string(const CompletionRequest&)> fn_;
  mutable std::mutex mutex_;
  std::size_t calls_ = 0;
};

}  // namespace hopgraph
