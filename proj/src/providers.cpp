#include "hopgraph/providers.hpp"

#include <httplib.h>

#include <regex>

namespace hopgraph {

OpenAiCompatibleProvider::OpenAiCompatibleProvider(HttpProviderConfig config) : config_(std::move(config)) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(config_.base_url, m, url_re))
    throw UserError("provider base_url must look like http(s)://host[:port][/path], got '" + config_.base_url +
                    "'");
  scheme_host_ = m[1].str();
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  path_ = prefix + "/chat/completions";
}

std::string OpenAiCompatibleProvider::complete(const CompletionRequest& request) {
  httplib::Client client(scheme_host_);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  client.set_write_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  Json body{{"model", request.model_id},
            {"messages", Json::array({Json{{"role", "user"}, {"content", request.prompt}}})},
            {"temperature", request.decoding.temperature},
            {"max_tokens", request.decoding.max_tokens}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) throw TransportError("request to " + scheme_host_ + path_ + " failed: " + httplib::to_string(res.error()));

  const int status = res->status;
  if (status == 401 || status == 403) throw AuthError("provider rejected credentials (HTTP " + std::to_string(status) + ")");
  if (status == 429 || status >= 500) throw TransportError("provider returned HTTP " + std::to_string(status));
  if (status == 400) throw ContentError("provider rejected request: " + res->body.substr(0, 300));
  if (status != 200) throw TransportError("unexpected HTTP " + std::to_string(status));

  Json reply = Json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
    throw TransportError("malformed provider response");
  const auto& choice = reply["choices"][0];
  if (choice.value("finish_reason", "") == "content_filter") throw ContentError("completion blocked by content filter");
  const auto& content = choice["message"]["content"];
  if (!content.is_string()) throw TransportError("provider response has no message content");
  return content.get<std::string>();
}

void ScriptedProvider::push(std::string text) {
  std::lock_guard lock(mutex_);
  shared_.push_back({std::move(text), Fault::None});
}

void ScriptedProvider::push_fault(Fault fault) {
  std::lock_guard lock(mutex_);
  shared_.push_back({"", fault});
}

void ScriptedProvider::push_for(const std::string& template_id, std::string text) {
  std::lock_guard lock(mutex_);
  by_template_[template_id].push_back({std::move(text), Fault::None});
}

void ScriptedProvider::push_fault_for(const std::string& template_id, Fault fault) {
  std::lock_guard lock(mutex_);
  by_template_[template_id].push_back({"", fault});
}

std::string ScriptedProvider::complete(const CompletionRequest& request) {
  Response r;
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
    auto it = by_template_.find(request.template_id);
    if (it != by_template_.end() && !it->second.empty()) {
      r = std::move(it->second.front());
      it->second.pop_front();
    } else if (!shared_.empty()) {
      r = std::move(shared_.front());
      shared_.pop_front();
    } else {
      throw TransportError("scripted provider has no response left for " + request.template_id);
    }
  }
  switch (r.fault) {
    case Fault::Transport: throw TransportError("scripted transport failure");
    case Fault::Auth: throw AuthError("scripted auth failure");
    case Fault::Content: throw ContentError("scripted content refusal");
    case Fault::None: break;
  }
  return r.text;
}

std::vector<CompletionRequest> ScriptedProvider::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::size_t ScriptedProvider::call_count() const {
  std::lock_guard lock(mutex_);
  return requests_.size();
}

std::string FunctionProvider::complete(const CompletionRequest& request) {
  {
    std::lock_guard lock(mutex_);
    ++calls_;
  }
  return fn_(request);
}

std::size_t FunctionProvider::call_count() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

}  // namespace hopgraph
