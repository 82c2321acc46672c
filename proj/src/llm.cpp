#include "hopgraph/llm.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <thread>

#include "hopgraph/json_schema.hpp"
#include "hopgraph/text.hpp"

namespace hopgraph {

namespace detail {
const std::map<std::string, std::string>& prompt_assets();
}

std::vector<std::string> template_placeholders(std::string_view body) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if (c == '{') {
      if (i + 1 < body.size() && body[i + 1] == '{') {
        ++i;
        continue;
      }
      const auto close = body.find('}', i);
      if (close == std::string_view::npos) throw UserError("unbalanced '{' in template");
      std::string name(body.substr(i + 1, close - i - 1));
      if (name.empty() || name.find_first_of("{ \n") != std::string::npos)
        throw UserError("malformed placeholder '{" + name + "}'");
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
      i = close;
    } else if (c == '}') {
      if (i + 1 < body.size() && body[i + 1] == '}') {
        ++i;
        continue;
      }
      throw UserError("unbalanced '}' in template");
    }
  }
  return out;
}

std::string render_template(std::string_view body, const Bindings& bindings) {
  const auto names = template_placeholders(body);
  for (const auto& n : names) {
    if (!bindings.count(n)) throw UserError("no binding for placeholder {" + n + "}");
  }
  for (const auto& [k, v] : bindings) {
    if (std::find(names.begin(), names.end(), k) == names.end())
      throw UserError("binding '" + k + "' matches no placeholder");
  }
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    const char c = body[i];
    if ((c == '{' || c == '}') && i + 1 < body.size() && body[i + 1] == c) {
      out.push_back(c);
      ++i;
    } else if (c == '{') {
      const auto close = body.find('}', i);
      out += bindings.at(std::string(body.substr(i + 1, close - i - 1)));
      i = close;
    } else {
      out.push_back(c);
    }
  }
  return out;
}

namespace {

Json string_field() { return Json{{"type", "string"}, {"minLength", 1}}; }

Json triple_schema() {
  return Json{{"type", "object"},
              {"required", Json::array({"subject", "relation", "object"})},
              {"properties",
               {{"subject", string_field()}, {"relation", string_field()}, {"object", string_field()}}}};
}

Json paper_relation_schema(bool visual) {
  Json props{{"source_entity", string_field()},
             {"target_entity", {{"type", Json::array({"string", "null"})}}},
             {"relationship_description", string_field()}};
  Json required = Json::array({"source_entity", "target_entity", "relationship_description"});
  if (visual) {
    // Null figures are let through here and rejected per relation.
    props["figure"] = Json{{"type", Json::array({"string", "null"})}};
    props["idx"] = Json{{"type", "array"}, {"minItems", 1}, {"items", {{"type", "integer"}}}};
    required.push_back("figure");
    required.push_back("idx");
  }
  return Json{{"type", "array"},
              {"items", {{"type", "object"}, {"required", required}, {"properties", props}}}};
}

}  // namespace

Json payload_schema_for(std::string_view id) {
  if (id.substr(0, 10) == "text_node_") return triple_schema();
  if (id == "edge_generation") return Json{{"type", "array"}, {"items", triple_schema()}};
  if (id == "qa_generation")
    return Json{{"type", "object"},
                {"required", Json::array({"question", "answer"})},
                {"properties", {{"question", string_field()}, {"answer", string_field()}}}};
  if (id == "caption_to_graph") {
    Json entity{{"type", "object"},
                {"required", Json::array({"id", "entity", "attributes"})},
                {"properties",
                 {{"id", {{"type", "string"}}},
                  {"entity", string_field()},
                  {"attributes", {{"type", "array"}, {"items", {{"type", "string"}}}}}}}};
    Json relation{{"type", "object"},
                  {"required", Json::array({"source", "target", "relation"})},
                  {"properties",
                   {{"source", {{"type", "string"}}},
                    {"target", {{"type", Json::array({"string", "null"})}}},
                    {"relation", string_field()}}}};
    Json scene{{"type", "object"},
               {"required", Json::array({"scene", "relations"})},
               {"properties",
                {{"scene", {{"type", "string"}}}, {"relations", {{"type", "array"}, {"items", relation}}}}}};
    return Json{{"type", "object"},
                {"required", Json::array({"entities", "scenes"})},
                {"properties",
                 {{"entities", {{"type", "array"}, {"items", entity}}},
                  {"scenes", {{"type", "array"}, {"items", scene}}}}}};
  }
  if (id == "paper_entity_inventory") return Json{{"type", "array"}, {"items", string_field()}};
  if (id == "paper_text_relations") return paper_relation_schema(false);
  if (id == "paper_visual_relations") return paper_relation_schema(true);
  return nullptr;  // free text: context, CoT, judge and evaluation prompts
}

const TemplateRegistry& TemplateRegistry::builtin() {
  static const TemplateRegistry registry = [] {
    TemplateRegistry r;
    for (const auto& [id, body] : detail::prompt_assets()) {
      PromptTemplate t;
      t.template_id = id;
      t.body = body;
      t.expected_payload = payload_schema_for(id);
      r.add(std::move(t));
    }
    return r;
  }();
  return registry;
}

void TemplateRegistry::add(PromptTemplate t) {
  if (templates_.count(t.template_id)) throw UserError("duplicate template id " + t.template_id);
  t.placeholders = template_placeholders(t.body);
  t.sha256 = sha256_hex(t.body);
  templates_.emplace(t.template_id, std::move(t));
}

const PromptTemplate& TemplateRegistry::get(std::string_view id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw UserError("unknown template " + std::string(id));
  return it->second;
}

bool TemplateRegistry::contains(std::string_view id) const { return templates_.find(id) != templates_.end(); }

std::vector<std::string> TemplateRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;
}

std::string TemplateRegistry::render(std::string_view id, const Bindings& bindings) const {
  return render_template(get(id).body, bindings);
}

namespace {

// Body of the first ``` fence, when the completion has one.
std::optional<std::string_view> fenced_block(std::string_view s) {
  const auto open = s.find("```");
  if (open == std::string_view::npos) return std::nullopt;
  auto line_end = s.find('\n', open);
  if (line_end == std::string_view::npos) return std::nullopt;
  const auto close = s.find("```", line_end);
  if (close == std::string_view::npos) return s.substr(line_end + 1);
  return s.substr(line_end + 1, close - line_end - 1);
}

// First balanced {...} or [...] region, skipping over string literals.
std::optional<std::string_view> first_json_region(std::string_view s) {
  const auto start = s.find_first_of("{[");
  if (start == std::string_view::npos) return std::nullopt;
  std::vector<char> stack;
  bool in_string = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '{' || c == '[') stack.push_back(c == '{' ? '}' : ']');
    else if (c == '}' || c == ']') {
      if (stack.empty() || stack.back() != c) return std::nullopt;
      stack.pop_back();
      if (stack.empty()) return s.substr(start, i - start + 1);
    }
  }
  return std::nullopt;
}

std::string drop_trailing_commas(std::string_view s) {
  std::string out;
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < s.size()) out.push_back(s[++i]);
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      auto j = s.find_first_not_of(" \t\r\n", i + 1);
      if (j != std::string_view::npos && (s[j] == ']' || s[j] == '}')) continue;
    }
    out.push_back(c);
  }
  return out;
}

}  // namespace

ParseResult parse_payload(std::string_view raw, const Json& schema) {
  std::string_view body = raw;
  if (auto fenced = fenced_block(raw)) body = *fenced;
  if (schema.is_null()) {
    std::string text = trim(body);
    if (text.empty()) return {std::nullopt, "empty completion"};
    return {Json(text), ""};
  }
  auto region = first_json_region(body);
  if (!region) return {std::nullopt, "no JSON value found"};
  Json value = Json::parse(*region, nullptr, false);
  if (value.is_discarded()) value = Json::parse(drop_trailing_commas(*region), nullptr, false);
  if (value.is_discarded()) return {std::nullopt, "malformed JSON"};
  if (auto err = schema_violation(value, schema)) return {std::nullopt, *err};
  return {std::move(value), ""};
}

Json to_json(const LlmExchange& x) {
  Json ledger = Json::array();
  for (const auto& a : x.ledger)
    ledger.push_back(Json{{"attempt", a.attempt}, {"outcome", a.outcome}, {"detail", a.detail}});
  Json j;
  j["exchange_id"] = x.exchange_id;
  j["template_id"] = x.template_id;
  j["model_id"] = x.model_id;
  j["rendered_prompt"] = x.rendered_prompt;
  j["raw_completion"] = x.raw_completion;
  j["parsed_payload"] = x.parsed_payload ? *x.parsed_payload : Json(nullptr);
  j["parse_failure"] = x.parse_failure;
  j["attempts"] = x.attempts;
  j["ledger"] = std::move(ledger);
  return j;
}

std::string exchange_id_for(std::string_view key) { return sha256_hex(key).substr(0, 16); }

Gateway::Gateway(std::shared_ptr<LlmProvider> provider, const TemplateRegistry& registry,
                 GatewayOptions options)
    : provider_(std::move(provider)),
      registry_(registry),
      options_(std::move(options)),
      permits_(std::clamp(options_.concurrency, 1, 1024)) {
  if (!provider_) throw UserError("gateway needs a provider");
  if (options_.max_attempts < 1) throw UserError("max_attempts must be at least 1");
  if (!options_.sleep) options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

long Gateway::provider_calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::string Gateway::complete(const CompletionRequest& request, std::vector<AttemptRecord>& ledger,
                              int attempt_budget) {
  auto backoff = options_.initial_backoff;
  for (int used = 0; used < attempt_budget; ++used) {
    AttemptRecord rec;
    rec.attempt = static_cast<int>(ledger.size()) + 1;
    {
      std::lock_guard lock(mutex_);
      ++calls_;
    }
    try {
      permits_.acquire();
      std::string text;
      try {
        text = provider_->complete(request);
      } catch (...) {
        permits_.release();
        throw;
      }
      permits_.release();
      rec.outcome = "ok";
      ledger.push_back(rec);
      return text;
    } catch (const TransportError& e) {
      rec.outcome = "transport_error";
      rec.detail = e.what();
      ledger.push_back(rec);
    } catch (const AuthError& e) {
      rec.outcome = "auth_error";
      rec.detail = e.what();
      ledger.push_back(rec);
      throw;
    } catch (const ContentError& e) {
      rec.outcome = "content_error";
      rec.detail = e.what();
      ledger.push_back(rec);
      throw;
    }
    if (used + 1 < attempt_budget) {
      options_.sleep(backoff);
      backoff = std::chrono::milliseconds(static_cast<long>(backoff.count() * options_.backoff_factor));
    }
  }
  throw RetriesExhausted("provider failed after " + std::to_string(ledger.size()) + " attempts (" +
                             request.template_id + ")",
                         ledger);
}

LlmExchange Gateway::run(std::string_view template_id, const Bindings& bindings, const std::string& model_id,
                         DecodingParams decoding, Json hints, std::string_view exchange_key) {
  const auto& tmpl = registry_.get(template_id);
  LlmExchange x;
  x.template_id = tmpl.template_id;
  x.model_id = model_id;
  x.rendered_prompt = render_template(tmpl.body, bindings);
  x.exchange_id = exchange_id_for(std::string(exchange_key) + "\n" + x.template_id);

  CompletionRequest req{x.template_id, x.rendered_prompt, model_id, decoding, std::move(hints)};
  try {
    x.raw_completion = complete(req, x.ledger, options_.max_attempts);
    auto parsed = parse_payload(x.raw_completion, tmpl.expected_payload);
    const int remaining = options_.max_attempts - static_cast<int>(x.ledger.size());
    if (!parsed.ok() && !tmpl.expected_payload.is_null() && remaining > 0) {
      x.ledger.back().outcome = "parse_failure";
      x.ledger.back().detail = parsed.failure;
      req.prompt += kJsonReminder;
      x.raw_completion = complete(req, x.ledger, remaining);
      parsed = parse_payload(x.raw_completion, tmpl.expected_payload);
    }
    if (parsed.ok()) {
      x.parsed_payload = std::move(parsed.value);
    } else {
      x.parse_failure = parsed.failure;
      x.ledger.back().outcome = "parse_failure";
      x.ledger.back().detail = parsed.failure;
    }
  } catch (const ProviderError&) {
    x.attempts = static_cast<int>(x.ledger.size());
    log(x);
    throw;
  }
  x.attempts = static_cast<int>(x.ledger.size());
  log(x);
  return x;
}

void Gateway::log(const LlmExchange& x) {
  if (!options_.log_path) return;
  const std::string line = to_json(x).dump() + "\n";
  std::lock_guard lock(mutex_);
  const auto dir = options_.log_path->parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream out(*options_.log_path, std::ios::app | std::ios::binary);
  out << line;
  if (!out) throw UserError("cannot append to exchange log " + options_.log_path->string());
}

}  // namespace hopgraph
