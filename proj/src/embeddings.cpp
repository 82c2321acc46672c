#include "hopgraph/embeddings.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include "hopgraph/rng.hpp"
#include "hopgraph/text.hpp"

namespace hopgraph {

std::string_view to_string(EmbedKind k) {
  switch (k) {
    case EmbedKind::Sentence: return "sentence";
    case EmbedKind::ClipText: return "clip-text";
    case EmbedKind::ClipImage: return "clip-image";
  }
  return "sentence";
}

EmbedKind embed_kind_from_string(std::string_view s) {
  if (s == "sentence") return EmbedKind::Sentence;
  if (s == "clip-text") return EmbedKind::ClipText;
  if (s == "clip-image") return EmbedKind::ClipImage;
  throw UserError("unknown embedding kind '" + std::string(s) + "'");
}

double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw UserError("embedding dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) throw UserError("cosine of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Vector normalized(Vector v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > 0)
    for (double& x : v) x /= n;
  return v;
}

std::vector<Vector> parse_embed_response(const Json& body, std::size_t expected_count) {
  if (!body.is_object() || !body.contains("vectors") || !body["vectors"].is_array())
    throw EmbeddingError("embed response lacks a \"vectors\" list");
  if (!body.contains("dim") || !body["dim"].is_number_integer())
    throw EmbeddingError("embed response lacks an integer \"dim\"");
  const auto dim = body["dim"].get<std::size_t>();
  if (body["vectors"].size() != expected_count)
    throw EmbeddingError("embed response has " + std::to_string(body["vectors"].size()) + " vectors for " +
                             std::to_string(expected_count) + " inputs");
  std::vector<Vector> out;
  for (const auto& v : body["vectors"]) {
    if (!v.is_array() || v.size() != dim) throw EmbeddingError("embed vector length differs from dim");
    Vector vec;
    double norm = 0;
    for (const auto& x : v) {
      if (!x.is_number()) throw EmbeddingError("embed vector holds a non-number");
      vec.push_back(x.get<double>());
      norm += vec.back() * vec.back();
    }
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-4) throw EmbeddingError("embed vector is not unit-normalized");
    out.push_back(std::move(vec));
  }
  return out;
}

std::optional<std::string> health_schema_violation(const Json& body) {
  if (!body.is_object()) return "health body is not an object";
  if (!body.contains("status") || !body["status"].is_string()) return "missing string \"status\"";
  const auto status = body["status"].get<std::string>();
  if (status != "ok" && status != "degraded") return "status must be ok or degraded";
  if (!body.contains("models") || !body["models"].is_array()) return "missing \"models\" list";
  for (const auto& m : body["models"])
    if (!m.is_string()) return "model ids must be strings";
  return std::nullopt;
}

namespace {

std::pair<std::string, std::string> split_url(const std::string& url) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, url_re)) throw UserError("embedding service url must be http(s)://host[:port], got '" + url + "'");
  std::string prefix = m[2].matched ? m[2].str() : "";
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {m[1].str(), prefix};
}

}  // namespace

EmbedServiceClient::EmbedServiceClient(EmbedServiceConfig config) : config_(std::move(config)) {
  split_url(config_.base_url);
  if (config_.max_batch == 0) throw UserError("max_batch must be positive");
}

std::vector<Vector> EmbedServiceClient::embed(EmbedKind kind, const std::vector<std::string>& inputs) {
  const auto [host, prefix] = split_url(config_.base_url);
  httplib::Client client(host);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  client.set_read_timeout(config_.timeout_seconds, 0);
  httplib::Headers headers;
  if (!config_.shared_secret.empty()) headers.emplace("X-Embed-Secret", config_.shared_secret);

  std::vector<Vector> out;
  for (std::size_t start = 0; start < inputs.size(); start += config_.max_batch) {
    const std::size_t end = std::min(inputs.size(), start + config_.max_batch);
    Json batch = Json::array();
    for (std::size_t i = start; i < end; ++i) batch.push_back(inputs[i]);
    const Json req{{"kind", std::string(to_string(kind))}, {"inputs", batch}};
    auto res = client.Post(prefix + "/v1/embed", headers, req.dump(), "application/json");
    if (!res) throw EmbeddingError("embedding service unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw EmbeddingError("embedding service returned HTTP " + std::to_string(res->status) + ": " +
                               res->body.substr(0, 200));
    Json body = Json::parse(res->body, nullptr, false);
    if (body.is_discarded()) throw EmbeddingError("embedding service returned malformed JSON");
    auto part = parse_embed_response(body, end - start);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

Json EmbedServiceClient::health() {
  const auto [host, prefix] = split_url(config_.base_url);
  httplib::Client client(host);
  client.set_connection_timeout(config_.timeout_seconds, 0);
  auto res = client.Get(prefix + "/v1/health");
  if (!res) throw EmbeddingError("embedding service unreachable: " + httplib::to_string(res.error()));
  Json body = Json::parse(res->body, nullptr, false);
  if (body.is_discarded()) throw EmbeddingError("health endpoint returned malformed JSON");
  if (auto why = health_schema_violation(body)) throw EmbeddingError("health response: " + *why);
  return body;
}

RecordedEmbeddings RecordedEmbeddings::from_json(const Json& doc) {
  RecordedEmbeddings r;
  if (!doc.contains("entries") || !doc["entries"].is_array()) throw UserError("recorded embeddings need an \"entries\" list");
  for (const auto& e : doc["entries"]) {
    if (!e.contains("kind") || !e.contains("input") || !e.contains("vector"))
      throw UserError("recorded embedding entry needs kind, input and vector");
    r.add(embed_kind_from_string(e["kind"].get<std::string>()), e["input"].get<std::string>(),
          e["vector"].get<Vector>());
  }
  return r;
}

RecordedEmbeddings RecordedEmbeddings::load(const std::string& path) {
  Json doc = Json::parse(read_file(path), nullptr, false);
  if (doc.is_discarded()) throw UserError(path + ": malformed JSON");
  return from_json(doc);
}

void RecordedEmbeddings::add(EmbedKind kind, const std::string& input, Vector v) {
  table_[{std::string(to_string(kind)), input}] = std::move(v);
}

std::vector<Vector> RecordedEmbeddings::embed(EmbedKind kind, const std::vector<std::string>& inputs) {
  std::vector<Vector> out;
  for (const auto& in : inputs) {
    auto it = table_.find({std::string(to_string(kind)), in});
    if (it != table_.end()) {
      out.push_back(it->second);
    } else if (fallback_) {
      out.push_back(fallback_->embed(kind, {in}).front());
    } else {
      throw UserError("no recorded " + std::string(to_string(kind)) + " embedding for \"" + in.substr(0, 80) + "\"");
    }
  }
  return out;
}

Json RecordedEmbeddings::to_json() const {
  Json entries = Json::array();
  for (const auto& [key, v] : table_) entries.push_back(Json{{"kind", key.first}, {"input", key.second}, {"vector", v}});
  return Json{{"entries", entries}};
}

std::vector<Vector> HashingEmbedder::embed(EmbedKind, const std::vector<std::string>& inputs) {
  std::vector<Vector> out;
  for (const auto& in : inputs) {
    Vector v(dim_, 0.0);
    std::string word;
    auto flush = [&] {
      if (word.empty()) return;
      const auto h = derive_seed(0x68617368, word);
      v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
      word.clear();
    };
    for (char c : to_lower(in)) {
      if (std::isalnum(static_cast<unsigned char>(c))) word.push_back(c);
      else flush();
    }
    flush();
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v[0] = 1.0;
    out.push_back(normalized(std::move(v)));
  }
  return out;
}

}  // namespace hopgraph
