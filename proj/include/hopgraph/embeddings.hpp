#pragma once

#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hopgraph/common.hpp"

namespace hopgraph {

using Vector = std::vector<double>;

// Embedding service unreachable or answering outside its contract.
class EmbeddingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EmbedKind { Sentence, ClipText, ClipImage };
std::string_view to_string(EmbedKind k);
EmbedKind embed_kind_from_string(std::string_view s);

// Cosine similarity; throws UserError on dimension mismatch or zero vectors.
double cosine(std::span<const double> a, std::span<const double> b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  // One vector per input, same order.
  virtual std::vector<Vector> embed(EmbedKind kind, const std::vector<std::string>& inputs) = 0;
};

struct EmbedServiceConfig {
  std::string base_url = "http://127.0.0.1:8088";
  int timeout_seconds = 60;
  std::size_t max_batch = 64;
  std::string shared_secret;  // sent as X-Embed-Secret when set
};

// Client for the embedding service:
//   POST /v1/embed  {"kind": "sentence"|"clip-text"|"clip-image", "inputs": [...]}
//        -> {"vectors": [[...]], "dim": n, "model_id": "..."}
//   GET  /v1/health -> {"status": "ok"|"degraded", "models": [...]}
// Batches larger than max_batch are split; responses are checked for count,
// dimension and unit norm.
class EmbedServiceClient : public Embedder {
 public:
  explicit EmbedServiceClient(EmbedServiceConfig config);
  std::vector<Vector> embed(EmbedKind kind, const std::vector<std::string>& inputs) override;
  Json health();

 private:
  EmbedServiceConfig config_;
};

// Validates an embed response body against the request size. Throws
// EmbeddingError describing the first problem.
std::vector<Vector> parse_embed_response(const Json& body, std::size_t expected_count);
// Health body must carry a string status in {ok, degraded} and a model list.
std::optional<std::string> health_schema_violation(const Json& body);

// Vectors recorded ahead of time, keyed by (kind, input):
//   {"entries": [{"kind": "sentence", "input": "...", "vector": [...]}]}
// Unknown inputs go to the fallback embedder when one is set, else throw.
class RecordedEmbeddings : public Embedder {
 public:
  RecordedEmbeddings() = default;
  static RecordedEmbeddings from_json(const Json& doc);
  static RecordedEmbeddings load(const std::string& path);

  void add(EmbedKind kind, const std::string& input, Vector v);
  void set_fallback(std::shared_ptr<Embedder> fallback) { fallback_ = std::move(fallback); }
  std::vector<Vector> embed(EmbedKind kind, const std::vector<std::string>& inputs) override;
  Json to_json() const;

 private:
  std::map<std::pair<std::string, std::string>, Vector> table_;
  std::shared_ptr<Embedder> fallback_;
};

// Deterministic offline stand-in: signed feature hashing of lowercase word
// unigrams, L2-normalized. Inputs sharing words get positive similarity.
class HashingEmbedder : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::vector<Vector> embed(EmbedKind kind, const std::vector<std::string>& inputs) override;

 private:
  std::size_t dim_;
};

Vector normalized(Vector v);

}  // namespace hopgraph
