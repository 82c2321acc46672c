#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <mutex>
#include <thread>

#include "hopgraph/embeddings.hpp"
#include "support.hpp"

using namespace hopgraph;

namespace {

// Stub embedding service. Input "w<k>" maps to the unit vector e_(k mod 4);
// other inputs map to (0.5, 0.5, 0.5, 0.5).
struct EmbedStub {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::mutex mutex;
  std::vector<std::size_t> batch_sizes;
  std::string last_secret, last_kind;
  std::string mode = "ok";  // ok | short | unnormalized | http500 | garbage

  EmbedStub() {
    server.Post("/v1/embed", [this](const httplib::Request& req, httplib::Response& res) {
      const auto body = Json::parse(req.body);
      std::lock_guard<std::mutex> lock(mutex);
      last_secret = req.get_header_value("X-Embed-Secret");
      last_kind = body.at("kind").get<std::string>();
      batch_sizes.push_back(body.at("inputs").size());
      if (mode == "http500") {
        res.status = 500;
        res.set_content("boom", "text/plain");
        return;
      }
      if (mode == "garbage") {
        res.set_content("{not json", "application/json");
        return;
      }
      Json vectors = Json::array();
      for (const auto& in : body.at("inputs")) {
        const auto s = in.get<std::string>();
        std::vector<double> v(4, 0.5);
        if (s.size() > 1 && s[0] == 'w') {
          v.assign(4, 0.0);
          v[std::stoul(s.substr(1)) % 4] = 1.0;
        }
        if (mode == "unnormalized") v[0] += 1.0;
        vectors.push_back(v);
      }
      if (mode == "short") vectors.erase(vectors.begin());
      res.set_content(Json{{"vectors", vectors}, {"dim", 4}, {"model_id", "stub-enc"}}.dump(), "application/json");
    });
    server.Get("/v1/health", [this](const httplib::Request&, httplib::Response& res) {
      std::lock_guard<std::mutex> lock(mutex);
      if (mode == "garbage") res.set_content(R"({"status": "sleepy", "models": []})", "application/json");
      else res.set_content(R"({"status": "ok", "models": ["stub-enc"]})", "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~EmbedStub() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_SUITE("embed_client") {
  TEST_CASE("batches are split and reassembled in order") {
    EmbedStub stub;
    EmbedServiceClient client({stub.url(), 5, 3, "s3cret"});
    std::vector<std::string> inputs;
    for (int i = 0; i < 8; ++i) inputs.push_back("w" + std::to_string(i));
    const auto v = client.embed(EmbedKind::ClipImage, inputs);
    REQUIRE(v.size() == 8);
    for (int i = 0; i < 8; ++i) CHECK(v[i][i % 4] == 1.0);
    CHECK(stub.batch_sizes == std::vector<std::size_t>{3, 3, 2});
    CHECK(stub.last_secret == "s3cret");
    CHECK(stub.last_kind == "clip-image");
    CHECK(client.health().at("status") == "ok");
  }

  TEST_CASE("contract violations raise embedding errors") {
    EmbedStub stub;
    EmbedServiceClient client({stub.url(), 5, 64, ""});
    for (const char* mode : {"short", "unnormalized", "http500", "garbage"}) {
      {
        std::lock_guard<std::mutex> lock(stub.mutex);
        stub.mode = mode;
      }
      CHECK_THROWS_AS(client.embed(EmbedKind::Sentence, {"w1", "w2"}), EmbeddingError);
    }
    CHECK_THROWS_AS(client.health(), EmbeddingError);
    CHECK(stub.last_secret.empty());
    EmbedServiceClient dead({"http://127.0.0.1:1", 1, 64, ""});
    CHECK_THROWS_AS(dead.embed(EmbedKind::Sentence, {"x"}), EmbeddingError);
    CHECK_THROWS_AS(EmbedServiceClient({"localhost:8088", 1, 64, ""}), UserError);
  }

  TEST_CASE("recorded response bodies") {
    const auto ok = Json::parse(R"({"vectors": [[0.6, 0.8], [1, 0]], "dim": 2, "model_id": "m"})");
    const auto v = parse_embed_response(ok, 2);
    CHECK(v[1] == Vector{1, 0});
    CHECK_THROWS_AS(parse_embed_response(ok, 3), EmbeddingError);
    CHECK_THROWS_AS(parse_embed_response(Json::parse(R"({"vectors": [[1, 0, 0]], "dim": 2})"), 1), EmbeddingError);
    CHECK_THROWS_AS(parse_embed_response(Json::parse(R"({"vectors": [[1, 0]]})"), 1), EmbeddingError);
    CHECK_FALSE(health_schema_violation(Json::parse(R"({"status": "degraded", "models": ["a"]})")));
    CHECK(health_schema_violation(Json::parse(R"({"status": "ok"})")));
    CHECK(health_schema_violation(Json::parse(R"({"status": "ok", "models": [1]})")));
  }

  TEST_CASE("cosine and the offline embedders") {
    CHECK(cosine(Vector{3, 0, 4}, Vector{1, 0, 0}) == 0.6);
    CHECK_THROWS_AS(cosine(Vector{1, 0}, Vector{1, 0, 0}), UserError);
    CHECK_THROWS_AS(cosine(Vector{0, 0}, Vector{1, 0}), UserError);
    HashingEmbedder h(64);
    const auto v = h.embed(EmbedKind::Sentence, {"red dog runs", "a red dog", "quantum finance"});
    double n = 0;
    for (double x : v[0]) n += x * x;
    CHECK(n == doctest::Approx(1.0));
    CHECK(cosine(v[0], v[1]) > 0.0);
    CHECK(h.embed(EmbedKind::Sentence, {"red dog runs"})[0] == v[0]);

    const auto rec = RecordedEmbeddings::load(hgtest::fixture("e2e/recorded_embeddings.json").string());
    CHECK(RecordedEmbeddings::from_json(rec.to_json()).to_json() == rec.to_json());
    RecordedEmbeddings copy = rec;
    CHECK_THROWS_AS(copy.embed(EmbedKind::Sentence, {"never recorded"}), UserError);
    copy.set_fallback(std::make_shared<HashingEmbedder>(4));
    CHECK(copy.embed(EmbedKind::Sentence, {"never recorded"})[0].size() == 4);
  }
}
