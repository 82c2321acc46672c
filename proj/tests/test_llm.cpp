#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

#include "hopgraph/json_schema.hpp"
#include "hopgraph/llm.hpp"
#include "hopgraph/providers.hpp"
#include "hopgraph/synthetic_provider.hpp"
#include "hopgraph/text.hpp"
#include "support.hpp"

using namespace hopgraph;

namespace {

TemplateRegistry test_registry() {
  TemplateRegistry r;
  PromptTemplate js;
  js.template_id = "json_t";
  js.body = "Give {thing} as JSON like {{\"n\": 1}}.";
  js.expected_payload = Json{{"type", "object"}, {"required", Json::array({"n"})}, {"properties", {{"n", {{"type", "integer"}}}}}};
  r.add(js);
  PromptTemplate free;
  free.template_id = "free_t";
  free.body = "Say {thing}.";
  r.add(free);
  return r;
}

GatewayOptions fast_options(std::vector<long>* sleeps = nullptr) {
  GatewayOptions o;
  o.initial_backoff = std::chrono::milliseconds(100);
  o.sleep = [sleeps](std::chrono::milliseconds d) {
    if (sleeps) sleeps->push_back(d.count());
  };
  return o;
}

// Local server speaking the chat-completions wire format.
struct StubServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server.Post("/v1/chat/completions", handler);
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~StubServer() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

std::string chat_reply(const std::string& content, const std::string& finish = "stop") {
  return Json{{"choices", Json::array({Json{{"message", {{"role", "assistant"}, {"content", content}}},
                                            {"finish_reason", finish}}})}}
      .dump();
}

}  // namespace

TEST_SUITE("llm_gateway") {
  TEST_CASE("placeholders and rendering") {
    CHECK(template_placeholders("a {x} b {y} {x} {{z}}") == std::vector<std::string>{"x", "y"});
    CHECK(render_template("{a} and {{b}}", {{"a", "1"}}) == "1 and {b}");
    CHECK_THROWS_AS(render_template("{a}", {}), UserError);
    CHECK_THROWS_AS(render_template("{a}", {{"a", "1"}, {"b", "2"}}), UserError);
    CHECK_THROWS_AS(template_placeholders("{oops"), UserError);
  }

  TEST_CASE("builtin prompts are pinned by hash") {
    const auto pins = Json::parse(read_file(hgtest::fixture("prompt_sha256.json")));
    const auto& reg = TemplateRegistry::builtin();
    CHECK(reg.ids().size() == pins.size());
    for (const auto& [id, sha] : pins.items()) {
      REQUIRE(reg.contains(id));
      CHECK_MESSAGE(reg.get(id).sha256 == sha.get<std::string>(), id);
    }
    CHECK(reg.get("qa_generation").expected_payload.is_object());
    CHECK(reg.get("cot_generation").expected_payload.is_null());
  }

  TEST_CASE("payload parsing tolerates fences, prose and trailing commas") {
    const Json schema{{"type", "object"}, {"required", Json::array({"n"})}};
    CHECK(parse_payload("```json\n{\"n\": 2}\n```", schema).value->at("n") == 2);
    CHECK(parse_payload("Sure! Here it is: {\"n\": 3,} Hope that helps.", schema).value->at("n") == 3);
    CHECK_FALSE(parse_payload("no json at all", schema).ok());
    CHECK_FALSE(parse_payload("{\"m\": 1}", schema).ok());
    CHECK(parse_payload("  free text  ", nullptr).value->get<std::string>() == "free text");
    CHECK_FALSE(parse_payload("   ", nullptr).ok());
  }

  TEST_CASE("schema checks") {
    const Json item = Json::parse(R"({"type": "object", "required": ["a"],
                                      "properties": {"a": {"type": ["string", "null"]}}})");
    const Json schema{{"type", "array"}, {"items", item}};
    CHECK_FALSE(schema_violation(Json::parse(R"([{"a": "x"}, {"a": null}])"), schema));
    CHECK(schema_violation(Json::parse(R"([{"a": 1}])"), schema));
    CHECK(schema_violation(Json::parse(R"([{}])"), schema));
    CHECK(schema_violation(Json::parse(R"({"a": "x"})"), schema));
  }

  TEST_CASE("transport failures back off exponentially within the attempt budget") {
    auto p = std::make_shared<ScriptedProvider>();
    p->push_fault(ScriptedProvider::Fault::Transport);
    p->push_fault(ScriptedProvider::Fault::Transport);
    p->push("{\"n\": 5}");
    std::vector<long> sleeps;
    const auto reg = test_registry();
    Gateway gw(p, reg, fast_options(&sleeps));
    auto x = gw.run("json_t", {{"thing", "five"}}, "m", {}, nullptr, "k");
    REQUIRE(x.ok());
    CHECK(x.parsed_payload->at("n") == 5);
    CHECK(x.attempts == 3);
    CHECK(sleeps == std::vector<long>{100, 200});
    CHECK(x.ledger[0].outcome == "transport_error");
    CHECK(x.ledger[2].outcome == "ok");
    CHECK(p->requests()[0].prompt == "Give five as JSON like {\"n\": 1}.");
  }

  TEST_CASE("retries are exhausted after four calls") {
    auto p = std::make_shared<ScriptedProvider>();
    for (int i = 0; i < 6; ++i) p->push_fault(ScriptedProvider::Fault::Transport);
    const auto reg = test_registry();
    Gateway gw(p, reg, fast_options());
    try {
      gw.run("json_t", {{"thing", "x"}}, "m", {}, nullptr, "k");
      FAIL("expected RetriesExhausted");
    } catch (const RetriesExhausted& e) {
      CHECK(e.ledger().size() == 4);
    }
    CHECK(p->call_count() == 4);
  }

  TEST_CASE("auth and content errors are not retried") {
    const auto reg = test_registry();
    for (auto fault : {ScriptedProvider::Fault::Auth, ScriptedProvider::Fault::Content}) {
      auto p = std::make_shared<ScriptedProvider>();
      p->push_fault(fault);
      p->push("{\"n\": 1}");
      Gateway gw(p, reg, fast_options());
      CHECK_THROWS_AS(gw.run("json_t", {{"thing", "x"}}, "m", {}, nullptr, "k"), ProviderError);
      CHECK(p->call_count() == 1);
    }
  }

  TEST_CASE("one JSON reminder after a parse failure") {
    auto p = std::make_shared<ScriptedProvider>();
    p->push("not json");
    p->push("{\"n\": 9}");
    const auto reg = test_registry();
    Gateway gw(p, reg, fast_options());
    auto x = gw.run("json_t", {{"thing", "x"}}, "m", {}, nullptr, "k");
    REQUIRE(x.ok());
    CHECK(x.ledger[0].outcome == "parse_failure");
    const auto reqs = p->requests();
    REQUIRE(reqs.size() == 2);
    CHECK(reqs[1].prompt == reqs[0].prompt + std::string(kJsonReminder));

    auto q = std::make_shared<ScriptedProvider>();
    q->push("bad");
    q->push("still bad");
    q->push("{\"n\": 1}");
    Gateway gw2(q, reg, fast_options());
    auto y = gw2.run("json_t", {{"thing", "x"}}, "m", {}, nullptr, "k");
    CHECK_FALSE(y.ok());
    CHECK(q->call_count() == 2);

    auto f = std::make_shared<ScriptedProvider>();
    f->push("   ");
    Gateway gw3(f, reg, fast_options());
    CHECK_FALSE(gw3.run("free_t", {{"thing", "x"}}, "m", {}, nullptr, "k").ok());
    CHECK(f->call_count() == 1);
  }

  TEST_CASE("exchange ids and the exchange log") {
    CHECK(exchange_id_for("a") == exchange_id_for("a"));
    CHECK(exchange_id_for("a").size() == 16);
    const auto dir = std::filesystem::temp_directory_path() / "hopgraph_llm_log";
    std::filesystem::remove_all(dir);
    auto p = std::make_shared<ScriptedProvider>();
    p->push("hello");
    auto opts = fast_options();
    opts.log_path = dir / "x.jsonl";
    const auto reg = test_registry();
    Gateway gw(p, reg, opts);
    auto x = gw.run("free_t", {{"thing", "hi"}}, "m", {}, nullptr, "key1");
    const auto line = Json::parse(read_file(dir / "x.jsonl"));
    CHECK(line.at("exchange_id") == x.exchange_id);
    CHECK(line.at("raw_completion") == "hello");
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("chat-completions provider against a local stub") {
    std::atomic<int> hits{0};
    std::string seen_auth, seen_model;
    StubServer stub([&](const httplib::Request& req, httplib::Response& res) {
      const int n = ++hits;
      seen_auth = req.get_header_value("Authorization");
      const auto body = Json::parse(req.body);
      seen_model = body.at("model").get<std::string>();
      if (n == 1) {
        res.status = 503;
        return;
      }
      res.set_content(chat_reply("{\"n\": 4}"), "application/json");
    });
    auto provider = std::make_shared<OpenAiCompatibleProvider>(HttpProviderConfig{stub.url(), "sekret", 5});
    const auto reg = test_registry();
    Gateway gw(provider, reg, fast_options());
    auto x = gw.run("json_t", {{"thing", "x"}}, "judge-model", {0.0, 64}, nullptr, "k");
    REQUIRE(x.ok());
    CHECK(x.parsed_payload->at("n") == 4);
    CHECK(hits == 2);
    CHECK(seen_auth == "Bearer sekret");
    CHECK(seen_model == "judge-model");
  }

  TEST_CASE("provider maps HTTP failures onto error kinds") {
    int status = 401;
    std::string finish = "stop";
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
      res.status = status;
      res.set_content(chat_reply("x", finish), "application/json");
    });
    OpenAiCompatibleProvider p({stub.url(), "", 5});
    CompletionRequest req{"free_t", "hi", "m", {}, nullptr};
    CHECK_THROWS_AS(p.complete(req), AuthError);
    status = 429;
    CHECK_THROWS_AS(p.complete(req), TransportError);
    status = 400;
    CHECK_THROWS_AS(p.complete(req), ContentError);
    status = 200;
    finish = "content_filter";
    CHECK_THROWS_AS(p.complete(req), ContentError);
    finish = "stop";
    CHECK(p.complete(req) == "x");
    OpenAiCompatibleProvider dead({"http://127.0.0.1:1/v1", "", 1});
    CHECK_THROWS_AS(dead.complete(req), TransportError);
    CHECK_THROWS_AS(OpenAiCompatibleProvider({"ftp://nope", "", 1}), UserError);
  }

  TEST_CASE("synthetic provider is deterministic and schema-conformant") {
    auto p = std::make_shared<SyntheticProvider>(3);
    Gateway gw(p, TemplateRegistry::builtin(), fast_options());
    const Json list = Json::array({"artisan (Ann Lee)", "museum (Town Hall)", "cup (Image 1)"});
    const Bindings b{{"list_of_entities", list.dump()}};
    auto x1 = gw.run("edge_generation", b, "m", {}, Json{{"entities", list}}, "k");
    auto x2 = gw.run("edge_generation", b, "m", {}, Json{{"entities", list}}, "k");
    CHECK(x1.raw_completion == x2.raw_completion);
    CHECK(x1.ok());
    CHECK_THROWS_AS(p->complete({"no_such_template", "", "m", {}, nullptr}), ContentError);
  }
}
