#include <doctest.h>

#include <chrono>

#include "hopgraph/chain.hpp"
#include "hopgraph/context_subgraph.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/rng.hpp"
#include "hopgraph/scene_graph.hpp"
#include "support.hpp"

using namespace hopgraph;

namespace {

EntityNode visual(const std::string& id, int img, std::vector<std::string> attrs = {}) {
  EntityNode n;
  n.id = id;
  n.name = id;
  n.display_name = id;
  n.image_index = img;
  n.attributes = std::move(attrs);
  return n;
}

EntityNode textual(const std::string& id) {
  EntityNode n;
  n.id = id;
  n.name = id;
  n.display_name = id;
  return n;
}

RelationEdge edge(const std::string& s, const std::string& o, const std::string& r = "rel") {
  RelationEdge e;
  e.subject_id = s;
  e.object_id = o;
  e.relation = r;
  return e;
}

// cup(img0, red) - Ann - Bob, plus a cup-plate relation inside the image.
ContentGraph small_graph() {
  ContentGraph g;
  g.image_count = 1;
  g.nodes = {visual("cup", 0, {"red"}), visual("plate", 0), textual("Ann"), textual("Bob")};
  g.edges = {edge("cup", "Ann", "owned by"), edge("Ann", "Bob", "knows"), edge("cup", "plate", "on")};
  return g;
}

}  // namespace

TEST_SUITE("graph_core") {
  TEST_CASE("rng follows the mt19937_64 reference sequence") {
    Rng rng(5489);
    std::uint64_t v = 0;
    for (int i = 0; i < 10000; ++i) v = rng.next_u64();
    CHECK(v == 9981545732273789042ULL);
  }

  TEST_CASE("rng helpers stay in range and derive_seed separates labels") {
    Rng rng(1);
    for (int i = 0; i < 2000; ++i) {
      const int x = rng.uniform_int(-2, 3);
      CHECK(x >= -2);
      CHECK(x <= 3);
      const double u = rng.uniform01();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
    }
    const std::vector<double> w = {0.0, 1.0, 0.0};
    for (int i = 0; i < 50; ++i) CHECK(rng.weighted_index(w) == 1);
    auto picks = rng.sample_without_replacement(10, 10);
    std::sort(picks.begin(), picks.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(picks[i] == i);
    CHECK(derive_seed(7, "a") == derive_seed(7, "a"));
    CHECK(derive_seed(7, "a") != derive_seed(7, "b"));
    CHECK(derive_seed(7, "a") != derive_seed(8, "a"));
  }

  TEST_CASE("domain hop bounds") {
    CHECK(default_hop_bounds(Domain::NI).max_hops == 5);
    CHECK(default_hop_bounds(Domain::VF).max_hops == 5);
    CHECK(default_hop_bounds(Domain::SP).max_hops == 4);
    CHECK(default_hop_bounds(Domain::SP).min_hops == 1);
  }

  TEST_CASE("graph validation and JSON round trip") {
    auto g = small_graph();
    CHECK(validate_graph(g, true).empty());
    g.edges[0].provenance = Provenance{"edge_generation", "abc"};
    g.nodes[2].type_tag = "artisan";
    CHECK(graph_from_json(to_json(g)) == g);

    auto bad = g;
    bad.edges.push_back(edge("cup", "ghost"));
    CHECK_FALSE(validate_graph(bad).empty());
    bad = g;
    bad.nodes.push_back(textual("Ann"));
    CHECK_FALSE(validate_graph(bad).empty());
    bad = g;
    bad.nodes = {textual("Ann"), textual("Bob")};
    bad.edges = {edge("Ann", "Bob")};
    CHECK_FALSE(validate_graph(bad).empty());
    bad = small_graph();
    bad.nodes.erase(bad.nodes.begin() + 2, bad.nodes.end());
    bad.edges = {edge("cup", "plate")};
    CHECK(validate_graph(bad, false).empty());
    CHECK_FALSE(validate_graph(bad, true).empty());
  }

  TEST_CASE("image references per domain") {
    auto g = small_graph();
    CHECK(image_reference(g, 0) == "Image");
    g.image_count = 3;
    CHECK(image_reference(g, 1) == "Image 2");
    CHECK(prompt_label(g, g.nodes[0]) == "cup (Image 1)");
    CHECK(prompt_label(g, g.nodes[2]) == "Ann");
    g.domain = Domain::VF;
    CHECK(image_reference(g, 2) == "Image");
    g.domain = Domain::SP;
    g.edges[0].figure_label = "Figure 4";
    g.edges[0].image_tag = 0;
    g.edges[0].sentence_indices = std::vector<int>{0};
    CHECK(image_reference(g, 0) == "Figure 4");
  }

  TEST_CASE("merge gives subscripts only to names repeated across the input") {
    SceneGraph a{"A", {{"1", "apple", {"red"}}, {"2", "table", {}}}, {{"1", "2", "on"}}};
    SceneGraph b{"B", {{"7", "apple", {"green"}}, {"8", "man", {}}}, {{"8", "7", "holding"}}};
    const std::vector<SceneGraph> scenes{a, b};
    const auto g = merge_scene_graphs(scenes);
    REQUIRE(g.nodes.size() == 4);
    CHECK(g.image_count == 2);
    CHECK(g.nodes[0].id == "img0/1");
    CHECK(g.nodes[0].display_name == "apple_1");
    CHECK(g.nodes[2].display_name == "apple_2");
    CHECK(g.nodes[1].display_name == "table");
    CHECK(g.nodes[2].name == "apple");
    CHECK(g.edges[1].image_tag == 1);
    CHECK(g.edges[1].subject_id == "img1/8");
    CHECK(validate_graph(g).empty());

    CHECK_THROWS_AS(merge_scene_graphs(std::vector<SceneGraph>{}), UserError);
    CHECK_THROWS_AS(merge_scene_graphs(std::vector<SceneGraph>(7, a)), UserError);
    SceneGraph broken{"C", {{"1", "cup", {}}}, {{"1", "9", "on"}}};
    CHECK_THROWS_AS(merge_scene_graphs(std::vector<SceneGraph>{broken}), UserError);
  }

  TEST_CASE("uniqueness filter on a hand-built scene") {
    // Both men hold an apple, so only the man near the dog stands apart. The
    // plain apple has nothing its red sibling lacks.
    SceneGraph s{"X",
                 {{"1", "apple", {"red"}}, {"2", "apple", {}}, {"3", "man", {}}, {"4", "man", {}}, {"5", "dog", {}}},
                 {{"3", "1", "holding"}, {"4", "2", "holding"}, {"4", "5", "near"}}};
    const auto r = filter_unique_entities(s);
    std::set<std::string> kept;
    for (const auto& o : r.scene.objects) kept.insert(o.id);
    CHECK(kept == std::set<std::string>{"1", "4", "5"});
    CHECK(r.discriminators.at("1") == "red");
    CHECK(r.discriminators.at("4") == "near dog");
    for (const auto& rel : r.scene.relations) {
      CHECK(kept.count(rel.subject_id));
      CHECK(kept.count(rel.object_id));
    }
    CHECK(kept == hgtest::oracle_unique_objects(s));
  }

  TEST_CASE("uniqueness filter matches the brute-force oracle and is idempotent") {
    Rng rng(2024);
    for (int t = 0; t < 200; ++t) {
      const auto s = hgtest::random_scene(rng);
      const auto r = filter_unique_entities(s);
      std::set<std::string> kept;
      for (const auto& o : r.scene.objects) kept.insert(o.id);
      CHECK(kept == hgtest::oracle_unique_objects(s));
      CHECK(filter_unique_entities(r.scene).scene == r.scene);
    }
  }

  TEST_CASE("chain validation rejects each broken invariant") {
    const auto g = small_graph();
    const auto chains = enumerate_chains(g, 2);
    REQUIRE_FALSE(chains.empty());
    const auto good = chains.front();
    CHECK(validate_chain(good, g, default_hop_bounds(Domain::NI)).empty());

    auto c = good;
    c.nodes.back() = textual("plate");
    c.nodes.back().id = c.node_path.back();
    CHECK_FALSE(validate_chain(c, default_hop_bounds(Domain::NI)).empty());
    c = good;
    c.hop_count = 6;
    CHECK_FALSE(validate_chain(c, default_hop_bounds(Domain::NI)).empty());
    c = good;
    c.answer_node_id = "Ann";
    CHECK_FALSE(validate_chain(c, default_hop_bounds(Domain::NI)).empty());

    const auto one_hop = enumerate_chains(g, 1);
    for (const auto& ch : one_hop) {
      CHECK(ch.answer_kind == AnswerKind::Attribute);
      auto wrong = ch;
      wrong.answer_kind = AnswerKind::EntityName;
      CHECK_FALSE(validate_chain(wrong, default_hop_bounds(Domain::NI)).empty());
    }
    CHECK(chain_from_json(to_json(good)).node_path == good.node_path);
  }

  TEST_CASE("chain enumeration on a hand-built graph") {
    const auto g = small_graph();
    // h=1: Ann-cup with attribute "red" is the only mixed edge ending at a visual node.
    const auto h1 = enumerate_chains(g, 1);
    REQUIRE(h1.size() == 1);
    CHECK(h1[0].node_path == std::vector<std::string>{"Ann", "cup"});
    // h=2: Bob-Ann-cup (entity, attribute), Ann-cup-plate (entity only).
    const auto h2 = enumerate_chains(g, 2);
    CHECK(h2.size() == 3);
    CHECK(enumerate_chains(g, 4).empty());
  }

  TEST_CASE("enumeration agrees with the forward-search oracle") {
    Rng rng(99);
    for (int t = 0; t < 300; ++t) {
      const auto g = hgtest::random_graph(rng, Domain::NI);
      for (int h = 1; h <= 5; ++h) {
        std::set<hgtest::ChainTuple> got;
        for (const auto& c : enumerate_chains(g, h)) got.insert(hgtest::tuple_of(c));
        CHECK(got == hgtest::oracle_chains(g, h));
      }
    }
  }

  TEST_CASE("sampled chains satisfy the invariants and are enumerable") {
    Rng rng(7);
    int sampled = 0;
    for (int t = 0; t < 400; ++t) {
      const Domain d = t % 3 == 0 ? Domain::SP : (t % 3 == 1 ? Domain::VF : Domain::NI);
      const auto g = hgtest::random_graph(rng, d);
      const auto bounds = default_hop_bounds(d);
      const int h = rng.uniform_int(bounds.min_hops, bounds.max_hops);
      const auto valid = hgtest::oracle_chains(g, h);
      auto c = sample_chain(g, h, rng);
      if (!c) continue;
      ++sampled;
      CHECK(validate_chain(*c, g, bounds).empty());
      CHECK(valid.count(hgtest::tuple_of(*c)));
    }
    CHECK(sampled > 100);
    CHECK_THROWS_AS(sample_chain(small_graph(), 6, std::uint64_t{1}), UserError);
    ContentGraph sp = small_graph();
    sp.domain = Domain::SP;
    CHECK_THROWS_AS(sample_chain(sp, 5, std::uint64_t{1}), UserError);
  }

  TEST_CASE("sampling reaches every valid chain of a small graph") {
    const auto g = small_graph();
    const auto valid = hgtest::oracle_chains(g, 2);
    std::set<hgtest::ChainTuple> seen;
    Rng rng(11);
    for (std::size_t i = 0; i < 50 * valid.size(); ++i)
      if (auto c = sample_chain(g, 2, rng)) seen.insert(hgtest::tuple_of(*c));
    CHECK(seen == valid);
  }

  TEST_CASE("sampling is a function of the seed") {
    Rng rng(3);
    const auto g = hgtest::random_graph(rng, Domain::NI);
    for (std::uint64_t s = 0; s < 20; ++s) {
      auto a = sample_chain(g, 2, s);
      auto b = sample_chain(g, 2, s);
      REQUIRE(a.has_value() == b.has_value());
      if (a) CHECK(chain_key(*a) == chain_key(*b));
    }
  }

  TEST_CASE("context view of one image") {
    // img0: cup; img1: dog. Ann attaches to img0, Bob to img1, Cal to none.
    ContentGraph g;
    g.image_count = 2;
    g.nodes = {visual("cup", 0), visual("dog", 1), textual("Ann"), textual("Bob"), textual("Cal")};
    g.edges = {edge("cup", "Ann"), edge("dog", "Bob"), edge("Ann", "Bob"), edge("cup", "dog"), edge("Ann", "Cal")};
    CHECK(attached_images(g, "Ann") == std::set<int>{0});
    CHECK(cross_image_text_edges(g) == std::vector<std::size_t>{2, 4});
    CHECK_THROWS_AS(extract_context_subgraph(g, 0, {}), UserError);

    const EdgeAssignment to0{{2, 0}, {4, 0}};
    const auto v0 = extract_context_subgraph(g, 0, to0);
    const std::set<std::size_t> e0(v0.edge_indices.begin(), v0.edge_indices.end());
    CHECK(e0.count(0));
    CHECK(e0.count(2));
    CHECK_FALSE(e0.count(3));
    const std::set<std::string> n0(v0.node_ids.begin(), v0.node_ids.end());
    CHECK(n0.count("Bob"));
    const auto v1 = extract_context_subgraph(g, 1, to0);
    CHECK(std::find(v1.edge_indices.begin(), v1.edge_indices.end(), 2) == v1.edge_indices.end());

    Rng rng(5);
    const auto assignment = assign_cross_image_edges(g, rng);
    REQUIRE(assignment.count(2));
    CHECK((assignment.at(2) == 0 || assignment.at(2) == 1));
    CHECK(assignment.at(4) == 0);

    const auto whole = extract_whole_context(g);
    CHECK(std::find(whole.edge_indices.begin(), whole.edge_indices.end(), 3) == whole.edge_indices.end());
    CHECK(whole.edge_indices.size() == 4);
  }
}
