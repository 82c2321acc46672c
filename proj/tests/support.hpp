#pragma once

// Random fixtures and brute-force oracles shared by the unit tests and the
// acceptance gate. The oracles are written against the documented rules, not
// against the library code paths they check.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "hopgraph/chain.hpp"
#include "hopgraph/dataset.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/qa_gen.hpp"
#include "hopgraph/rng.hpp"
#include "hopgraph/scene_graph.hpp"

namespace hgtest {

using namespace hopgraph;

#ifndef HOPGRAPH_FIXTURE_DIR
#define HOPGRAPH_FIXTURE_DIR "tests/fixtures"
#endif

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(HOPGRAPH_FIXTURE_DIR) / rel;
}

// Mixed-modality graph with up to `max_nodes` nodes. Edges may be
// parallel, reversed or solo; a few nodes are left isolated.
inline ContentGraph random_graph(Rng& rng, Domain domain, int max_nodes = 12) {
  static const std::vector<std::string> names = {"cup", "dog", "lamp", "tree", "car", "box"};
  static const std::vector<std::string> attrs = {"red", "small", "wooden", "old", "tall"};
  ContentGraph g;
  g.domain = domain;
  g.image_count = rng.uniform_int(1, 3);
  const int n = rng.uniform_int(2, max_nodes);
  for (int i = 0; i < n; ++i) {
    EntityNode node;
    node.id = "n" + std::to_string(i);
    const bool visual = i == 0 || rng.bernoulli(0.55);
    node.name = visual ? names[rng.uniform_index(names.size())] : "Person " + std::to_string(i);
    node.display_name = node.name + "_" + std::to_string(i);
    if (visual) {
      node.image_index = rng.uniform_int(0, g.image_count - 1);
      const int k = rng.uniform_int(0, 2);
      for (int a = 0; a < k; ++a) node.attributes.push_back(attrs[rng.uniform_index(attrs.size())]);
    }
    g.nodes.push_back(std::move(node));
  }
  const int m = rng.uniform_int(1, n + 4);
  for (int e = 0; e < m; ++e) {
    RelationEdge edge;
    edge.subject_id = g.nodes[rng.uniform_index(n)].id;
    if (!rng.bernoulli(0.08)) {
      std::string o;
      do {
        o = g.nodes[rng.uniform_index(n)].id;
      } while (o == edge.subject_id);
      edge.object_id = o;
    }
    edge.relation = "rel" + std::to_string(e);
    g.edges.push_back(std::move(edge));
  }
  return g;
}

// (edge indices, node path, answer kind) of a chain.
using ChainTuple = std::tuple<std::vector<std::size_t>, std::vector<std::string>, AnswerKind>;

inline ChainTuple tuple_of(const ChainSubgraph& c) { return {c.edge_indices, c.node_path, c.answer_kind}; }

// Every chain of exactly h edges by forward search from each start node over
// the raw edge list: simple path, non-solo edges in either direction,
// visual terminal, both modalities present, attribute answers only where the
// terminal has attributes and entity answers only for h >= 2.
inline std::set<ChainTuple> oracle_chains(const ContentGraph& g, int h) {
  std::set<ChainTuple> out;
  std::vector<std::size_t> edges;
  std::vector<std::string> path;
  auto node = [&](const std::string& id) -> const EntityNode& { return *g.find(id); };
  auto walk = [&](auto&& self) -> void {
    if (static_cast<int>(edges.size()) == h) {
      const EntityNode& t = node(path.back());
      if (!t.is_visual()) return;
      bool vis = false, txt = false;
      for (const auto& id : path) (node(id).is_visual() ? vis : txt) = true;
      if (!vis || !txt) return;
      if (h >= 2) out.insert({edges, path, AnswerKind::EntityName});
      if (!t.attributes.empty()) out.insert({edges, path, AnswerKind::Attribute});
      return;
    }
    for (std::size_t e = 0; e < g.edges.size(); ++e) {
      const auto& edge = g.edges[e];
      if (!edge.object_id || edge.subject_id == *edge.object_id) continue;
      std::string next;
      if (edge.subject_id == path.back()) next = *edge.object_id;
      else if (*edge.object_id == path.back()) next = edge.subject_id;
      else continue;
      if (std::find(path.begin(), path.end(), next) != path.end()) continue;
      edges.push_back(e);
      path.push_back(next);
      self(self);
      edges.pop_back();
      path.pop_back();
    }
  };
  for (const auto& n : g.nodes) {
    path = {n.id};
    edges.clear();
    walk(walk);
  }
  return out;
}

// Random per-image scene graph with deliberate name collisions.
inline SceneGraph random_scene(Rng& rng, int max_objects = 9) {
  static const std::vector<std::string> names = {"apple", "apple", "man", "man", "chair", "sign"};
  static const std::vector<std::string> attrs = {"red", "green", "tall", "wooden"};
  static const std::vector<std::string> rels = {"on", "near", "holding"};
  SceneGraph s;
  s.image_id = "img" + std::to_string(rng.next_u64() % 100000);
  const int n = rng.uniform_int(1, max_objects);
  for (int i = 0; i < n; ++i) {
    SceneObject o{std::to_string(i + 1), names[rng.uniform_index(names.size())], {}};
    if (rng.bernoulli(0.4)) o.attributes.push_back(attrs[rng.uniform_index(attrs.size())]);
    s.objects.push_back(std::move(o));
  }
  const int m = rng.uniform_int(0, n + 2);
  for (int r = 0; r < m; ++r) {
    const auto a = s.objects[rng.uniform_index(n)].id;
    const auto b = s.objects[rng.uniform_index(n)].id;
    s.relations.push_back({a, b, rels[rng.uniform_index(rels.size())]});
  }
  return s;
}

// Greatest set S of objects such that each member of S is either the only
// object with its name, or holds a feature that no same-name object holds.
// Features are attribute values and directed (relation, neighbor name) pairs
// with the neighbor in S; siblings are judged on the full annotation. Found
// as the union of all subsets S with S contained in F(S), by enumeration.
inline std::set<std::string> oracle_unique_objects(const SceneGraph& s) {
  const std::size_t n = s.objects.size();
  std::map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) idx[s.objects[i].id] = i;
  using Feat = std::tuple<int, std::string, std::string>;  // 0 attr, 1 out, 2 in
  std::vector<std::set<Feat>> full(n);
  struct Rel {
    std::size_t a, b;
    std::string r;
  };
  std::vector<Rel> rels;
  for (std::size_t i = 0; i < n; ++i)
    for (const auto& a : s.objects[i].attributes) full[i].insert({0, "", a});
  for (const auto& r : s.relations) {
    const std::size_t a = idx.at(r.subject_id), b = idx.at(r.object_id);
    if (a == b) continue;
    rels.push_back({a, b, r.relation});
    full[a].insert({1, r.relation, s.objects[b].name});
    full[b].insert({2, r.relation, s.objects[a].name});
  }
  auto distinguished = [&](std::size_t i, std::uint32_t set) {
    std::vector<std::size_t> sibs;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i && s.objects[j].name == s.objects[i].name) sibs.push_back(j);
    if (sibs.empty()) return true;
    std::vector<Feat> own;
    for (const auto& a : s.objects[i].attributes) own.push_back({0, "", a});
    for (const auto& r : rels) {
      if (r.a == i && (set >> r.b & 1u)) own.push_back({1, r.r, s.objects[r.b].name});
      if (r.b == i && (set >> r.a & 1u)) own.push_back({2, r.r, s.objects[r.a].name});
    }
    for (const auto& f : own) {
      bool elsewhere = false;
      for (std::size_t j : sibs) elsewhere = elsewhere || full[j].count(f);
      if (!elsewhere) return true;
    }
    return false;
  };
  std::uint32_t gfp = 0;
  for (std::uint32_t set = 0; set < (1u << n); ++set) {
    bool post_fixed = true;
    for (std::size_t i = 0; i < n && post_fixed; ++i)
      if (set >> i & 1u) post_fixed = distinguished(i, set);
    if (post_fixed) gfp |= set;
  }
  std::set<std::string> out;
  for (std::size_t i = 0; i < n; ++i)
    if (gfp >> i & 1u) out.insert(s.objects[i].id);
  return out;
}

// Ten samples with hand-countable statistics:
//   NI/train: 4 samples, images 2+3+1+4, tokens 10+20+30+40, hops {1,2},{1},{3,4},{1}
//   NI/test:  2 samples, images 1+6, tokens 5+8, hops {2},{5,5}
//   VF/train: 2 samples, images 3+3, tokens 12+13, hops {1},{2,3}
//   SP/train: 1 sample,  images 1, tokens 7, hops {4}
//   SP/test:  1 sample,  images 2, tokens 9, hops {1,2,3}
inline std::vector<DatasetSample> stats_fixture() {
  struct Spec {
    Domain domain;
    Split split;
    int images;
    int tokens;
    std::vector<int> hops;
  };
  const std::vector<Spec> specs = {
      {Domain::NI, Split::Train, 2, 10, {1, 2}}, {Domain::NI, Split::Train, 3, 20, {1}},
      {Domain::NI, Split::Train, 1, 30, {3, 4}}, {Domain::NI, Split::Train, 4, 40, {1}},
      {Domain::NI, Split::Test, 1, 5, {2}},      {Domain::NI, Split::Test, 6, 8, {5, 5}},
      {Domain::VF, Split::Train, 3, 12, {1}},    {Domain::VF, Split::Train, 3, 13, {2, 3}},
      {Domain::SP, Split::Train, 1, 7, {4}},     {Domain::SP, Split::Test, 2, 9, {1, 2, 3}},
  };
  std::vector<DatasetSample> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& sp = specs[i];
    DatasetSample s;
    s.sample_id = "s" + std::to_string(i);
    s.domain = sp.domain;
    s.split = sp.split;
    for (int k = 0; k < sp.images; ++k) s.image_refs.push_back("img" + std::to_string(i) + "_" + std::to_string(k));
    for (int k = 0; k < sp.tokens; ++k) s.context += (k ? "  w" : "w") + std::to_string(k);
    for (int h : sp.hops) {
      QARecord r;
      r.domain = sp.domain;
      r.hop_count = h;
      s.qa.push_back(r);
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct ScoreCase {
  std::string prediction, gold;
  int em;
  double f1;
};

// Hand-scored pairs. F1 = 2PR/(P+R) over normalized token bags.
inline const std::vector<ScoreCase>& score_table() {
  static const std::vector<ScoreCase> cases = {
      {"Paris", "Paris", 1, 1.0},
      {"the Eiffel Tower", "Eiffel Tower", 1, 1.0},
      {"Eiffel Tower!", "eiffel tower", 1, 1.0},
      {"red", "blue", 0, 0.0},
      {"big red dog", "red dog", 0, 0.8},       // P 2/3, R 1
      {"red dog", "big red dog", 0, 0.8},       // P 1, R 2/3
      {"a cat", "the cat", 1, 1.0},
      {"New York City", "york", 0, 0.5},        // P 1/3, R 1
      {"red", "red car", 0, 2.0 / 3.0},         // P 1, R 1/2
      {"", "", 1, 1.0},
      {"the", "cat", 0, 0.0},                   // prediction empty after normalization
      {"U.S.A.", "usa", 1, 1.0},
  };
  return cases;
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto d = std::filesystem::temp_directory_path() / ("hopgraph_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

// Copy of the end-to-end fixture directory (config, scenes, video, paper,
// recorded vectors) so runs never write into the source tree.
inline std::filesystem::path copy_e2e(const std::string& name) {
  const auto d = scratch_dir(name);
  std::filesystem::copy(fixture("e2e"), d / "in", std::filesystem::copy_options::recursive);
  return d;
}

// Ann Lee (artisan) - bowl(img0, blue) - table(img0); Ann also knows Bo Chen.
inline ContentGraph qa_graph() {
  ContentGraph g;
  g.image_count = 1;
  EntityNode bowl{"v1", "bowl", "bowl", 0, {"blue"}, {}, {}};
  EntityNode table{"v2", "table", "table", 0, {"wooden"}, {}, {}};
  EntityNode ann{"t1", "artisan (Ann Lee)", "artisan (Ann Lee)", {}, {}, "artisan", {}};
  EntityNode bo{"t2", "curator (Bo Chen)", "curator (Bo Chen)", {}, {}, "curator", {}};
  g.nodes = {bowl, table, ann, bo};
  RelationEdge e1{"v1", "t1", "crafted by", {}, {}, {}, {}};
  RelationEdge e2{"t1", "t2", "knows", {}, {}, {}, {}};
  RelationEdge e3{"v1", "v2", "on", 0, {}, {}, {}};
  g.edges = {e1, e2, e3};
  return g;
}

// Bo Chen -knows- Ann Lee -crafted- bowl, answered with the bowl's colour.
inline QARecord two_hop_record(const ContentGraph& g) {
  ChainSubgraph c;
  for (const auto& ch : enumerate_chains(g, 2))
    if (ch.node_path == std::vector<std::string>{"t2", "t1", "v1"} && ch.answer_kind == AnswerKind::Attribute)
      c = ch;
  if (c.hop_count != 2) throw std::logic_error("two-hop chain missing from qa_graph");
  c.answer_value = "blue";
  QARecord r;
  r.chain = c;
  r.domain = Domain::NI;
  r.hop_count = 2;
  r.answer = "blue";
  r.question = "What colour is the object in the image made by someone Bo Chen knows?";
  r.cot_sentences = {"From the text context, Bo Chen knows an artisan.",
                     "From the text context, the artisan crafted the bowl.", "From the image, the bowl is blue.",
                     "Therefore, the answer is blue."};
  return r;
}

}  // namespace hgtest
