#include "hopgraph/chain.hpp"

#include <algorithm>
#include <set>
#include <tuple>

namespace hopgraph {

std::string_view to_string(AnswerKind k) {
  return k == AnswerKind::Attribute ? "attribute" : "entity_name";
}

std::vector<const EntityNode*> ChainSubgraph::interior_nodes() const {
  std::vector<const EntityNode*> out;
  for (std::size_t i = 1; i + 1 < nodes.size(); ++i) out.push_back(&nodes[i]);
  return out;
}

std::vector<std::string> validate_chain(const ChainSubgraph& c, HopBounds bounds) {
  std::vector<std::string> problems;
  const auto h = static_cast<std::size_t>(std::max(c.hop_count, 0));
  if (c.hop_count < bounds.min_hops || c.hop_count > bounds.max_hops)
    problems.push_back("hop count " + std::to_string(c.hop_count) + " outside domain bounds");
  if (c.edges.size() != h || c.edge_indices.size() != h)
    problems.push_back("edge count does not match hop count");
  if (c.node_path.size() != h + 1 || c.nodes.size() != h + 1) {
    problems.push_back("node path length does not match hop count");
    return problems;
  }
  for (std::size_t i = 0; i < c.nodes.size(); ++i) {
    if (c.nodes[i].id != c.node_path[i]) problems.push_back("node snapshot out of order");
  }
  std::set<std::string> seen(c.node_path.begin(), c.node_path.end());
  if (seen.size() != c.node_path.size()) problems.push_back("path revisits a node");
  for (std::size_t i = 0; i < c.edges.size() && i + 1 < c.node_path.size(); ++i) {
    const auto& e = c.edges[i];
    if (e.is_solo()) {
      problems.push_back("solo-action edge inside a chain");
      continue;
    }
    const auto& a = c.node_path[i];
    const auto& b = c.node_path[i + 1];
    const bool forward = e.subject_id == a && *e.object_id == b;
    const bool backward = e.subject_id == b && *e.object_id == a;
    if (!forward && !backward) problems.push_back("edge " + std::to_string(i) + " does not join its path nodes");
  }
  const auto& terminal = c.nodes.back();
  if (!terminal.is_visual()) problems.push_back("terminal node is not visual");
  if (c.answer_node_id != terminal.id) problems.push_back("answer node is not the terminal");
  const bool any_visual = std::any_of(c.nodes.begin(), c.nodes.end(), [](auto& n) { return n.is_visual(); });
  const bool any_textual = std::any_of(c.nodes.begin(), c.nodes.end(), [](auto& n) { return !n.is_visual(); });
  if (!any_visual || !any_textual) problems.push_back("chain does not span both modalities");
  if (c.hop_count == 1 && c.answer_kind != AnswerKind::Attribute)
    problems.push_back("one-hop chain must be answered by an attribute");
  if (c.answer_kind == AnswerKind::Attribute) {
    if (terminal.attributes.empty()) problems.push_back("attribute answer on a terminal without attributes");
    if (!c.answer_value.empty() &&
        std::find(terminal.attributes.begin(), terminal.attributes.end(), c.answer_value) ==
            terminal.attributes.end())
      problems.push_back("answer value is not an attribute of the terminal");
  }
  return problems;
}

std::vector<std::string> validate_chain(const ChainSubgraph& c, const ContentGraph& g, HopBounds bounds) {
  auto problems = validate_chain(c, bounds);
  for (std::size_t i = 0; i < c.edge_indices.size() && i < c.edges.size(); ++i) {
    if (c.edge_indices[i] >= g.edges.size() || !(g.edges[c.edge_indices[i]] == c.edges[i]))
      problems.push_back("edge " + std::to_string(i) + " differs from the graph");
  }
  for (const auto& n : c.nodes) {
    const EntityNode* src = g.find(n.id);
    if (!src || !(*src == n)) problems.push_back("node " + n.id + " differs from the graph");
  }
  return problems;
}

namespace {

ChainSubgraph build_chain(const GraphIndex& index, const std::vector<std::size_t>& node_seq,
                          const std::vector<std::size_t>& edge_seq, AnswerKind kind) {
  const auto& g = index.graph();
  ChainSubgraph c;
  c.domain = g.domain;
  c.hop_count = static_cast<int>(edge_seq.size());
  for (std::size_t e : edge_seq) {
    c.edge_indices.push_back(e);
    c.edges.push_back(g.edges[e]);
  }
  for (std::size_t n : node_seq) {
    c.node_path.push_back(g.nodes[n].id);
    c.nodes.push_back(g.nodes[n]);
  }
  c.answer_node_id = c.node_path.back();
  c.answer_kind = kind;
  return c;
}

bool spans_both(const ContentGraph& g, const std::vector<std::size_t>& node_seq) {
  bool v = false, t = false;
  for (std::size_t n : node_seq) (g.nodes[n].is_visual() ? v : t) = true;
  return v && t;
}

HopBounds bounds_for(const ContentGraph& g, const ChainSamplingOptions& o) {
  return o.bounds ? *o.bounds : default_hop_bounds(g.domain);
}

}  // namespace

std::optional<ChainSubgraph> sample_chain(const ContentGraph& g, int h, Rng& rng,
                                          const ChainSamplingOptions& options) {
  const HopBounds bounds = bounds_for(g, options);
  if (h < bounds.min_hops || h > bounds.max_hops)
    throw UserError("hop count " + std::to_string(h) + " outside [" + std::to_string(bounds.min_hops) +
                    ", " + std::to_string(bounds.max_hops) + "]");

  GraphIndex index(g);
  std::vector<std::size_t> terminals;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const auto& n = g.nodes[i];
    if (!n.is_visual() || index.incident(i).empty()) continue;
    if (h == 1 && n.attributes.empty()) continue;
    terminals.push_back(i);
  }
  if (terminals.empty()) return std::nullopt;

  for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
    std::vector<std::size_t> rev_nodes{terminals[rng.uniform_index(terminals.size())]};
    std::vector<std::size_t> rev_edges;
    bool stuck = false;
    for (int step = 0; step < h; ++step) {
      std::vector<GraphIndex::Incidence> options_here;
      for (const auto& inc : index.incident(rev_nodes.back())) {
        if (std::find(rev_nodes.begin(), rev_nodes.end(), inc.other) == rev_nodes.end())
          options_here.push_back(inc);
      }
      if (options_here.empty()) {
        stuck = true;
        break;
      }
      const auto& pick = options_here[rng.uniform_index(options_here.size())];
      rev_nodes.push_back(pick.other);
      rev_edges.push_back(pick.edge);
    }
    if (stuck || !spans_both(g, rev_nodes)) continue;

    std::vector<std::size_t> node_seq(rev_nodes.rbegin(), rev_nodes.rend());
    std::vector<std::size_t> edge_seq(rev_edges.rbegin(), rev_edges.rend());
    const auto& terminal = g.nodes[node_seq.back()];
    AnswerKind kind = AnswerKind::EntityName;
    if (h == 1) {
      kind = AnswerKind::Attribute;
    } else if (!terminal.attributes.empty() && rng.bernoulli(options.attribute_answer_probability)) {
      kind = AnswerKind::Attribute;
    }
    return build_chain(index, node_seq, edge_seq, kind);
  }
  return std::nullopt;
}

std::optional<ChainSubgraph> sample_chain(const ContentGraph& g, int h, std::uint64_t seed,
                                          const ChainSamplingOptions& options) {
  Rng rng(seed);
  return sample_chain(g, h, rng, options);
}

std::vector<ChainSubgraph> enumerate_chains(const ContentGraph& g, int h, std::size_t node_limit) {
  if (g.nodes.size() > node_limit)
    throw UserError("enumerate_chains: graph has " + std::to_string(g.nodes.size()) +
                    " nodes, limit is " + std::to_string(node_limit));
  std::vector<ChainSubgraph> out;
  if (h < 1) return out;
  GraphIndex index(g);

  std::vector<std::size_t> nodes;
  std::vector<std::size_t> edges;
  auto emit = [&]() {
    if (!spans_both(g, nodes)) return;
    const auto& terminal = g.nodes[nodes.front()];
    std::vector<std::size_t> node_seq(nodes.rbegin(), nodes.rend());
    std::vector<std::size_t> edge_seq(edges.rbegin(), edges.rend());
    if (h > 1) out.push_back(build_chain(index, node_seq, edge_seq, AnswerKind::EntityName));
    if (!terminal.attributes.empty())
      out.push_back(build_chain(index, node_seq, edge_seq, AnswerKind::Attribute));
  };
  auto dfs = [&](auto&& self) -> void {
    if (static_cast<int>(edges.size()) == h) {
      emit();
      return;
    }
    for (const auto& inc : index.incident(nodes.back())) {
      if (std::find(nodes.begin(), nodes.end(), inc.other) != nodes.end()) continue;
      nodes.push_back(inc.other);
      edges.push_back(inc.edge);
      self(self);
      nodes.pop_back();
      edges.pop_back();
    }
  };
  for (std::size_t t = 0; t < g.nodes.size(); ++t) {
    if (!g.nodes[t].is_visual()) continue;
    nodes = {t};
    edges.clear();
    dfs(dfs);
  }
  std::sort(out.begin(), out.end(), [](const ChainSubgraph& a, const ChainSubgraph& b) {
    return std::tie(a.edge_indices, a.node_path, a.answer_kind) <
           std::tie(b.edge_indices, b.node_path, b.answer_kind);
  });
  return out;
}

std::string chain_key(const ChainSubgraph& c) {
  std::string key;
  for (std::size_t i = 0; i < c.node_path.size(); ++i) {
    if (i) {
      key += " -[" + std::to_string(c.edge_indices[i - 1]) + "]- ";
    }
    key += c.node_path[i];
  }
  key += " => ";
  key += to_string(c.answer_kind);
  return key;
}

Json to_json(const ChainSubgraph& c) {
  Json edges = Json::array();
  for (const auto& e : c.edges) edges.push_back(to_json(e));
  Json nodes = Json::array();
  for (const auto& n : c.nodes) nodes.push_back(to_json(n));
  Json j;
  j["edge_indices"] = c.edge_indices;
  j["edges"] = std::move(edges);
  j["node_path"] = c.node_path;
  j["nodes"] = std::move(nodes);
  j["answer_node_id"] = c.answer_node_id;
  Json kind{{"kind", std::string(to_string(c.answer_kind))}};
  if (c.answer_kind == AnswerKind::Attribute) kind["value"] = c.answer_value;
  j["answer_kind"] = std::move(kind);
  j["hop_count"] = c.hop_count;
  j["domain"] = std::string(to_string(c.domain));
  return j;
}

ChainSubgraph chain_from_json(const Json& j) {
  ChainSubgraph c;
  c.edge_indices = j.at("edge_indices").get<std::vector<std::size_t>>();
  for (const auto& e : j.at("edges")) c.edges.push_back(edge_from_json(e));
  c.node_path = j.at("node_path").get<std::vector<std::string>>();
  for (const auto& n : j.at("nodes")) c.nodes.push_back(node_from_json(n));
  c.answer_node_id = j.at("answer_node_id").get<std::string>();
  const auto& kind = j.at("answer_kind");
  const std::string k = kind.at("kind").get<std::string>();
  if (k == "attribute") {
    c.answer_kind = AnswerKind::Attribute;
    c.answer_value = kind.value("value", "");
  } else if (k == "entity_name") {
    c.answer_kind = AnswerKind::EntityName;
  } else {
    throw UserError("unknown answer kind " + k);
  }
  c.hop_count = j.at("hop_count").get<int>();
  c.domain = domain_from_string(j.value("domain", "NI"));
  return c;
}

}  // namespace hopgraph
