#include "hopgraph/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace hopgraph {

std::string_view to_string(Domain d) {
  switch (d) {
    case Domain::NI: return "NI";
    case Domain::VF: return "VF";
    case Domain::SP: return "SP";
  }
  return "NI";
}

Domain domain_from_string(std::string_view s) {
  if (s == "NI") return Domain::NI;
  if (s == "VF") return Domain::VF;
  if (s == "SP") return Domain::SP;
  throw UserError("unknown domain '" + std::string(s) + "' (expected NI, VF or SP)");
}

HopBounds default_hop_bounds(Domain d) {
  return d == Domain::SP ? HopBounds{1, 4} : HopBounds{1, 5};
}

const EntityNode* ContentGraph::find(std::string_view id) const {
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

std::size_t ContentGraph::visual_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const EntityNode& n) { return n.is_visual(); }));
}

std::size_t ContentGraph::textual_count() const { return nodes.size() - visual_count(); }

std::vector<std::string> validate_graph(const ContentGraph& g, bool require_textual) {
  std::vector<std::string> problems;
  std::set<std::string> ids;
  std::set<std::string> display_names;
  for (const auto& n : g.nodes) {
    if (n.id.empty()) problems.push_back("node with empty id");
    if (!ids.insert(n.id).second) problems.push_back("duplicate node id " + n.id);
    if (!display_names.insert(n.display_name).second)
      problems.push_back("duplicate display_name " + n.display_name);
    if (n.is_visual()) {
      if (*n.image_index < 0 || *n.image_index >= g.image_count)
        problems.push_back("node " + n.id + " image_index out of range");
      if (n.type_tag) problems.push_back("visual node " + n.id + " carries a type_tag");
    }
  }
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    const std::string where = "edge " + std::to_string(i);
    if (!ids.count(e.subject_id)) problems.push_back(where + " subject " + e.subject_id + " unresolved");
    if (e.object_id && !ids.count(*e.object_id))
      problems.push_back(where + " object " + *e.object_id + " unresolved");
    if (e.figure_label && !e.sentence_indices)
      problems.push_back(where + " has figure_label without sentence_indices");
    if (e.image_tag && (*e.image_tag < 0 || *e.image_tag >= g.image_count))
      problems.push_back(where + " image_tag out of range");
  }
  if (g.domain == Domain::NI && (g.image_count < 1 || g.image_count > 6))
    problems.push_back("NI image_count must be within 1..6");
  if (g.image_count < 1) problems.push_back("image_count must be positive");
  if (g.visual_count() == 0) problems.push_back("graph has no visual node");
  if (require_textual && g.textual_count() == 0) problems.push_back("graph has no textual node");
  return problems;
}

GraphIndex::GraphIndex(const ContentGraph& g) : graph_(&g), adjacency_(g.nodes.size()) {
  for (std::size_t i = 0; i < g.nodes.size(); ++i) ids_.emplace(g.nodes[i].id, i);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& edge = g.edges[e];
    if (edge.is_solo()) continue;
    const std::size_t s = index_of(edge.subject_id);
    const std::size_t o = index_of(*edge.object_id);
    if (s == o) continue;
    adjacency_[s].push_back({e, o});
    adjacency_[o].push_back({e, s});
  }
}

std::size_t GraphIndex::index_of(std::string_view id) const {
  auto it = ids_.find(std::string(id));
  if (it == ids_.end()) throw UserError("unknown node id " + std::string(id));
  return it->second;
}

std::string image_reference(const ContentGraph& g, int image_index) {
  switch (g.domain) {
    case Domain::VF:
      return "Image";
    case Domain::SP:
      for (const auto& e : g.edges) {
        if (e.image_tag == image_index && e.figure_label) return *e.figure_label;
      }
      return "Figure " + std::to_string(image_index + 1);
    case Domain::NI:
      break;
  }
  if (g.image_count <= 1) return "Image";
  return "Image " + std::to_string(image_index + 1);
}

std::string prompt_label(const ContentGraph& g, const EntityNode& node) {
  if (!node.is_visual()) return node.display_name;
  return node.display_name + " (" + image_reference(g, *node.image_index) + ")";
}

namespace {

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Provenance provenance_from_json(const Json& j) {
  return Provenance{j.at("template_id").get<std::string>(), j.at("exchange_id").get<std::string>()};
}

}  // namespace

Json to_json(const Provenance& p) {
  return Json{{"template_id", p.template_id}, {"exchange_id", p.exchange_id}};
}

Json to_json(const EntityNode& n) {
  Json j;
  j["id"] = n.id;
  j["name"] = n.name;
  j["display_name"] = n.display_name;
  if (n.is_visual()) {
    j["origin"] = Json{{"kind", "visual"}, {"image_index", *n.image_index}};
  } else {
    j["origin"] = Json{{"kind", "textual"}};
  }
  j["attributes"] = n.attributes;
  j["type_tag"] = optional_json(n.type_tag);
  if (n.provenance) j["provenance"] = to_json(*n.provenance);
  return j;
}

Json to_json(const RelationEdge& e) {
  Json j;
  j["subject_id"] = e.subject_id;
  j["object_id"] = optional_json(e.object_id);
  j["relation"] = e.relation;
  j["image_tag"] = optional_json(e.image_tag);
  j["figure_label"] = optional_json(e.figure_label);
  j["sentence_indices"] = optional_json(e.sentence_indices);
  if (e.provenance) j["provenance"] = to_json(*e.provenance);
  return j;
}

Json to_json(const ContentGraph& g) {
  Json nodes = Json::array();
  for (const auto& n : g.nodes) nodes.push_back(to_json(n));
  Json edges = Json::array();
  for (const auto& e : g.edges) edges.push_back(to_json(e));
  Json j;
  j["nodes"] = std::move(nodes);
  j["edges"] = std::move(edges);
  j["image_count"] = g.image_count;
  j["domain"] = std::string(to_string(g.domain));
  return j;
}

EntityNode node_from_json(const Json& j) {
  EntityNode n;
  n.id = j.at("id").get<std::string>();
  n.name = j.at("name").get<std::string>();
  n.display_name = j.value("display_name", n.name);
  const Json& origin = j.at("origin");
  const std::string kind = origin.at("kind").get<std::string>();
  if (kind == "visual") {
    n.image_index = origin.at("image_index").get<int>();
  } else if (kind != "textual") {
    throw UserError("node " + n.id + ": unknown origin kind " + kind);
  }
  if (j.contains("attributes")) n.attributes = j.at("attributes").get<std::vector<std::string>>();
  if (j.contains("type_tag") && !j.at("type_tag").is_null())
    n.type_tag = j.at("type_tag").get<std::string>();
  if (j.contains("provenance")) n.provenance = provenance_from_json(j.at("provenance"));
  return n;
}

RelationEdge edge_from_json(const Json& j) {
  RelationEdge e;
  e.subject_id = j.at("subject_id").get<std::string>();
  if (j.contains("object_id") && !j.at("object_id").is_null())
    e.object_id = j.at("object_id").get<std::string>();
  e.relation = j.at("relation").get<std::string>();
  if (j.contains("image_tag") && !j.at("image_tag").is_null()) e.image_tag = j.at("image_tag").get<int>();
  if (j.contains("figure_label") && !j.at("figure_label").is_null())
    e.figure_label = j.at("figure_label").get<std::string>();
  if (j.contains("sentence_indices") && !j.at("sentence_indices").is_null())
    e.sentence_indices = j.at("sentence_indices").get<std::vector<int>>();
  if (j.contains("provenance")) e.provenance = provenance_from_json(j.at("provenance"));
  return e;
}

ContentGraph graph_from_json(const Json& j) {
  ContentGraph g;
  for (const auto& n : j.at("nodes")) g.nodes.push_back(node_from_json(n));
  for (const auto& e : j.at("edges")) g.edges.push_back(edge_from_json(e));
  g.image_count = j.at("image_count").get<int>();
  g.domain = domain_from_string(j.at("domain").get<std::string>());
  return g;
}

}  // namespace hopgraph
