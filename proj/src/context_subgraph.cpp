#include "hopgraph/context_subgraph.hpp"

#include <algorithm>
#include <unordered_map>

namespace hopgraph {

namespace {

struct Lookup {
  std::unordered_map<std::string, const EntityNode*> nodes;
  explicit Lookup(const ContentGraph& g) {
    for (const auto& n : g.nodes) nodes.emplace(n.id, &n);
  }
  const EntityNode& at(const std::string& id) const {
    auto it = nodes.find(id);
    if (it == nodes.end()) throw UserError("unknown node id " + id);
    return *it->second;
  }
};

std::unordered_map<std::string, std::set<int>> attachment_map(const ContentGraph& g, const Lookup& lk) {
  std::unordered_map<std::string, std::set<int>> out;
  for (const auto& e : g.edges) {
    if (e.is_solo()) continue;
    const auto& s = lk.at(e.subject_id);
    const auto& o = lk.at(*e.object_id);
    if (s.is_visual() && !o.is_visual()) out[o.id].insert(*s.image_index);
    if (o.is_visual() && !s.is_visual()) out[s.id].insert(*o.image_index);
  }
  return out;
}

bool is_cross_image(const std::set<int>& a, const std::set<int>& b) {
  if (a.empty() && b.empty()) return false;
  return std::none_of(a.begin(), a.end(), [&](int i) { return b.count(i) > 0; });
}

}  // namespace

std::set<int> attached_images(const ContentGraph& g, const std::string& node_id) {
  Lookup lk(g);
  auto m = attachment_map(g, lk);
  auto it = m.find(node_id);
  return it == m.end() ? std::set<int>{} : it->second;
}

std::vector<std::size_t> cross_image_text_edges(const ContentGraph& g) {
  Lookup lk(g);
  auto attach = attachment_map(g, lk);
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (e.is_solo()) continue;
    const auto& s = lk.at(e.subject_id);
    const auto& o = lk.at(*e.object_id);
    if (s.is_visual() || o.is_visual()) continue;
    if (is_cross_image(attach[s.id], attach[o.id])) out.push_back(i);
  }
  return out;
}

EdgeAssignment assign_cross_image_edges(const ContentGraph& g, Rng& rng) {
  Lookup lk(g);
  auto attach = attachment_map(g, lk);
  EdgeAssignment out;
  for (std::size_t idx : cross_image_text_edges(g)) {
    const auto& e = g.edges[idx];
    std::set<int> images = attach[e.subject_id];
    images.insert(attach[*e.object_id].begin(), attach[*e.object_id].end());
    std::vector<int> choices(images.begin(), images.end());
    out.emplace(idx, choices[rng.uniform_index(choices.size())]);
  }
  return out;
}

ContextSubgraph extract_context_subgraph(const ContentGraph& g, int image_index,
                                         const EdgeAssignment& assignment) {
  if (image_index < 0 || image_index >= g.image_count)
    throw UserError("extract_context_subgraph: image index out of range");
  Lookup lk(g);
  auto attach = attachment_map(g, lk);
  auto attached_here = [&](const std::string& id) { return attach[id].count(image_index) > 0; };

  std::set<std::string> nodes;
  std::set<std::size_t> edges;
  for (const auto& n : g.nodes) {
    if (n.is_visual() ? *n.image_index == image_index : attached_here(n.id)) nodes.insert(n.id);
  }

  auto add_foreign = [&](const std::string& id) {
    nodes.insert(id);
    for (std::size_t i = 0; i < g.edges.size(); ++i) {
      const auto& e = g.edges[i];
      if (e.is_solo()) continue;
      const std::string* other = nullptr;
      if (e.subject_id == id) other = &*e.object_id;
      else if (*e.object_id == id) other = &e.subject_id;
      if (other && lk.at(*other).is_visual()) {
        edges.insert(i);
        nodes.insert(*other);
      }
    }
  };

  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (e.is_solo()) continue;
    const auto& s = lk.at(e.subject_id);
    const auto& o = lk.at(*e.object_id);
    if (s.is_visual() && o.is_visual()) continue;
    if (s.is_visual() != o.is_visual()) {
      const auto& v = s.is_visual() ? s : o;
      if (*v.image_index == image_index) edges.insert(i);
      continue;
    }
    const auto& as = attach[s.id];
    const auto& ao = attach[o.id];
    if (!is_cross_image(as, ao)) {
      if (as.count(image_index) && ao.count(image_index)) edges.insert(i);
      continue;
    }
    const bool touches = as.count(image_index) || ao.count(image_index);
    auto it = assignment.find(i);
    if (it == assignment.end()) {
      if (touches)
        throw UserError("cross-image edge " + std::to_string(i) + " has no image assignment");
      continue;
    }
    if (it->second != image_index) continue;
    edges.insert(i);
    if (!as.count(image_index)) add_foreign(s.id);
    if (!ao.count(image_index)) add_foreign(o.id);
  }

  ContextSubgraph view;
  view.image_index = image_index;
  for (const auto& n : g.nodes)
    if (nodes.count(n.id)) view.node_ids.push_back(n.id);
  view.edge_indices.assign(edges.begin(), edges.end());
  return view;
}

ContextSubgraph extract_whole_context(const ContentGraph& g) {
  Lookup lk(g);
  ContextSubgraph view;
  for (const auto& n : g.nodes) view.node_ids.push_back(n.id);
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    const auto& e = g.edges[i];
    if (e.is_solo()) continue;
    if (lk.at(e.subject_id).is_visual() && lk.at(*e.object_id).is_visual()) continue;
    view.edge_indices.push_back(i);
  }
  return view;
}

}  // namespace hopgraph
