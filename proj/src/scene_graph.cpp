#include "hopgraph/scene_graph.hpp"

#include <set>
#include <unordered_map>
#include <unordered_set>

namespace hopgraph {

std::vector<std::string> validate_scene(const SceneGraph& scene) {
  std::vector<std::string> problems;
  std::unordered_set<std::string> ids;
  for (const auto& o : scene.objects) {
    if (!ids.insert(o.id).second) problems.push_back("duplicate object id " + o.id);
  }
  for (const auto& r : scene.relations) {
    if (!ids.count(r.subject_id))
      problems.push_back("relation subject " + r.subject_id + " does not resolve");
    if (!ids.count(r.object_id))
      problems.push_back("relation target " + r.object_id + " does not resolve");
  }
  return problems;
}

namespace {

// Feature of an object used to tell same-name objects apart.
struct Feature {
  std::string kind;  // "attr", "out", "in"
  std::string relation;
  std::string value;  // attribute value or neighbor name
  auto operator<=>(const Feature&) const = default;
};

std::string describe(const Feature& f) {
  if (f.kind == "attr") return f.value;
  if (f.kind == "out") return f.relation + " " + f.value;
  return f.value + " " + f.relation;
}

}  // namespace

UniqueEntityResult filter_unique_entities(const SceneGraph& scene) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) index.emplace(scene.objects[i].id, i);

  std::unordered_map<std::string, std::vector<std::size_t>> by_name;
  for (std::size_t i = 0; i < scene.objects.size(); ++i) by_name[scene.objects[i].name].push_back(i);

  const std::size_t n = scene.objects.size();
  // Features a sibling holds over the full annotation.
  std::vector<std::set<Feature>> all_features(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& a : scene.objects[i].attributes) all_features[i].insert({"attr", "", a});
  }
  for (const auto& r : scene.relations) {
    auto s = index.find(r.subject_id);
    auto o = index.find(r.object_id);
    if (s == index.end() || o == index.end() || s->second == o->second) continue;
    all_features[s->second].insert({"out", r.relation, scene.objects[o->second].name});
    all_features[o->second].insert({"in", r.relation, scene.objects[s->second].name});
  }

  std::vector<bool> retained(n, true);
  std::vector<std::string> discriminator(n);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (!retained[i]) continue;
      const auto& siblings = by_name[scene.objects[i].name];
      if (siblings.size() == 1) continue;

      // own features, with relation pairs restricted to retained neighbors
      std::vector<Feature> own;
      for (const auto& a : scene.objects[i].attributes) own.push_back({"attr", "", a});
      for (const auto& r : scene.relations) {
        auto s = index.find(r.subject_id);
        auto o = index.find(r.object_id);
        if (s == index.end() || o == index.end() || s->second == o->second) continue;
        if (s->second == i && retained[o->second])
          own.push_back({"out", r.relation, scene.objects[o->second].name});
        if (o->second == i && retained[s->second])
          own.push_back({"in", r.relation, scene.objects[s->second].name});
      }

      bool found = false;
      for (const auto& f : own) {
        bool held_elsewhere = false;
        for (std::size_t sib : siblings) {
          if (sib != i && all_features[sib].count(f)) {
            held_elsewhere = true;
            break;
          }
        }
        if (!held_elsewhere) {
          discriminator[i] = describe(f);
          found = true;
          break;
        }
      }
      if (!found) {
        retained[i] = false;
        changed = true;
      }
    }
  }

  UniqueEntityResult result;
  result.scene.image_id = scene.image_id;
  for (std::size_t i = 0; i < n; ++i) {
    if (!retained[i]) continue;
    result.scene.objects.push_back(scene.objects[i]);
    if (by_name[scene.objects[i].name].size() > 1)
      result.discriminators.emplace(scene.objects[i].id, discriminator[i]);
  }
  for (const auto& r : scene.relations) {
    auto s = index.find(r.subject_id);
    auto o = index.find(r.object_id);
    if (s == index.end() || o == index.end()) continue;
    if (retained[s->second] && retained[o->second]) result.scene.relations.push_back(r);
  }
  return result;
}

ContentGraph merge_scene_graphs(std::span<const SceneGraph> scenes, Domain domain, int max_images) {
  if (scenes.empty()) throw UserError("merge_scene_graphs: no scene graphs given");
  if (static_cast<int>(scenes.size()) > max_images)
    throw UserError("merge_scene_graphs: at most " + std::to_string(max_images) + " images per sample");
  for (const auto& s : scenes) {
    auto problems = validate_scene(s);
    if (!problems.empty())
      throw UserError("scene " + s.image_id + ": " + problems.front());
  }

  std::unordered_map<std::string, int> name_totals;
  for (const auto& s : scenes)
    for (const auto& o : s.objects) ++name_totals[o.name];

  ContentGraph g;
  g.domain = domain;
  g.image_count = static_cast<int>(scenes.size());
  std::unordered_map<std::string, int> next_subscript;
  std::unordered_set<std::string> used_display;
  for (const auto& s : scenes)
    for (const auto& o : s.objects)
      if (name_totals[o.name] == 1) used_display.insert(o.name);

  for (std::size_t img = 0; img < scenes.size(); ++img) {
    for (const auto& o : scenes[img].objects) {
      EntityNode node;
      node.id = "img" + std::to_string(img) + "/" + o.id;
      node.name = o.name;
      node.image_index = static_cast<int>(img);
      node.attributes = o.attributes;
      if (name_totals[o.name] == 1) {
        node.display_name = o.name;
      } else {
        std::string candidate;
        do {
          candidate = o.name + "_" + std::to_string(++next_subscript[o.name]);
        } while (used_display.count(candidate));
        node.display_name = candidate;
      }
      used_display.insert(node.display_name);
      g.nodes.push_back(std::move(node));
    }
    for (const auto& r : scenes[img].relations) {
      RelationEdge e;
      e.subject_id = "img" + std::to_string(img) + "/" + r.subject_id;
      e.object_id = "img" + std::to_string(img) + "/" + r.object_id;
      e.relation = r.relation;
      e.image_tag = static_cast<int>(img);
      g.edges.push_back(std::move(e));
    }
  }
  return g;
}

}  // namespace hopgraph
