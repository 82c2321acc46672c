#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "hopgraph/graph.hpp"

namespace hopgraph {

struct SceneObject {
  std::string id;
  std::string name;
  std::vector<std::string> attributes;
  bool operator==(const SceneObject&) const = default;
};

struct SceneRelation {
  std::string subject_id;
  std::string object_id;
  std::string relation;
  bool operator==(const SceneRelation&) const = default;
};

// One image's annotation: objects, their attributes and pairwise relations.
struct SceneGraph {
  std::string image_id;
  std::vector<SceneObject> objects;
  std::vector<SceneRelation> relations;
  bool operator==(const SceneGraph&) const = default;
};

std::vector<std::string> validate_scene(const SceneGraph& scene);

struct UniqueEntityResult {
  SceneGraph scene;
  // object id -> the attribute value or relation phrase that tells a retained
  // duplicate apart from its same-name siblings
  std::map<std::string, std::string> discriminators;
};

// Keeps objects that can be singled out: every name-unique object, and each
// duplicated-name object holding an attribute value or a (relation,
// neighbor-name) pair that no same-name sibling holds. Relation pairs only
// count when the neighbor itself is retained, so the rule is applied until
// the retained set stops shrinking. Dropped objects take their incident
// relations with them.
UniqueEntityResult filter_unique_entities(const SceneGraph& scene);

// Merges per-image scene graphs into one content graph. Image indices follow
// input order; names that occur more than once across the whole input get
// numeric subscripts (apple_1, apple_2) in first-seen order. Node ids are
// "img<k>/<object id>". Every edge keeps its image as image_tag.
// Throws UserError on an empty list, more than `max_images` inputs, or a
// relation endpoint that does not resolve within its image.
ContentGraph merge_scene_graphs(std::span<const SceneGraph> scenes, Domain domain = Domain::NI,
                                int max_images = 6);

}  // namespace hopgraph
