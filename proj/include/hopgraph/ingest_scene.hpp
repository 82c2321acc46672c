#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/common.hpp"
#include "hopgraph/rng.hpp"
#include "hopgraph/scene_graph.hpp"

namespace hopgraph {

// Scene-graph input format (GQA-compatible subset):
//   { "<image_id>": { "objects": { "<object_id>": {
//       "name": str, "attributes": [str],
//       "relations": [ {"name": str, "object": "<object_id>"} ] } } } }
// Other keys (width, height, bounding boxes) are ignored.
struct RawRelation {
  std::string relation;
  std::string target_object_id;
  bool operator==(const RawRelation&) const = default;
};

struct RawObject {
  std::string id;
  std::string name;
  std::vector<std::string> attributes;
  std::vector<RawRelation> relations;
  bool operator==(const RawObject&) const = default;
};

struct RawSceneGraph {
  std::string image_id;
  std::vector<RawObject> objects;  // file order
  bool operator==(const RawSceneGraph&) const = default;
};

struct SceneParseResult {
  std::vector<RawSceneGraph> scenes;
  // "<image_id>: relation target <object_id> of <object_id> does not resolve"
  std::vector<std::string> diagnostics;
};

// Throws UserError (naming `source`) on malformed JSON or schema violations.
SceneParseResult parse_scene_json(std::string_view text, std::string_view source = "<input>");
SceneParseResult parse_scene_file(const std::string& path);

Json to_json(const std::vector<RawSceneGraph>& scenes);

// Per-image scene graph; relations whose target does not resolve are dropped.
SceneGraph to_scene_graph(const RawSceneGraph& raw);

// `count` sets of distinct catalog indices. Set sizes are uniform over
// [min_size, min(max_size, catalog_size)]. Throws UserError when the catalog
// is smaller than `min_size` or empty.
std::vector<std::vector<std::size_t>> sample_image_sets(std::size_t catalog_size, Rng& rng, std::size_t count,
                                                        int min_size = 1, int max_size = 6);

}  // namespace hopgraph
