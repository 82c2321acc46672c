#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hopgraph/common.hpp"

namespace hopgraph {

enum class Domain { NI, VF, SP };

std::string_view to_string(Domain d);
Domain domain_from_string(std::string_view s);

// Inclusive hop bounds per domain: 1..5 for natural images and video frames,
// 1..4 for scientific papers.
struct HopBounds {
  int min_hops = 1;
  int max_hops = 5;
};
HopBounds default_hop_bounds(Domain d);

// Where an augmented node or edge came from.
struct Provenance {
  std::string template_id;
  std::string exchange_id;
  bool operator==(const Provenance&) const = default;
};

struct EntityNode {
  std::string id;
  std::string name;
  std::string display_name;
  // Set for visual (image-anchored) entities, empty for textual ones.
  std::optional<int> image_index;
  std::vector<std::string> attributes;
  // Category of a textual entity in "type (name)" form, e.g. "artisan".
  std::optional<std::string> type_tag;
  std::optional<Provenance> provenance;

  bool is_visual() const { return image_index.has_value(); }
  bool operator==(const EntityNode&) const = default;
};

struct RelationEdge {
  std::string subject_id;
  // Empty for a solo action (video domain: "a dog runs").
  std::optional<std::string> object_id;
  std::string relation;
  std::optional<int> image_tag;
  std::optional<std::string> figure_label;
  std::optional<std::vector<int>> sentence_indices;
  std::optional<Provenance> provenance;

  bool is_solo() const { return !object_id.has_value(); }
  bool operator==(const RelationEdge&) const = default;
};

struct ContentGraph {
  std::vector<EntityNode> nodes;
  std::vector<RelationEdge> edges;
  int image_count = 0;
  Domain domain = Domain::NI;

  const EntityNode* find(std::string_view id) const;
  std::size_t visual_count() const;
  std::size_t textual_count() const;

  bool operator==(const ContentGraph&) const = default;
};

// Problems found by structural validation, empty when the graph is sound.
// `require_textual` enables the post-augmentation "at least one textual
// node" rule.
std::vector<std::string> validate_graph(const ContentGraph& g, bool require_textual = false);

// Adjacency view for traversal; edge direction is ignored.
class GraphIndex {
 public:
  struct Incidence {
    std::size_t edge;
    std::size_t other;
  };

  explicit GraphIndex(const ContentGraph& g);

  std::size_t index_of(std::string_view id) const;  // throws if absent
  const std::vector<Incidence>& incident(std::size_t node) const { return adjacency_[node]; }
  const ContentGraph& graph() const { return *graph_; }

 private:
  const ContentGraph* graph_;
  std::unordered_map<std::string, std::size_t> ids_;
  std::vector<std::vector<Incidence>> adjacency_;
};

// How an image is referred to in prompts and narratives: "Image" for video
// frame sets and single-image samples, "Image N" (1-based) for multi-image
// samples, and the figure/table label ("Figure 4") for paper graphs.
std::string image_reference(const ContentGraph& g, int image_index);

// "<display_name> (<image reference>)" for visual nodes, the display name for
// textual ones.
std::string prompt_label(const ContentGraph& g, const EntityNode& node);

// Interchange serialization (keys exactly as the field names above).
Json to_json(const EntityNode& n);
Json to_json(const RelationEdge& e);
Json to_json(const ContentGraph& g);
Json to_json(const Provenance& p);
EntityNode node_from_json(const Json& j);
RelationEdge edge_from_json(const Json& j);
ContentGraph graph_from_json(const Json& j);

}  // namespace hopgraph
