#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/graph.hpp"
#include "hopgraph/llm.hpp"
#include "hopgraph/rng.hpp"

namespace hopgraph {

// The six text-node category prompts.
const std::vector<std::string>& text_node_templates();

// "type (name)" with non-empty type and name.
bool is_typed_entity(std::string_view s);
// "Liora Vex" for "artisan (Liora Vex)"; the input itself when untyped.
std::string parenthetical_name(std::string_view display_name);
// "artisan" for "artisan (Liora Vex)"; empty when untyped.
std::string type_word(std::string_view display_name);

// Rejection reason for a node-creating triple, nullopt when acceptable.
std::optional<std::string> validate_node_triple(const Json& triple, const EntityNode& queried);

// "a <attr> <name> <relation> <neighbor>" phrases rendered from the graph.
std::string compose_image_caption(const ContentGraph& g, int image_index);
std::string compose_object_caption(const ContentGraph& g, const EntityNode& node);

struct AugmentOptions {
  int max_nodes_per_image = 4;
  int min_categories = 1;
  int max_categories = 2;
  std::string model_id = "stub";
  double temperature = kGenerationTemperature;
};

struct AugmentReport {
  int nodes_added = 0;
  int edges_added = 0;
  std::vector<std::string> rejections;  // "<template>: <reason>"
  std::vector<std::string> exchange_ids;
};

// Adds textual entities anchored to selected visual nodes. Up to
// `max_nodes_per_image` visual nodes per image are drawn, each queried with
// 1-2 category prompts. Captions default to ones composed from the graph.
ContentGraph generate_text_nodes(const ContentGraph& g, Gateway& gateway, Rng& rng,
                                 const AugmentOptions& options, AugmentReport& report,
                                 std::string_view sample_key,
                                 const std::map<int, std::string>& image_captions = {});

// Adds relations among the textual entities (closed world over their
// display names, no self loops, duplicates dropped).
ContentGraph generate_text_edges(const ContentGraph& g, Gateway& gateway, const AugmentOptions& options,
                                 AugmentReport& report, std::string_view sample_key);

}  // namespace hopgraph
