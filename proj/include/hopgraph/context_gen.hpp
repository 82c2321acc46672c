#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/context_subgraph.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/llm.hpp"
#include "hopgraph/rng.hpp"

namespace hopgraph {

// The twelve narrative styles, in a fixed order.
const std::vector<std::string>& context_styles();
const std::string& pick_style(Rng& rng);

struct ContextViolation {
  std::string kind;  // "missing_entity" or "missing_image_reference"
  std::string node_id;
  std::string detail;
  bool operator==(const ContextViolation&) const = default;
};

// Prompt bindings for a view: one entity label per line and one
// "(subject, relation, object)" line per edge.
std::string context_entity_lines(const ContentGraph& g, const ContextSubgraph& view);
std::string context_relation_lines(const ContentGraph& g, const ContextSubgraph& view);

// Entities of the view that must surface in the text (a) by name, or by
// parenthetical name for typed entities, and (b) for visual entities, with
// their image reference ("image 2", "the image", "Figure 4") in the same
// sentence. Matching is case-insensitive on word boundaries.
std::vector<ContextViolation> verify_context(std::string_view text, const ContentGraph& g,
                                             const ContextSubgraph& view);

// Color and size words checked by attribute_leaks.
const std::set<std::string>& leak_vocabulary();

// "<attribute> <name>" bigrams of visual nodes found verbatim in the text,
// for attributes in the color/size vocabulary.
std::vector<std::string> attribute_leaks(std::string_view text, const ContentGraph& g);

struct ContextOptions {
  std::string model_id = "stub";
  double temperature = kGenerationTemperature;
};

struct ContextResult {
  std::optional<std::string> text;  // empty when both attempts failed
  std::string style;
  std::vector<ContextViolation> violations;  // of the last attempt
  std::vector<std::string> leaks;             // of the last attempt
  std::vector<std::string> exchange_ids;
};

// One generation plus at most one regeneration on verification failure.
// Throws UserError when the view has no edge to narrate.
ContextResult generate_context(const ContentGraph& g, const ContextSubgraph& view, const std::string& style,
                               Gateway& gateway, const ContextOptions& options, std::string_view key);

}  // namespace hopgraph
