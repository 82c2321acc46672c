#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hopgraph/graph.hpp"
#include "hopgraph/rng.hpp"

namespace hopgraph {

// Node/edge selection over a ContentGraph used to prompt the narrative for
// one image (or the whole frame set for video samples). Visual attributes are
// never part of the view.
struct ContextSubgraph {
  std::optional<int> image_index;  // empty for whole-set views
  std::vector<std::string> node_ids;
  std::vector<std::size_t> edge_indices;
};

// edge index -> image the edge is narrated with
using EdgeAssignment = std::map<std::size_t, int>;

// Images a textual node is attached to through a direct edge to a visual node.
std::set<int> attached_images(const ContentGraph& g, const std::string& node_id);

// Text-text edges whose endpoints attach to disjoint image sets. Each one
// must be assigned to a single image before extraction.
std::vector<std::size_t> cross_image_text_edges(const ContentGraph& g);

// Uniform choice among the images the two endpoints attach to.
EdgeAssignment assign_cross_image_edges(const ContentGraph& g, Rng& rng);

// Image view: the image's visual nodes, textual nodes directly connected to
// them, the visual-text edges between those, text-text edges among the
// textual nodes that share the image, and every cross-image edge assigned to
// this image together with its foreign endpoint and that endpoint's own
// image-connection edges (plus the visual nodes they reach). Visual-visual
// relations are left out. Throws UserError when a cross-image edge touching
// this image has no assignment.
ContextSubgraph extract_context_subgraph(const ContentGraph& g, int image_index,
                                         const EdgeAssignment& assignment);

// Whole-set view for video samples: every node and every edge except
// visual-visual relations and solo actions.
ContextSubgraph extract_whole_context(const ContentGraph& g);

}  // namespace hopgraph
