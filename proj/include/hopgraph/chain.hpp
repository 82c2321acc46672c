#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hopgraph/graph.hpp"
#include "hopgraph/rng.hpp"

namespace hopgraph {

enum class AnswerKind { EntityName, Attribute };

// An ordered path of h edges ending at a visual node; the fact chain behind
// one question. Edge direction is not constrained: a path may traverse an
// edge from object to subject.
struct ChainSubgraph {
  std::vector<std::size_t> edge_indices;  // into the source graph's edges
  std::vector<RelationEdge> edges;        // copies, same order
  std::vector<std::string> node_path;     // h + 1 ids; back() is the terminal
  std::vector<EntityNode> nodes;          // snapshots matching node_path
  std::string answer_node_id;
  AnswerKind answer_kind = AnswerKind::EntityName;
  // Attribute value once chosen (select_answer); empty for entity-name answers.
  std::string answer_value;
  int hop_count = 0;
  Domain domain = Domain::NI;

  const EntityNode& terminal() const { return nodes.back(); }
  // Nodes strictly between the first and the terminal node.
  std::vector<const EntityNode*> interior_nodes() const;
};

// Structural check of a chain on its own (path shape, visual terminal, both
// modalities, hop bounds, h=1 attribute rule). Empty when valid.
std::vector<std::string> validate_chain(const ChainSubgraph& chain, HopBounds bounds);

// Same, plus agreement with the source graph (edges and node snapshots).
std::vector<std::string> validate_chain(const ChainSubgraph& chain, const ContentGraph& g,
                                        HopBounds bounds);

struct ChainSamplingOptions {
  double attribute_answer_probability = 0.5;
  int max_attempts = 200;
  std::optional<HopBounds> bounds;  // defaults to the graph's domain bounds
};

// Rejection sampling of a random simple path: pick an eligible visual
// terminal uniformly, walk h edges backward to unvisited nodes, accept when
// the node set contains both modalities. Returns nullopt after
// `max_attempts` rejections. Throws UserError when h is out of bounds.
std::optional<ChainSubgraph> sample_chain(const ContentGraph& g, int h, Rng& rng,
                                          const ChainSamplingOptions& options = {});
std::optional<ChainSubgraph> sample_chain(const ContentGraph& g, int h, std::uint64_t seed,
                                          const ChainSamplingOptions& options = {});

// Every valid chain of h edges, each answer kind listed separately, sorted by
// (edge indices, node path, answer kind). Throws UserError when the graph has
// more than `node_limit` nodes.
std::vector<ChainSubgraph> enumerate_chains(const ContentGraph& g, int h, std::size_t node_limit = 12);

// Key identifying a chain up to the chosen attribute value.
std::string chain_key(const ChainSubgraph& chain);

Json to_json(const ChainSubgraph& chain);
ChainSubgraph chain_from_json(const Json& j);

std::string_view to_string(AnswerKind k);

}  // namespace hopgraph
