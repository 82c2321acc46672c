#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hopgraph/embeddings.hpp"
#include "hopgraph/graph.hpp"
#include "hopgraph/llm.hpp"

namespace hopgraph {

enum class ParagraphKind { Plain, FigureReferencing };
std::string_view to_string(ParagraphKind k);

struct ParagraphUnit {
  int index = 0;
  std::string text;  // plain text after TeX markup removal
  std::vector<std::string> sentences;
  std::vector<std::string> figure_refs;  // "Figure 4", "Table 2", first-mention order
  ParagraphKind kind = ParagraphKind::Plain;
};

// A float found in the source: its display label and \label keys.
struct TexFloat {
  std::string label;  // "Figure 3" / "Table 1"
  std::vector<std::string> keys;
  std::string caption;
};

struct TexDocument {
  std::vector<ParagraphUnit> paragraphs;
  std::vector<TexFloat> floats;
  std::vector<std::string> diagnostics;  // unresolved \ref keys
};

// Strips comments and the preamble, numbers figure and table environments,
// splits the body on blank lines outside environments (floats are dropped
// from the running text), resolves \ref against float labels and collects
// literal "Figure N" / "Fig. N" / "Table N" mentions.
TexDocument segment_paragraphs(std::string_view tex);

// Removes % comments (an escaped \% is kept).
std::string strip_tex_comments(std::string_view tex);

// Figure manifest: {"figures": [{"label": "Figure 4", "image": "figs/t.png",
// "caption": "..."}]}. Rendered tables are listed the same way.
struct FigureInfo {
  std::string label;
  std::string image;
  std::string caption;
};
std::vector<FigureInfo> parse_figure_manifest(std::string_view text, std::string_view source = "<input>");

struct TextRelation {
  std::string source;
  std::optional<std::string> target;
  std::string description;
  int paragraph = 0;
};

struct VisualRelation {
  std::string source;
  std::optional<std::string> target;
  std::string description;
  std::string figure;
  std::vector<int> idx;  // sentence indices within the paragraph
  int paragraph = 0;
};

template <typename T>
struct Extraction {
  std::vector<T> relations;
  std::vector<std::string> dropped;    // reasons for discarded items
  std::optional<std::string> failure;  // exchange failed after its retry
  std::vector<std::string> exchange_ids;
};

struct PaperOptions {
  std::string model_id = "stub";
  double temperature = kGenerationTemperature;
  double threshold = 0.6;
};

// Entity list for the whole paper (dedicated inventory prompt); duplicates
// are dropped case-insensitively.
Extraction<std::string> extract_entity_inventory(const std::vector<ParagraphUnit>& paragraphs, Gateway& gateway,
                                                 const PaperOptions& options, std::string_view key);

// Text-grounded relations of one paragraph, closed world over `entities`.
Extraction<TextRelation> extract_text_relations(const ParagraphUnit& paragraph,
                                                const std::vector<std::string>& entities, Gateway& gateway,
                                                const PaperOptions& options, std::string_view key);

// Figure-grounded relations of a figure-referencing paragraph. Relations
// with a null or unknown figure, empty or out-of-range idx, or entities
// outside the list are dropped.
Extraction<VisualRelation> extract_visual_relations(const ParagraphUnit& paragraph,
                                                    const std::vector<std::string>& entities,
                                                    const std::vector<FigureInfo>& figures, Gateway& gateway,
                                                    const PaperOptions& options, std::string_view key);

struct SentenceFilterResult {
  std::string text;  // retained sentences joined by single spaces
  std::vector<int> retained;
  std::vector<int> removed;
  std::vector<double> max_similarity;  // per sentence, empty for Plain paragraphs
};

// Drops every sentence whose highest cosine against the relation
// descriptions reaches `threshold`. Plain paragraphs come back unchanged
// without embedding calls; so do paragraphs when `relations` is empty.
SentenceFilterResult filter_sentences(const ParagraphUnit& paragraph, const std::vector<VisualRelation>& relations,
                                      Embedder& embedder, double threshold);

struct PaperGraph {
  ContentGraph graph;
  std::vector<FigureInfo> images;  // figures used, in image-index order
};

// Entities in a visual relation become visual nodes anchored to the figure
// of their first such relation; the rest are textual. Figures carrying at
// least one visual relation become the images, in manifest order. Returns
// nullopt when there is no visual relation. Throws UserError for an entity
// missing from the inventory or a figure missing from the manifest.
std::optional<PaperGraph> build_paper_graph(const std::vector<TextRelation>& text_relations,
                                            const std::vector<VisualRelation>& visual_relations,
                                            const std::vector<FigureInfo>& figures,
                                            const std::vector<std::string>& entities);

}  // namespace hopgraph
