#include "hopgraph/context_gen.hpp"

#include <set>

#include "hopgraph/augment.hpp"
#include "hopgraph/text.hpp"

namespace hopgraph {

const std::vector<std::string>& context_styles() {
  static const std::vector<std::string> styles = {
      "Story/Narrative",   "Newspaper Article",   "Comedy Sketch",      "Diary Entry",
      "Poem",              "Song Lyrics",         "Documentary Script", "Blog Post",
      "Motivational Speech", "Promotional Article", "Movie Scene Description", "Social Media Post",
  };
  return styles;
}

const std::string& pick_style(Rng& rng) { return context_styles()[rng.uniform_index(context_styles().size())]; }

namespace {

std::vector<const EntityNode*> view_nodes(const ContentGraph& g, const ContextSubgraph& view) {
  std::vector<const EntityNode*> out;
  for (const auto& id : view.node_ids) {
    const EntityNode* n = g.find(id);
    if (!n) throw UserError("context view references unknown node " + id);
    out.push_back(n);
  }
  return out;
}

// Names under which an entity may appear in running text.
std::vector<std::string> mention_forms(const EntityNode& n) {
  if (!n.is_visual() && is_typed_entity(n.display_name))
    return {n.display_name, parenthetical_name(n.display_name)};
  return {n.name};
}

bool mentions(std::string_view text, const EntityNode& n) {
  for (const auto& form : mention_forms(n))
    if (contains_phrase(text, form)) return true;
  return false;
}

}  // namespace

std::string context_entity_lines(const ContentGraph& g, const ContextSubgraph& view) {
  std::vector<std::string> lines;
  for (const EntityNode* n : view_nodes(g, view)) lines.push_back("- " + prompt_label(g, *n));
  return join(lines, "\n");
}

std::string context_relation_lines(const ContentGraph& g, const ContextSubgraph& view) {
  std::vector<std::string> lines;
  for (std::size_t i : view.edge_indices) {
    const auto& e = g.edges.at(i);
    const EntityNode* s = g.find(e.subject_id);
    std::string line = "- (" + prompt_label(g, *s) + ", " + e.relation;
    if (!e.is_solo()) line += ", " + prompt_label(g, *g.find(*e.object_id));
    lines.push_back(line + ")");
  }
  return join(lines, "\n");
}

std::vector<ContextViolation> verify_context(std::string_view text, const ContentGraph& g,
                                             const ContextSubgraph& view) {
  std::vector<ContextViolation> out;
  const auto sentences = split_sentences(text);
  for (const EntityNode* n : view_nodes(g, view)) {
    if (!mentions(text, *n)) {
      out.push_back({"missing_entity", n->id, n->display_name + " does not appear in the text"});
      continue;
    }
    if (!n->is_visual()) continue;
    const std::string ref = image_reference(g, *n->image_index);
    bool tied = false;
    for (const auto& s : sentences) {
      if (mentions(s, *n) && contains_phrase(s, ref)) {
        tied = true;
        break;
      }
    }
    if (!tied)
      out.push_back({"missing_image_reference", n->id,
                     n->display_name + " is never mentioned together with \"" + to_lower(ref) + "\""});
  }
  return out;
}

const std::set<std::string>& leak_vocabulary() {
  static const std::set<std::string> words = {
      "black", "white",  "red",   "green", "blue",   "yellow", "orange", "purple", "pink",
      "brown", "gray",   "grey",  "silver", "gold",  "golden", "beige",  "tan",    "dark",
      "light", "large",  "small", "big",   "little", "tiny",   "huge",   "tall",   "short",
      "long",  "wide",   "narrow", "thin", "thick",
  };
  return words;
}

std::vector<std::string> attribute_leaks(std::string_view text, const ContentGraph& g) {
  std::vector<std::string> out;
  for (const auto& n : g.nodes) {
    if (!n.is_visual()) continue;
    for (const auto& a : n.attributes) {
      if (!leak_vocabulary().count(to_lower(a))) continue;
      const std::string bigram = a + " " + n.name;
      if (contains_phrase(text, bigram)) out.push_back(bigram);
    }
  }
  return out;
}

ContextResult generate_context(const ContentGraph& g, const ContextSubgraph& view, const std::string& style,
                               Gateway& gateway, const ContextOptions& options, std::string_view key) {
  if (view.edge_indices.empty()) throw UserError("context view has no relation to narrate");
  if (std::find(context_styles().begin(), context_styles().end(), style) == context_styles().end())
    throw UserError("unknown context style '" + style + "'");

  Json entities = Json::array();
  for (const EntityNode* n : view_nodes(g, view)) {
    Json e{{"id", n->id}, {"label", prompt_label(g, *n)}, {"mention", mention_forms(*n).back()}};
    e["image_ref"] = n->is_visual() ? Json(image_reference(g, *n->image_index)) : Json(nullptr);
    entities.push_back(std::move(e));
  }
  Json relations = Json::array();
  for (std::size_t i : view.edge_indices) {
    const auto& e = g.edges[i];
    relations.push_back(Json{{"subject_id", e.subject_id},
                             {"relation", e.relation},
                             {"object_id", e.object_id ? Json(*e.object_id) : Json(nullptr)}});
  }
  const Json hints{{"style", style}, {"entities", entities}, {"relations", relations}};
  const Bindings bindings{{"context_type", style},
                          {"entities", context_entity_lines(g, view)},
                          {"relations", context_relation_lines(g, view)}};

  ContextResult result;
  result.style = style;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto x = gateway.run("context_generation", bindings, options.model_id, {options.temperature, 2048}, hints,
                         std::string(key) + "/context/" + std::to_string(attempt));
    result.exchange_ids.push_back(x.exchange_id);
    if (!x.ok()) continue;
    const std::string text = x.parsed_payload->get<std::string>();
    result.violations = verify_context(text, g, view);
    result.leaks = attribute_leaks(text, g);
    if (result.violations.empty() && result.leaks.empty()) {
      result.text = text;
      break;
    }
  }
  return result;
}

}  // namespace hopgraph
