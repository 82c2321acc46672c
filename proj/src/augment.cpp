#include "hopgraph/augment.hpp"

#include <set>
#include <tuple>

#include "hopgraph/text.hpp"

namespace hopgraph {

const std::vector<std::string>& text_node_templates() {
  static const std::vector<std::string> ids = {
      "text_node_authorship", "text_node_human_involvement", "text_node_temporal",
      "text_node_ownership",  "text_node_location",          "text_node_purpose",
  };
  return ids;
}

bool is_typed_entity(std::string_view s) {
  const std::string t = trim(s);
  const auto open = t.find(" (");
  if (open == std::string::npos || open == 0 || t.size() < open + 4 || t.back() != ')') return false;
  const std::string name = trim(std::string_view(t).substr(open + 2, t.size() - open - 3));
  return !name.empty() && name.find_first_of("()") == std::string::npos &&
         trim(t.substr(0, open)).size() == open;
}

std::string parenthetical_name(std::string_view display_name) {
  if (!is_typed_entity(display_name)) return std::string(display_name);
  const std::string t = trim(display_name);
  const auto open = t.find(" (");
  return trim(std::string_view(t).substr(open + 2, t.size() - open - 3));
}

std::string type_word(std::string_view display_name) {
  if (!is_typed_entity(display_name)) return "";
  const std::string t = trim(display_name);
  return t.substr(0, t.find(" ("));
}

std::optional<std::string> validate_node_triple(const Json& triple, const EntityNode& queried) {
  for (const char* key : {"subject", "relation", "object"}) {
    if (!triple.contains(key) || !triple[key].is_string() || trim(triple[key].get<std::string>()).empty())
      return std::string("missing field ") + key;
  }
  const std::string subject = to_lower(trim(triple["subject"].get<std::string>()));
  if (subject != to_lower(queried.name) && subject != to_lower(queried.display_name))
    return "subject '" + triple["subject"].get<std::string>() + "' is not the queried entity '" + queried.name + "'";
  if (!is_typed_entity(triple["object"].get<std::string>()))
    return "object '" + triple["object"].get<std::string>() + "' is not in 'type (name)' form";
  return std::nullopt;
}

namespace {

std::string with_article(const EntityNode& n, bool all_attributes) {
  std::string phrase = "a ";
  if (!n.attributes.empty()) phrase += (all_attributes ? join(n.attributes, " ") : n.attributes.front()) + " ";
  return phrase + n.name;
}

}  // namespace

std::string compose_image_caption(const ContentGraph& g, int image_index) {
  std::vector<std::string> parts;
  for (const auto& e : g.edges) {
    if (parts.size() == 4) break;
    if (e.is_solo() || e.image_tag != image_index) continue;
    const EntityNode* s = g.find(e.subject_id);
    const EntityNode* o = g.find(*e.object_id);
    if (!s || !o || !s->is_visual() || !o->is_visual()) continue;
    parts.push_back(with_article(*s, false) + " " + e.relation + " " + o->name);
  }
  if (parts.empty()) {
    for (const auto& n : g.nodes) {
      if (parts.size() == 4) break;
      if (n.image_index == image_index) parts.push_back(with_article(n, false));
    }
  }
  return parts.empty() ? "" : join(parts, ", ") + ".";
}

std::string compose_object_caption(const ContentGraph& g, const EntityNode& node) {
  std::string caption = with_article(node, true);
  for (const auto& e : g.edges) {
    if (e.is_solo() || e.subject_id != node.id) continue;
    const EntityNode* o = g.find(*e.object_id);
    if (!o || !o->is_visual()) continue;
    caption += " " + e.relation + " " + o->name;
    break;
  }
  return caption + ".";
}

ContentGraph generate_text_nodes(const ContentGraph& g, Gateway& gateway, Rng& rng, const AugmentOptions& options,
                                 AugmentReport& report, std::string_view sample_key,
                                 const std::map<int, std::string>& image_captions) {
  if (options.min_categories < 1 || options.max_categories < options.min_categories ||
      options.max_categories > static_cast<int>(text_node_templates().size()))
    throw UserError("category counts must satisfy 1 <= min <= max <= 6");

  ContentGraph out = g;
  std::set<std::string> display_names;
  for (const auto& n : out.nodes) display_names.insert(n.display_name);
  std::size_t text_serial = out.textual_count();

  for (int img = 0; img < g.image_count; ++img) {
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
      if (g.nodes[i].image_index == img) candidates.push_back(i);
    rng.shuffle(candidates);
    if (candidates.size() > static_cast<std::size_t>(options.max_nodes_per_image))
      candidates.resize(options.max_nodes_per_image);
    std::sort(candidates.begin(), candidates.end());

    auto caption_it = image_captions.find(img);
    const std::string image_caption =
        caption_it != image_captions.end() ? caption_it->second : compose_image_caption(g, img);

    for (std::size_t idx : candidates) {
      const EntityNode& visual = g.nodes[idx];
      const int k = rng.uniform_int(options.min_categories, options.max_categories);
      for (std::size_t pick : rng.sample_without_replacement(text_node_templates().size(), k)) {
        const std::string& tid = text_node_templates()[pick];
        const Bindings bindings{{"object", visual.name},
                                {"image_caption", image_caption},
                                {"object_caption", compose_object_caption(g, visual)}};
        const Json hints{{"object", visual.name}, {"category", tid}};
        auto x = gateway.run(tid, bindings, options.model_id, {options.temperature, 256}, hints,
                             std::string(sample_key) + "/node/" + visual.id + "/" + tid);
        report.exchange_ids.push_back(x.exchange_id);
        if (!x.ok()) {
          report.rejections.push_back(tid + ": " + x.parse_failure);
          continue;
        }
        if (auto why = validate_node_triple(*x.parsed_payload, visual)) {
          report.rejections.push_back(tid + ": " + *why);
          continue;
        }
        const std::string display = trim((*x.parsed_payload)["object"].get<std::string>());
        if (display_names.count(display)) {
          report.rejections.push_back(tid + ": duplicate entity '" + display + "'");
          continue;
        }
        display_names.insert(display);

        EntityNode node;
        node.id = "text/" + std::to_string(text_serial++);
        node.name = display;
        node.display_name = display;
        node.type_tag = type_word(display);
        node.provenance = Provenance{tid, x.exchange_id};

        RelationEdge edge;
        edge.subject_id = visual.id;
        edge.object_id = node.id;
        edge.relation = trim((*x.parsed_payload)["relation"].get<std::string>());
        edge.image_tag = visual.image_index;
        edge.provenance = node.provenance;

        out.nodes.push_back(std::move(node));
        out.edges.push_back(std::move(edge));
        ++report.nodes_added;
      }
    }
  }
  return out;
}

ContentGraph generate_text_edges(const ContentGraph& g, Gateway& gateway, const AugmentOptions& options,
                                 AugmentReport& report, std::string_view sample_key) {
  ContentGraph out = g;
  std::vector<std::string> names;
  std::map<std::string, std::string> id_by_name;
  for (const auto& n : g.nodes) {
    if (n.is_visual()) continue;
    names.push_back(n.display_name);
    id_by_name.emplace(to_lower(n.display_name), n.id);
  }
  if (names.size() < 2) return out;

  const Json list = names;
  auto x = gateway.run("edge_generation", {{"list_of_entities", list.dump()}}, options.model_id,
                       {options.temperature, 1024}, Json{{"entities", list}},
                       std::string(sample_key) + "/edges");
  report.exchange_ids.push_back(x.exchange_id);
  if (!x.ok()) {
    report.rejections.push_back("edge_generation: " + x.parse_failure);
    return out;
  }

  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& e : g.edges)
    if (!e.is_solo()) seen.emplace(e.subject_id, *e.object_id, e.relation);

  for (const auto& t : *x.parsed_payload) {
    auto s = id_by_name.find(to_lower(trim(t["subject"].get<std::string>())));
    auto o = id_by_name.find(to_lower(trim(t["object"].get<std::string>())));
    if (s == id_by_name.end() || o == id_by_name.end()) {
      report.rejections.push_back("edge_generation: entity outside the list in " + t.dump());
      continue;
    }
    if (s->second == o->second) {
      report.rejections.push_back("edge_generation: self relation in " + t.dump());
      continue;
    }
    const std::string relation = trim(t["relation"].get<std::string>());
    if (!seen.emplace(s->second, o->second, relation).second) continue;
    RelationEdge edge;
    edge.subject_id = s->second;
    edge.object_id = o->second;
    edge.relation = relation;
    edge.provenance = Provenance{"edge_generation", x.exchange_id};
    out.edges.push_back(std::move(edge));
    ++report.edges_added;
  }
  return out;
}

}  // namespace hopgraph
