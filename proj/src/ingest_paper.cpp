#include "hopgraph/ingest_paper.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "hopgraph/text.hpp"

namespace hopgraph {

std::string_view to_string(ParagraphKind k) { return k == ParagraphKind::Plain ? "plain" : "figure_referencing"; }

std::string strip_tex_comments(std::string_view tex) {
  std::string out;
  out.reserve(tex.size());
  bool in_comment = false;
  for (std::size_t i = 0; i < tex.size(); ++i) {
    const char c = tex[i];
    if (in_comment) {
      if (c == '\n') {
        in_comment = false;
        out.push_back(c);
      }
      continue;
    }
    if (c == '\\' && i + 1 < tex.size()) {
      out.push_back(c);
      out.push_back(tex[++i]);
      continue;
    }
    if (c == '%') {
      in_comment = true;
      continue;
    }
    out.push_back(c);
  }
  return out;
}

namespace {

const std::set<std::string> kFloatEnvs = {"figure", "figure*", "table", "table*", "wrapfigure"};
const std::set<std::string> kDroppedEnvs = {"equation", "equation*", "align", "align*", "eqnarray",
                                            "eqnarray*", "displaymath", "gather", "gather*", "tabular"};

// Argument of a brace group starting at `open` (which must be '{'); sets
// `end` one past the closing brace.
std::string brace_group(const std::string& s, std::size_t open, std::size_t& end) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '\\') {
      ++i;
      continue;
    }
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) {
      end = i + 1;
      return s.substr(open + 1, i - open - 1);
    }
  }
  end = s.size();
  return s.substr(std::min(open + 1, s.size()));
}

// Body of an environment whose \begin{name} ends at `from`; sets `end` past
// the matching \end{name}.
std::string env_body(const std::string& s, const std::string& name, std::size_t from, std::size_t& end) {
  const std::string open = "\\begin{" + name + "}";
  const std::string close = "\\end{" + name + "}";
  int depth = 1;
  std::size_t i = from;
  while (i < s.size()) {
    const auto o = s.find(open, i);
    const auto c = s.find(close, i);
    if (c == std::string::npos) break;
    if (o != std::string::npos && o < c) {
      ++depth;
      i = o + open.size();
      continue;
    }
    if (--depth == 0) {
      end = c + close.size();
      return s.substr(from, c - from);
    }
    i = c + close.size();
  }
  end = s.size();
  return s.substr(from);
}

std::string caption_of(const std::string& body) {
  const auto at = body.find("\\caption");
  if (at == std::string::npos) return "";
  auto open = body.find('{', at);
  if (open == std::string::npos) return "";
  const auto bracket = body.find('[', at);
  if (bracket != std::string::npos && bracket < open) {
    const auto close = body.find(']', bracket);
    if (close != std::string::npos) open = body.find('{', close);
    if (open == std::string::npos) return "";
  }
  std::size_t end = 0;
  return brace_group(body, open, end);
}

// Lifts floats and display math out of the body. Floats are numbered and
// recorded; both are replaced by a paragraph break.
std::string lift_environments(const std::string& body, std::vector<TexFloat>& floats) {
  static const std::regex label_re(R"(\\label\{([^}]*)\})");
  std::string out;
  int figures = 0, tables = 0;
  std::size_t i = 0;
  while (i < body.size()) {
    const auto at = body.find("\\begin{", i);
    if (at == std::string::npos) {
      out += body.substr(i);
      break;
    }
    const auto name_end = body.find('}', at);
    if (name_end == std::string::npos) {
      out += body.substr(i);
      break;
    }
    const std::string name = body.substr(at + 7, name_end - at - 7);
    const bool is_float = kFloatEnvs.count(name) > 0;
    if (!is_float && !kDroppedEnvs.count(name)) {
      out += body.substr(i, name_end + 1 - i);
      i = name_end + 1;
      continue;
    }
    out += body.substr(i, at - i);
    std::size_t end = 0;
    const std::string inner = env_body(body, name, name_end + 1, end);
    if (is_float) {
      TexFloat f;
      f.label = name.rfind("table", 0) == 0 ? "Table " + std::to_string(++tables)
                                             : "Figure " + std::to_string(++figures);
      for (auto it = std::sregex_iterator(inner.begin(), inner.end(), label_re); it != std::sregex_iterator(); ++it)
        f.keys.push_back((*it)[1].str());
      f.caption = caption_of(inner);
      floats.push_back(std::move(f));
      out += "\n\n";
    } else {
      out += " ";
    }
    i = end;
  }
  return out;
}

bool ends_with_float_word(const std::string& s) {
  static const std::regex word_re(R"((Figure|Figures|Fig\.|Figs\.|Table|Tables|Tab\.)\s*$)", std::regex::icase);
  return std::regex_search(s, word_re);
}

std::string collapse_spaces(const std::string& s) { return join(split_whitespace(s), " "); }

// TeX markup to running text.
std::string detex(std::string s, const std::map<std::string, std::string>& labels,
                  std::vector<std::string>& diagnostics) {
  static const std::regex sectioning(R"(\\(part|chapter|section|subsection|subsubsection|paragraph)\*?\{[^}]*\})");
  static const std::regex dropped_cmd(
      R"(\\(cite|citep|citet|citealp|label|footnote|url|includegraphics|vspace|hspace|bibliography|bibliographystyle)\*?(\[[^\]]*\])?\{[^}]*\})");
  static const std::regex ref_re(R"(\\(ref|autoref|cref|Cref|eqref)\{([^}]*)\})");
  static const std::regex cmd_re(R"(\\[A-Za-z]+\*?)");

  for (char& c : s)
    if (c == '~' || c == '\n' || c == '\t') c = ' ';
  s = std::regex_replace(s, sectioning, " ");
  s = std::regex_replace(s, dropped_cmd, "");

  std::string resolved;
  auto last = s.cbegin();
  for (auto it = std::sregex_iterator(s.begin(), s.end(), ref_re); it != std::sregex_iterator(); ++it) {
    resolved.append(last, (*it)[0].first);
    last = (*it)[0].second;
    const std::string key = (*it)[2].str();
    auto found = labels.find(key);
    if (found == labels.end()) {
      diagnostics.push_back("unresolved reference \\ref{" + key + "}");
      resolved += "??";
      continue;
    }
    const std::string& label = found->second;
    if (ends_with_float_word(resolved)) resolved += label.substr(label.find(' ') + 1);
    else resolved += label;
  }
  resolved.append(last, s.cend());
  s = resolved;

  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (c == '\\' && i + 1 < s.size() && std::string("%&_#$").find(s[i + 1]) != std::string::npos) {
      out.push_back(s[++i]);
      continue;
    }
    if (c == '\\' && i + 1 < s.size() && s[i + 1] == '\\') {
      out.push_back(' ');
      ++i;
      continue;
    }
    if (c == '$' || c == '{' || c == '}') continue;
    out.push_back(c);
  }
  out = std::regex_replace(out, cmd_re, "");
  return collapse_spaces(out);
}

std::vector<std::string> figure_mentions(const std::string& text) {
  static const std::regex mention(R"(\b(Figure|Fig\.|Table|Tab\.)\s*(\d+))");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), mention); it != std::sregex_iterator(); ++it) {
    const std::string kind = (*it)[1].str().rfind("T", 0) == 0 ? "Table" : "Figure";
    const std::string label = kind + " " + (*it)[2].str();
    if (std::find(out.begin(), out.end(), label) == out.end()) out.push_back(label);
  }
  return out;
}

bool only_commands(const std::string& raw) {
  static const std::regex cmd_line(R"(^\s*(\\[A-Za-z]+\*?(\[[^\]]*\])?(\{[^}]*\})*\s*)*$)");
  return std::regex_match(raw, cmd_line);
}

}  // namespace

TexDocument segment_paragraphs(std::string_view tex) {
  std::string body = strip_tex_comments(tex);
  if (auto b = body.find("\\begin{document}"); b != std::string::npos) body = body.substr(b + 16);
  if (auto e = body.find("\\end{document}"); e != std::string::npos) body = body.substr(0, e);

  TexDocument doc;
  body = lift_environments(body, doc.floats);
  std::map<std::string, std::string> labels;
  for (const auto& f : doc.floats)
    for (const auto& k : f.keys) labels[k] = f.label;

  std::vector<std::string> blocks;
  std::string current;
  int depth = 0;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    auto nl = body.find('\n', pos);
    if (nl == std::string::npos) nl = body.size();
    const std::string line = body.substr(pos, nl - pos);
    pos = nl + 1;
    for (std::size_t at = line.find("\\begin{"); at != std::string::npos; at = line.find("\\begin{", at + 1)) ++depth;
    for (std::size_t at = line.find("\\end{"); at != std::string::npos; at = line.find("\\end{", at + 1)) --depth;
    depth = std::max(depth, 0);
    if (trim(line).empty() && depth == 0) {
      if (!trim(current).empty()) blocks.push_back(current);
      current.clear();
    } else {
      current += line + "\n";
    }
  }
  if (!trim(current).empty()) blocks.push_back(current);

  for (const auto& raw : blocks) {
    if (only_commands(raw)) continue;
    std::string text = detex(raw, labels, doc.diagnostics);
    if (text.empty()) continue;
    ParagraphUnit p;
    p.index = static_cast<int>(doc.paragraphs.size());
    p.text = std::move(text);
    p.sentences = split_sentences(p.text);
    p.figure_refs = figure_mentions(p.text);
    p.kind = p.figure_refs.empty() ? ParagraphKind::Plain : ParagraphKind::FigureReferencing;
    doc.paragraphs.push_back(std::move(p));
  }
  return doc;
}

std::vector<FigureInfo> parse_figure_manifest(std::string_view text, std::string_view source) {
  const std::string src(source);
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw UserError(src + ": malformed JSON");
  if (!doc.is_object() || !doc.contains("figures") || !doc["figures"].is_array())
    throw UserError(src + ": expected {\"figures\": [...]}");
  std::vector<FigureInfo> out;
  std::set<std::string> labels;
  for (const auto& f : doc["figures"]) {
    if (!f.is_object() || !f.contains("label") || !f["label"].is_string() || !f.contains("image") ||
        !f["image"].is_string())
      throw UserError(src + ": figure entries need string \"label\" and \"image\"");
    FigureInfo fi{f["label"].get<std::string>(), f["image"].get<std::string>(),
                  f.contains("caption") && f["caption"].is_string() ? f["caption"].get<std::string>() : ""};
    if (!labels.insert(fi.label).second) throw UserError(src + ": figure label " + fi.label + " listed twice");
    out.push_back(std::move(fi));
  }
  return out;
}

namespace {

// Canonical spelling of an entity from the list, matched case-insensitively.
std::optional<std::string> canonical(const std::vector<std::string>& entities, const std::string& name) {
  const std::string want = to_lower(trim(name));
  for (const auto& e : entities)
    if (to_lower(e) == want) return e;
  return std::nullopt;
}

Json sentence_list(const ParagraphUnit& p) {
  Json out = Json::array();
  for (const auto& s : p.sentences) out.push_back(s);
  return out;
}

}  // namespace

Extraction<std::string> extract_entity_inventory(const std::vector<ParagraphUnit>& paragraphs, Gateway& gateway,
                                                 const PaperOptions& options, std::string_view key) {
  std::vector<std::string> texts;
  for (const auto& p : paragraphs) texts.push_back(p.text);
  const std::string paper = join(texts, "\n\n");
  Extraction<std::string> out;
  auto x = gateway.run("paper_entity_inventory", {{"paper_text", paper}}, options.model_id,
                       {options.temperature, 2048}, Json{{"text", paper}}, std::string(key) + "/inventory");
  out.exchange_ids.push_back(x.exchange_id);
  if (!x.ok()) {
    out.failure = x.parse_failure;
    return out;
  }
  std::set<std::string> seen;
  for (const auto& e : *x.parsed_payload) {
    const std::string name = trim(e.get<std::string>());
    if (name.empty()) continue;
    if (!seen.insert(to_lower(name)).second) {
      out.dropped.push_back("duplicate entity " + name);
      continue;
    }
    out.relations.push_back(name);
  }
  return out;
}

Extraction<TextRelation> extract_text_relations(const ParagraphUnit& paragraph,
                                                const std::vector<std::string>& entities, Gateway& gateway,
                                                const PaperOptions& options, std::string_view key) {
  Extraction<TextRelation> out;
  const Json entity_list(entities);
  auto x = gateway.run("paper_text_relations", {{"entities_json", entity_list.dump()}, {"paragraph", paragraph.text}},
                       options.model_id, {options.temperature, 2048},
                       Json{{"entities", entity_list}, {"sentences", sentence_list(paragraph)}},
                       std::string(key) + "/text/" + std::to_string(paragraph.index));
  out.exchange_ids.push_back(x.exchange_id);
  if (!x.ok()) {
    out.failure = x.parse_failure;
    return out;
  }
  for (const auto& r : *x.parsed_payload) {
    auto source = canonical(entities, r["source_entity"].get<std::string>());
    std::optional<std::string> target;
    if (!r["target_entity"].is_null()) {
      target = canonical(entities, r["target_entity"].get<std::string>());
      if (!target) {
        out.dropped.push_back("target outside the entity list: " + r.dump());
        continue;
      }
    }
    if (!source) {
      out.dropped.push_back("source outside the entity list: " + r.dump());
      continue;
    }
    if (target && *target == *source) {
      out.dropped.push_back("self relation: " + r.dump());
      continue;
    }
    out.relations.push_back({*source, target, trim(r["relationship_description"].get<std::string>()), paragraph.index});
  }
  return out;
}

Extraction<VisualRelation> extract_visual_relations(const ParagraphUnit& paragraph,
                                                    const std::vector<std::string>& entities,
                                                    const std::vector<FigureInfo>& figures, Gateway& gateway,
                                                    const PaperOptions& options, std::string_view key) {
  Extraction<VisualRelation> out;
  Json figure_list = Json::array();
  Json labels = Json::array();
  for (const auto& ref : paragraph.figure_refs) {
    auto f = std::find_if(figures.begin(), figures.end(), [&](const FigureInfo& fi) { return fi.label == ref; });
    if (f == figures.end()) continue;
    figure_list.push_back(Json{{"figure_label", f->label}, {"caption", f->caption}});
    labels.push_back(f->label);
  }
  if (labels.empty()) {
    out.dropped.push_back("paragraph " + std::to_string(paragraph.index) + " references no figure in the manifest");
    return out;
  }
  std::vector<std::string> indexed;
  for (std::size_t i = 0; i < paragraph.sentences.size(); ++i)
    indexed.push_back("[" + std::to_string(i) + "] " + paragraph.sentences[i]);
  const Json entity_list(entities);
  auto x = gateway.run("paper_visual_relations",
                       {{"figures_json", figure_list.dump()},
                        {"entities_json", entity_list.dump()},
                        {"sentences_text", join(indexed, "\n")}},
                       options.model_id, {options.temperature, 2048},
                       Json{{"entities", entity_list}, {"sentences", sentence_list(paragraph)}, {"figures", labels}},
                       std::string(key) + "/visual/" + std::to_string(paragraph.index));
  out.exchange_ids.push_back(x.exchange_id);
  if (!x.ok()) {
    out.failure = x.parse_failure;
    return out;
  }
  const int n = static_cast<int>(paragraph.sentences.size());
  for (const auto& r : *x.parsed_payload) {
    auto reject = [&](const std::string& why) { out.dropped.push_back(why + ": " + r.dump()); };
    if (r["figure"].is_null()) {
      reject("figure is null");
      continue;
    }
    std::string figure;
    for (const auto& l : labels)
      if (to_lower(l.get<std::string>()) == to_lower(trim(r["figure"].get<std::string>()))) figure = l;
    if (figure.empty()) {
      reject("figure not among the paragraph's figures");
      continue;
    }
    const auto idx = r["idx"].get<std::vector<int>>();
    if (std::any_of(idx.begin(), idx.end(), [&](int i) { return i < 0 || i >= n; })) {
      reject("sentence index out of range");
      continue;
    }
    auto source = canonical(entities, r["source_entity"].get<std::string>());
    if (!source) {
      reject("source outside the entity list");
      continue;
    }
    std::optional<std::string> target;
    if (!r["target_entity"].is_null()) {
      target = canonical(entities, r["target_entity"].get<std::string>());
      if (!target) {
        reject("target outside the entity list");
        continue;
      }
      if (*target == *source) {
        reject("self relation");
        continue;
      }
    }
    out.relations.push_back(
        {*source, target, trim(r["relationship_description"].get<std::string>()), figure, idx, paragraph.index});
  }
  return out;
}

SentenceFilterResult filter_sentences(const ParagraphUnit& paragraph, const std::vector<VisualRelation>& relations,
                                      Embedder& embedder, double threshold) {
  SentenceFilterResult out;
  const int n = static_cast<int>(paragraph.sentences.size());
  if (paragraph.kind == ParagraphKind::Plain || relations.empty()) {
    out.text = paragraph.text;
    for (int i = 0; i < n; ++i) out.retained.push_back(i);
    return out;
  }
  std::vector<std::string> descriptions;
  for (const auto& r : relations) descriptions.push_back(r.description);
  const auto sentence_vectors = embedder.embed(EmbedKind::Sentence, paragraph.sentences);
  const auto relation_vectors = embedder.embed(EmbedKind::Sentence, descriptions);
  std::vector<std::string> kept;
  for (int i = 0; i < n; ++i) {
    double best = -1.0;
    for (const auto& rv : relation_vectors) best = std::max(best, cosine(sentence_vectors[i], rv));
    out.max_similarity.push_back(best);
    if (best >= threshold) {
      out.removed.push_back(i);
    } else {
      out.retained.push_back(i);
      kept.push_back(paragraph.sentences[i]);
    }
  }
  out.text = join(kept, " ");
  return out;
}

std::optional<PaperGraph> build_paper_graph(const std::vector<TextRelation>& text_relations,
                                            const std::vector<VisualRelation>& visual_relations,
                                            const std::vector<FigureInfo>& figures,
                                            const std::vector<std::string>& entities) {
  if (visual_relations.empty()) return std::nullopt;
  std::map<std::string, std::size_t> entity_pos;
  for (std::size_t i = 0; i < entities.size(); ++i) entity_pos.emplace(entities[i], i);
  auto require = [&](const std::string& e) {
    if (!entity_pos.count(e)) throw UserError("relation names \"" + e + "\", which is not in the entity inventory");
  };

  std::set<std::string> used_figures;
  for (const auto& r : visual_relations) {
    if (std::none_of(figures.begin(), figures.end(), [&](const FigureInfo& f) { return f.label == r.figure; }))
      throw UserError("visual relation cites " + r.figure + ", which is not in the figure manifest");
    used_figures.insert(r.figure);
  }
  PaperGraph out;
  std::map<std::string, int> image_of_figure;
  for (const auto& f : figures) {
    if (!used_figures.count(f.label)) continue;
    image_of_figure[f.label] = static_cast<int>(out.images.size());
    out.images.push_back(f);
  }

  std::map<std::string, int> anchor;
  std::set<std::string> used;
  for (const auto& r : visual_relations) {
    require(r.source);
    anchor.emplace(r.source, image_of_figure.at(r.figure));
    used.insert(r.source);
    if (r.target) {
      require(*r.target);
      anchor.emplace(*r.target, image_of_figure.at(r.figure));
      used.insert(*r.target);
    }
  }
  for (const auto& r : text_relations) {
    require(r.source);
    used.insert(r.source);
    if (r.target) {
      require(*r.target);
      used.insert(*r.target);
    }
  }

  ContentGraph& g = out.graph;
  g.domain = Domain::SP;
  g.image_count = static_cast<int>(out.images.size());
  auto id_of = [&](const std::string& e) { return "ent/" + std::to_string(entity_pos.at(e) + 1); };
  for (const auto& e : entities) {
    if (!used.count(e)) continue;
    EntityNode n;
    n.id = id_of(e);
    n.name = e;
    n.display_name = e;
    if (auto a = anchor.find(e); a != anchor.end()) n.image_index = a->second;
    g.nodes.push_back(std::move(n));
  }

  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (const auto& r : visual_relations) {
    RelationEdge e;
    e.subject_id = id_of(r.source);
    if (r.target) e.object_id = id_of(*r.target);
    e.relation = r.description;
    e.image_tag = image_of_figure.at(r.figure);
    e.figure_label = r.figure;
    e.sentence_indices = r.idx;
    if (seen.emplace(e.subject_id, e.object_id.value_or(""), e.relation).second) g.edges.push_back(std::move(e));
  }
  for (const auto& r : text_relations) {
    RelationEdge e;
    e.subject_id = id_of(r.source);
    if (r.target) e.object_id = id_of(*r.target);
    e.relation = r.description;
    if (seen.emplace(e.subject_id, e.object_id.value_or(""), e.relation).second) g.edges.push_back(std::move(e));
  }
  return out;
}

}  // namespace hopgraph
