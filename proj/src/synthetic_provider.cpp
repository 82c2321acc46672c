#include "hopgraph/synthetic_provider.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "hopgraph/rng.hpp"
#include "hopgraph/text.hpp"

namespace hopgraph {

namespace {

struct Category {
  std::vector<std::string> relations;
  std::vector<std::string> types;
};

const std::map<std::string, Category>& categories() {
  static const std::map<std::string, Category> table = {
      {"text_node_authorship", {{"designed by", "crafted by", "invented by"}, {"artisan", "designer", "inventor"}}},
      {"text_node_human_involvement",
       {{"maintained by", "operated by", "sponsored by"}, {"company", "agency", "foundation"}}},
      {"text_node_temporal",
       {{"acquired during", "restored during", "displayed at"}, {"event", "festival", "exhibition"}}},
      {"text_node_ownership", {{"owned by", "donated by", "inherited by"}, {"collector", "family", "club"}}},
      {"text_node_location", {{"kept at", "installed at", "photographed at"}, {"museum", "workshop", "gallery"}}},
      {"text_node_purpose", {{"used for", "bought for", "prepared for"}, {"project", "campaign", "program"}}},
  };
  return table;
}

const std::vector<std::string> kSyllables = {"lio", "ra", "vex", "ma",  "ren", "tho", "sel", "dia", "kor", "van",
                                             "bel", "quo", "nix", "tal", "mer", "zan", "ost", "ivo", "pel", "dru"};

std::string capitalized(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string made_up_word(Rng& rng) {
  const int n = rng.uniform_int(2, 3);
  std::string w;
  for (int i = 0; i < n; ++i) w += kSyllables[rng.uniform_index(kSyllables.size())];
  return capitalized(w);
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  return items[rng.uniform_index(items.size())];
}

std::string text_node(const CompletionRequest& req, Rng& rng) {
  const auto it = categories().find(req.template_id);
  const Category& cat = it->second;
  const std::string type = pick(rng, cat.types);
  std::string name = made_up_word(rng) + " " + made_up_word(rng);
  if (type == "company" || type == "agency" || type == "foundation") name += " " + capitalized(type);
  const Json triple{{"subject", req.hints.at("object").get<std::string>()},
                    {"relation", pick(rng, cat.relations)},
                    {"object", type + " (" + name + ")"}};
  return triple.dump();
}

std::string text_edges(const CompletionRequest& req, Rng& rng) {
  static const std::vector<std::string> relations = {"collaborated with", "sponsored", "was featured at",
                                                     "supplied", "hosted", "partnered with"};
  const auto entities = req.hints.at("entities").get<std::vector<std::string>>();
  Json out = Json::array();
  for (std::size_t i = 0; i + 1 < entities.size(); ++i) {
    if (!rng.bernoulli(0.7)) continue;
    out.push_back(Json{{"subject", entities[i]}, {"relation", pick(rng, relations)}, {"object", entities[i + 1]}});
  }
  if (entities.size() >= 3) {
    const auto pair = rng.sample_without_replacement(entities.size(), 2);
    out.push_back(
        Json{{"subject", entities[pair[0]]}, {"relation", pick(rng, relations)}, {"object", entities[pair[1]]}});
  }
  return out.dump();
}

std::string entity_phrase(const Json& e) {
  const std::string mention = e.at("mention").get<std::string>();
  if (e.at("image_ref").is_null()) return mention;
  const std::string ref = e.at("image_ref").get<std::string>();
  if (ref == "Image") return "the " + mention + " in the image";
  return "the " + mention + " shown in " + to_lower(ref);
}

std::string context(const CompletionRequest& req) {
  std::map<std::string, Json> by_id;
  std::vector<std::string> order;
  for (const auto& e : req.hints.at("entities")) {
    by_id[e.at("id").get<std::string>()] = e;
    order.push_back(e.at("id").get<std::string>());
  }
  std::vector<std::string> sentences;
  sentences.push_back("What follows is a " + to_lower(req.hints.at("style").get<std::string>()) +
                      " about a few connected things.");
  std::set<std::string> covered;
  for (const auto& r : req.hints.at("relations")) {
    const std::string s = r.at("subject_id").get<std::string>();
    std::string line = entity_phrase(by_id.at(s)) + " " + r.at("relation").get<std::string>();
    covered.insert(s);
    if (!r.at("object_id").is_null()) {
      const std::string o = r.at("object_id").get<std::string>();
      line += " " + entity_phrase(by_id.at(o));
      covered.insert(o);
    }
    sentences.push_back(capitalized(line) + ".");
  }
  for (const auto& id : order)
    if (!covered.count(id)) sentences.push_back("There is also " + entity_phrase(by_id.at(id)) + ".");
  return join(sentences, " ");
}

std::string where(const std::string& ref) { return ref == "Image" ? "the image" : to_lower(ref); }

std::string question(const CompletionRequest& req) {
  const auto& h = req.hints;
  const std::string ref = where(h.at("terminal_ref").get<std::string>());
  const std::string head = h.at("head").get<std::string>();
  const int hops = h.at("hop_count").get<int>();
  std::string q;
  if (h.at("answer_kind").get<std::string>() == "attribute")
    q = "What attribute describes the object in " + ref + " that is reached from " + head + " through " +
        std::to_string(hops) + " connected facts?";
  else
    q = "Which object in " + ref + " is reached from " + head + " through " + std::to_string(hops) +
        " connected facts?";
  return Json{{"question", q}, {"answer", h.at("answer").get<std::string>()}}.dump();
}

std::string cot(const CompletionRequest& req) {
  std::vector<std::string> sentences = {"The question asks for an entity reached by following several facts."};
  for (const auto& step : req.hints.at("steps"))
    sentences.push_back(step.at("source").get<std::string>() + ", " + step.at("fact").get<std::string>() + ".");
  sentences.push_back("Therefore, the answer is " + req.hints.at("answer").get<std::string>() + ".");
  return join(sentences, " ");
}

std::string judge(const CompletionRequest& req, std::uint64_t seed, double hit_rate) {
  const auto& h = req.hints;
  Rng rng(derive_seed(seed, h.at("judge").get<std::string>() + "|" + h.at("modality").get<std::string>() + "|" +
                                req.prompt));
  return rng.uniform01() < hit_rate ? h.at("gold").get<std::string>() : "unknown";
}

std::vector<std::string> words_of(const std::string& caption) {
  std::string cleaned;
  for (char c : to_lower(caption))
    cleaned.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '\'' || c == '-' ? c : ' ');
  return split_whitespace(cleaned);
}

bool is_article(const std::string& w) { return w == "a" || w == "an" || w == "the"; }

// "<article> subject rest... [<article> target]": a caption ending in an
// article and a word gets that word as target, the words before the article
// as relation phrase. Otherwise the action is solo.
std::string caption_graph(const CompletionRequest& req) {
  const auto captions = req.hints.at("captions").get<std::vector<std::string>>();
  std::map<std::string, std::string> ids;
  Json entities = Json::array();
  auto id_of = [&](const std::string& word) {
    auto [it, fresh] = ids.emplace(word, std::to_string(ids.size() + 1));
    if (fresh) entities.push_back(Json{{"id", it->second}, {"entity", word}, {"attributes", Json::array()}});
    return it->second;
  };
  Json scenes = Json::array();
  for (std::size_t i = 0; i < captions.size(); ++i) {
    auto words = words_of(captions[i]);
    if (!words.empty() && is_article(words.front())) words.erase(words.begin());
    Json relations = Json::array();
    if (!words.empty()) {
      const std::string source = id_of(words.front());
      std::vector<std::string> rest(words.begin() + 1, words.end());
      std::size_t cut = rest.size();
      if (rest.size() >= 2 && is_article(rest[rest.size() - 2])) cut = rest.size() - 2;
      Json target = nullptr;
      std::vector<std::string> phrase = rest;
      if (cut < rest.size() && rest.back() != words.front()) {
        target = id_of(rest.back());
        phrase.assign(rest.begin(), rest.begin() + static_cast<long>(cut));
      }
      const std::string rel = phrase.empty() ? "appears" : join(phrase, " ");
      relations.push_back(Json{{"source", source}, {"target", target}, {"relation", rel}});
    }
    scenes.push_back(Json{{"scene", "scene_" + std::to_string(i + 1)}, {"relations", relations}});
  }
  return Json{{"entities", entities}, {"scenes", scenes}}.dump();
}

std::string inventory(const CompletionRequest& req) {
  static const std::regex token(R"(\b[A-Z][A-Za-z0-9]*[A-Z0-9][A-Za-z0-9]*\b)");
  static const std::set<std::string> stop = {"Figure", "Table", "Fig", "Sec", "Section", "Eq"};
  const std::string text = req.hints.at("text").get<std::string>();
  Json out = Json::array();
  std::set<std::string> seen;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), token); it != std::sregex_iterator(); ++it) {
    const std::string w = it->str();
    if (stop.count(w) || !seen.insert(w).second) continue;
    out.push_back(w);
  }
  return out.dump();
}

// Entities mentioned in a sentence, by position of first mention.
std::vector<std::string> mentioned(const std::string& sentence, const std::vector<std::string>& entities) {
  std::vector<std::pair<std::size_t, std::string>> hits;
  const std::string lower = to_lower(sentence);
  for (const auto& e : entities)
    if (contains_phrase(sentence, e)) hits.emplace_back(lower.find(to_lower(e)), e);
  std::sort(hits.begin(), hits.end());
  std::vector<std::string> out;
  for (auto& [pos, e] : hits) out.push_back(e);
  return out;
}

std::string text_relations(const CompletionRequest& req) {
  const auto entities = req.hints.at("entities").get<std::vector<std::string>>();
  const auto sentences = req.hints.at("sentences").get<std::vector<std::string>>();
  Json out = Json::array();
  for (const auto& s : sentences) {
    const auto hits = mentioned(s, entities);
    if (hits.size() < 2) continue;
    const std::string lower = to_lower(s);
    const auto a = lower.find(to_lower(hits[0])) + hits[0].size();
    const auto b = lower.find(to_lower(hits[1]), a);
    std::string between = b == std::string::npos ? "" : trim(s.substr(a, b - a));
    while (!between.empty() && !std::isalnum(static_cast<unsigned char>(between.front()))) between.erase(0, 1);
    if (between.empty()) between = "is related to";
    out.push_back(Json{{"source_entity", hits[0]}, {"target_entity", hits[1]}, {"relationship_description", between}});
  }
  return out.dump();
}

std::string visual_relations(const CompletionRequest& req) {
  const auto entities = req.hints.at("entities").get<std::vector<std::string>>();
  const auto sentences = req.hints.at("sentences").get<std::vector<std::string>>();
  const auto figures = req.hints.at("figures").get<std::vector<std::string>>();
  Json out = Json::array();
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto& s = sentences[i];
    auto fig = std::find_if(figures.begin(), figures.end(), [&](const std::string& f) { return contains_phrase(s, f); });
    if (fig == figures.end()) continue;
    const auto hits = mentioned(s, entities);
    if (hits.empty()) continue;
    out.push_back(Json{{"source_entity", hits[0]},
                       {"target_entity", hits.size() > 1 ? Json(hits[1]) : Json(nullptr)},
                       {"relationship_description", s},
                       {"figure", *fig},
                       {"idx", Json::array({static_cast<int>(i)})}});
  }
  return out.dump();
}

}  // namespace

std::string SyntheticProvider::complete(const CompletionRequest& req) {
  Rng rng(derive_seed(seed_, req.template_id + "\n" + req.prompt));
  const auto& id = req.template_id;
  try {
    return dispatch(req, rng);
  } catch (const Json::exception& e) {
    throw ContentError("synthetic provider: incomplete hints for " + id + ": " + e.what());
  }
}

std::string SyntheticProvider::dispatch(const CompletionRequest& req, Rng& rng) const {
  const auto& id = req.template_id;
  if (categories().count(id)) return text_node(req, rng);
  if (id == "edge_generation") return text_edges(req, rng);
  if (id == "context_generation") return context(req);
  if (id == "qa_generation") return question(req);
  if (id == "cot_generation") return cot(req);
  if (id == "modality_judge") return judge(req, seed_, judge_hit_rate_);
  if (id == "caption_to_graph") return caption_graph(req);
  if (id == "paper_entity_inventory") return inventory(req);
  if (id == "paper_text_relations") return text_relations(req);
  if (id == "paper_visual_relations") return visual_relations(req);
  throw ContentError("synthetic provider has no answer for template " + id);
}

}  // namespace hopgraph
