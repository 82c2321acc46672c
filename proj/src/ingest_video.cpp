#include "hopgraph/ingest_video.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <regex>
#include <set>
#include <tuple>

#include "hopgraph/text.hpp"

namespace hopgraph {

namespace {

double number_at(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) throw UserError(where + ": \"" + key + "\" must be a number");
  return j[key].get<double>();
}

std::string string_at(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) throw UserError(where + ": \"" + key + "\" must be a string");
  return j[key].get<std::string>();
}

}  // namespace

VideoInput parse_video_json(std::string_view text, std::string_view source) {
  const std::string src(source);
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw UserError(src + ": malformed JSON");
  if (!doc.is_object()) throw UserError(src + ": expected an object");
  VideoInput v;
  v.video_id = string_at(doc, "video_id", src);
  if (!doc.contains("captions") || !doc["captions"].is_array() || doc["captions"].empty())
    throw UserError(src + ": \"captions\" must be a non-empty list");
  for (const auto& c : doc["captions"]) {
    const std::string where = src + ": caption " + std::to_string(v.captions.size());
    TimedCaption tc;
    tc.text = string_at(c, "text", where);
    tc.start_s = number_at(c, "start", where);
    tc.end_s = number_at(c, "end", where);
    if (tc.start_s > tc.end_s) throw UserError(where + ": start is after end");
    tc.scene_index = static_cast<int>(v.captions.size());
    v.captions.push_back(std::move(tc));
  }
  if (doc.contains("frames")) {
    if (!doc["frames"].is_array()) throw UserError(src + ": \"frames\" must be a list");
    for (const auto& f : doc["frames"]) {
      const std::string where = src + ": frame " + std::to_string(v.frames.size());
      v.frames.push_back({number_at(f, "timestamp", where), string_at(f, "ref", where)});
    }
  }
  return v;
}

std::vector<double> candidate_timestamps(double start_s, double end_s, double fps) {
  if (fps <= 0) throw UserError("frame rate must be positive");
  std::vector<double> out;
  const double step = 1.0 / fps;
  for (long k = 0;; ++k) {
    const double t = start_s + static_cast<double>(k) * step;
    if (t > end_s + 1e-9) break;
    out.push_back(t);
  }
  return out;
}

std::vector<FrameChoice> select_frames(const std::vector<VideoFrame>& frames, const std::vector<Vector>& frame_vectors,
                                       const std::vector<TimedCaption>& captions,
                                       const std::vector<Vector>& caption_vectors) {
  if (frames.size() != frame_vectors.size()) throw UserError("one embedding per frame is required");
  if (captions.size() != caption_vectors.size()) throw UserError("one embedding per caption is required");
  std::vector<std::size_t> by_time(frames.size());
  std::iota(by_time.begin(), by_time.end(), 0);
  std::stable_sort(by_time.begin(), by_time.end(),
                   [&](std::size_t a, std::size_t b) { return frames[a].timestamp_s < frames[b].timestamp_s; });

  std::vector<FrameChoice> out;
  for (std::size_t c = 0; c < captions.size(); ++c) {
    std::optional<FrameChoice> best;
    for (std::size_t f : by_time) {
      const double t = frames[f].timestamp_s;
      if (t < captions[c].start_s || t > captions[c].end_s) continue;
      const double sim = cosine(frame_vectors[f], caption_vectors[c]);
      if (!best || sim > best->similarity) best = FrameChoice{f, sim};
    }
    if (!best) {
      char range[64];
      std::snprintf(range, sizeof range, "[%g, %g]", captions[c].start_s, captions[c].end_s);
      throw UserError("caption " + std::to_string(c) + " has no candidate frame within " + range);
    }
    out.push_back(*best);
  }
  return out;
}

SceneGraphBundle bundle_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("entities") || !j["entities"].is_array() || !j.contains("scenes") ||
      !j["scenes"].is_array())
    throw UserError("bundle needs \"entities\" and \"scenes\" lists");
  SceneGraphBundle b;
  for (const auto& e : j["entities"]) {
    if (!e.is_object()) throw UserError("bundle entity is not an object");
    BundleEntity be;
    be.id = string_at(e, "id", "bundle entity");
    be.entity = string_at(e, "entity", "bundle entity " + be.id);
    if (e.contains("attributes")) be.attributes = e["attributes"].get<std::vector<std::string>>();
    b.entities.push_back(std::move(be));
  }
  for (const auto& s : j["scenes"]) {
    if (!s.is_object() || !s.contains("relations") || !s["relations"].is_array())
      throw UserError("bundle scene needs a \"relations\" list");
    BundleScene bs;
    bs.scene = s.contains("scene") && s["scene"].is_string() ? s["scene"].get<std::string>() : "";
    for (const auto& r : s["relations"]) {
      BundleRelation br;
      br.source = string_at(r, "source", "bundle relation");
      if (r.contains("target") && !r["target"].is_null()) br.target = string_at(r, "target", "bundle relation");
      br.relation = string_at(r, "relation", "bundle relation");
      bs.relations.push_back(std::move(br));
    }
    b.scenes.push_back(std::move(bs));
  }
  return b;
}

Json to_json(const SceneGraphBundle& b) {
  Json entities = Json::array();
  for (const auto& e : b.entities)
    entities.push_back(Json{{"id", e.id}, {"entity", e.entity}, {"attributes", e.attributes}});
  Json scenes = Json::array();
  for (const auto& s : b.scenes) {
    Json rels = Json::array();
    for (const auto& r : s.relations)
      rels.push_back(Json{{"source", r.source}, {"target", r.target ? Json(*r.target) : Json(nullptr)},
                          {"relation", r.relation}});
    scenes.push_back(Json{{"scene", s.scene}, {"relations", rels}});
  }
  return Json{{"entities", entities}, {"scenes", scenes}};
}

std::vector<std::string> validate_bundle(const SceneGraphBundle& b, std::size_t caption_count) {
  static const std::regex integer_id(R"([1-9][0-9]*)");
  std::vector<std::string> problems;
  std::set<long> numeric;
  std::set<std::string> ids;
  for (const auto& e : b.entities) {
    if (!std::regex_match(e.id, integer_id)) {
      problems.push_back("entity id \"" + e.id + "\" is not a stringified integer");
      continue;
    }
    if (!ids.insert(e.id).second) problems.push_back("entity id " + e.id + " is used twice");
    numeric.insert(std::stol(e.id));
    if (trim(e.entity).empty()) problems.push_back("entity " + e.id + " has an empty name");
  }
  if (problems.empty() && !numeric.empty() &&
      (*numeric.begin() != 1 || *numeric.rbegin() != static_cast<long>(numeric.size())))
    problems.push_back("entity ids are not the contiguous range 1.." + std::to_string(numeric.size()));
  if (b.scenes.size() != caption_count)
    problems.push_back("bundle has " + std::to_string(b.scenes.size()) + " scenes for " +
                       std::to_string(caption_count) + " captions");
  for (std::size_t s = 0; s < b.scenes.size(); ++s) {
    std::set<std::tuple<std::string, std::string, std::string>> seen;
    for (const auto& r : b.scenes[s].relations) {
      const std::string where = "scene " + std::to_string(s + 1) + ": ";
      if (!ids.count(r.source)) problems.push_back(where + "relation source " + r.source + " does not resolve");
      if (r.target && !ids.count(*r.target))
        problems.push_back(where + "relation target " + *r.target + " does not resolve");
      if (trim(r.relation).empty()) problems.push_back(where + "empty relation phrase");
      const std::string target = r.target.value_or("");
      const std::string phrase = to_lower(trim(r.relation));
      if (!seen.emplace(r.source, target, phrase).second)
        problems.push_back(where + "duplicate relation " + r.source + " -> " + target);
      else if (r.target && seen.count({target, r.source, phrase}))
        problems.push_back(where + "relation " + r.source + " -> " + target + " repeats its inverse");
    }
  }
  return problems;
}

ContentGraph bundle_to_graph(const SceneGraphBundle& b, std::size_t caption_count) {
  if (auto problems = validate_bundle(b, caption_count); !problems.empty())
    throw UserError("invalid scene-graph bundle: " + problems.front());
  std::map<std::string, int> first_scene;
  for (std::size_t s = 0; s < b.scenes.size(); ++s)
    for (const auto& r : b.scenes[s].relations) {
      first_scene.emplace(r.source, static_cast<int>(s));
      if (r.target) first_scene.emplace(*r.target, static_cast<int>(s));
    }

  ContentGraph g;
  g.domain = Domain::VF;
  g.image_count = static_cast<int>(caption_count);
  std::map<std::string, int> name_count;
  for (const auto& e : b.entities)
    if (first_scene.count(e.id)) ++name_count[e.entity];
  std::map<std::string, int> name_seen;
  for (const auto& e : b.entities) {
    auto it = first_scene.find(e.id);
    if (it == first_scene.end()) continue;
    EntityNode n;
    n.id = "ent/" + e.id;
    n.name = e.entity;
    n.display_name = name_count[e.entity] > 1 ? e.entity + "_" + std::to_string(++name_seen[e.entity]) : e.entity;
    n.image_index = it->second;
    n.attributes = e.attributes;
    g.nodes.push_back(std::move(n));
  }
  for (std::size_t s = 0; s < b.scenes.size(); ++s)
    for (const auto& r : b.scenes[s].relations) {
      RelationEdge edge;
      edge.subject_id = "ent/" + r.source;
      if (r.target) edge.object_id = "ent/" + *r.target;
      edge.relation = trim(r.relation);
      edge.image_tag = static_cast<int>(s);
      g.edges.push_back(std::move(edge));
    }
  return g;
}

std::string annotate_captions(const std::vector<TimedCaption>& captions) {
  std::vector<std::string> lines;
  for (const auto& c : captions) {
    char range[64];
    std::snprintf(range, sizeof range, "%gs-%gs", c.start_s, c.end_s);
    lines.push_back("Scene " + std::to_string(c.scene_index + 1) + " (" + range + "): " + c.text);
  }
  return join(lines, "\n");
}

CaptionGraphResult captions_to_graph(const std::vector<TimedCaption>& captions, Gateway& gateway,
                                     const CaptionGraphOptions& options, std::string_view key) {
  if (captions.empty()) throw UserError("no captions to convert");
  Json texts = Json::array();
  for (const auto& c : captions) texts.push_back(c.text);
  const Json hints{{"captions", texts}};
  const Bindings bindings{{"annotated", annotate_captions(captions)}};

  CaptionGraphResult result;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto x = gateway.run("caption_to_graph", bindings, options.model_id, {options.temperature, 4096}, hints,
                         std::string(key) + "/captions/" + std::to_string(attempt));
    result.exchange_ids.push_back(x.exchange_id);
    if (!x.ok()) {
      result.problems = {"unparseable: " + x.parse_failure};
      continue;
    }
    SceneGraphBundle bundle;
    try {
      bundle = bundle_from_json(*x.parsed_payload);
    } catch (const UserError& e) {
      result.problems = {e.what()};
      continue;
    }
    result.problems = validate_bundle(bundle, captions.size());
    if (!result.problems.empty()) continue;
    result.graph = bundle_to_graph(bundle, captions.size());
    result.bundle = std::move(bundle);
    break;
  }
  return result;
}

}  // namespace hopgraph
