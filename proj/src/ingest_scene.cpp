#include "hopgraph/ingest_scene.hpp"

#include <set>

#include "hopgraph/text.hpp"

namespace hopgraph {

namespace {

[[noreturn]] void schema_error(std::string_view source, const std::string& where, const std::string& what) {
  throw UserError(std::string(source) + ": " + where + ": " + what);
}

std::string string_at(const Json& j, const char* key, std::string_view source, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) schema_error(source, where, std::string("\"") + key + "\" must be a string");
  return j[key].get<std::string>();
}

}  // namespace

SceneParseResult parse_scene_json(std::string_view text, std::string_view source) {
  Json doc = Json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw UserError(std::string(source) + ": malformed JSON");
  if (!doc.is_object()) schema_error(source, "top level", "expected an object keyed by image id");

  SceneParseResult out;
  for (const auto& [image_id, body] : doc.items()) {
    const std::string where = "image " + image_id;
    if (!body.is_object() || !body.contains("objects") || !body["objects"].is_object())
      schema_error(source, where, "\"objects\" must be an object");
    RawSceneGraph scene;
    scene.image_id = image_id;
    for (const auto& [obj_id, obj] : body["objects"].items()) {
      const std::string owhere = where + " object " + obj_id;
      if (!obj.is_object()) schema_error(source, owhere, "expected an object");
      RawObject o;
      o.id = obj_id;
      o.name = string_at(obj, "name", source, owhere);
      if (obj.contains("attributes")) {
        if (!obj["attributes"].is_array()) schema_error(source, owhere, "\"attributes\" must be a list");
        for (const auto& a : obj["attributes"]) {
          if (!a.is_string()) schema_error(source, owhere, "attributes must be strings");
          o.attributes.push_back(a.get<std::string>());
        }
      }
      if (obj.contains("relations")) {
        if (!obj["relations"].is_array()) schema_error(source, owhere, "\"relations\" must be a list");
        for (const auto& r : obj["relations"]) {
          if (!r.is_object()) schema_error(source, owhere, "relations must be objects");
          o.relations.push_back({string_at(r, "name", source, owhere), string_at(r, "object", source, owhere)});
        }
      }
      scene.objects.push_back(std::move(o));
    }
    std::set<std::string> ids;
    for (const auto& o : scene.objects) ids.insert(o.id);
    for (const auto& o : scene.objects)
      for (const auto& r : o.relations)
        if (!ids.count(r.target_object_id))
          out.diagnostics.push_back(image_id + ": relation target " + r.target_object_id + " of " + o.id +
                                    " does not resolve");
    out.scenes.push_back(std::move(scene));
  }
  return out;
}

SceneParseResult parse_scene_file(const std::string& path) { return parse_scene_json(read_file(path), path); }

Json to_json(const std::vector<RawSceneGraph>& scenes) {
  Json doc = Json::object();
  for (const auto& s : scenes) {
    Json objects = Json::object();
    for (const auto& o : s.objects) {
      Json rels = Json::array();
      for (const auto& r : o.relations) rels.push_back(Json{{"name", r.relation}, {"object", r.target_object_id}});
      objects[o.id] = Json{{"name", o.name}, {"attributes", o.attributes}, {"relations", rels}};
    }
    doc[s.image_id] = Json{{"objects", objects}};
  }
  return doc;
}

SceneGraph to_scene_graph(const RawSceneGraph& raw) {
  SceneGraph g;
  g.image_id = raw.image_id;
  std::set<std::string> ids;
  for (const auto& o : raw.objects) {
    g.objects.push_back({o.id, o.name, o.attributes});
    ids.insert(o.id);
  }
  for (const auto& o : raw.objects)
    for (const auto& r : o.relations)
      if (ids.count(r.target_object_id)) g.relations.push_back({o.id, r.target_object_id, r.relation});
  return g;
}

std::vector<std::vector<std::size_t>> sample_image_sets(std::size_t catalog_size, Rng& rng, std::size_t count,
                                                        int min_size, int max_size) {
  if (min_size < 1 || max_size < min_size) throw UserError("image set size range must satisfy 1 <= min <= max");
  if (catalog_size == 0) throw UserError("image catalog is empty");
  if (catalog_size < static_cast<std::size_t>(min_size))
    throw UserError("image catalog has " + std::to_string(catalog_size) + " images, sets need at least " +
                    std::to_string(min_size));
  const int hi = static_cast<int>(std::min<std::size_t>(catalog_size, static_cast<std::size_t>(max_size)));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < count; ++i) {
    const int size = rng.uniform_int(min_size, hi);
    out.push_back(rng.sample_without_replacement(catalog_size, static_cast<std::size_t>(size)));
  }
  return out;
}

}  // namespace hopgraph
