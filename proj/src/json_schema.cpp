#include "hopgraph/json_schema.hpp"

namespace hopgraph {

namespace {

bool has_type(const Json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  throw UserError("schema uses unsupported type '" + type + "'");
}

std::optional<std::string> check(const Json& v, const Json& s, const std::string& path) {
  const std::string where = path.empty() ? "/" : path;
  auto fail_at = [&](const std::string& why) { return std::optional<std::string>(where + ": " + why); };

  if (s.contains("type")) {
    const auto& t = s["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = has_type(v, t.get<std::string>());
    } else {
      for (const auto& one : t) ok = ok || has_type(v, one.get<std::string>());
    }
    if (!ok) return fail_at("expected type " + t.dump() + ", got " + std::string(v.type_name()));
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& option : s["enum"]) found = found || option == v;
    if (!found) return fail_at("value " + v.dump() + " not in " + s["enum"].dump());
  }
  if (v.is_string() && s.contains("minLength") &&
      v.get<std::string>().size() < s["minLength"].get<std::size_t>())
    return fail_at("string shorter than " + s["minLength"].dump());
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const auto& key : s["required"]) {
        if (!v.contains(key.get<std::string>()))
          return fail_at("missing \"" + key.get<std::string>() + "\"");
      }
    }
    const Json* props = s.contains("properties") ? &s["properties"] : nullptr;
    for (const auto& [key, child] : v.items()) {
      if (props && props->contains(key)) {
        if (auto err = check(child, (*props)[key], path + "/" + key)) return err;
      } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
        return fail_at("unexpected key \"" + key + "\"");
      }
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>())
      return fail_at("fewer than " + s["minItems"].dump() + " items");
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>())
      return fail_at("more than " + s["maxItems"].dump() + " items");
    if (s.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i) {
        if (auto err = check(v[i], s["items"], path + "/" + std::to_string(i))) return err;
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> schema_violation(const Json& value, const Json& schema) {
  return check(value, schema, "");
}

}  // namespace hopgraph
