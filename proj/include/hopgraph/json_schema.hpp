#pragma once

#include <optional>
#include <string>

#include "hopgraph/common.hpp"

namespace hopgraph {

// Validates a JSON value against the subset of JSON Schema used for LLM
// payloads: type (string or list), required, properties,
// additionalProperties (bool), items, minItems, maxItems, enum, minLength.
// Returns the first violation as "<json pointer>: <reason>", or nullopt.
std::optional<std::string> schema_violation(const Json& value, const Json& schema);

}  // namespace hopgraph
