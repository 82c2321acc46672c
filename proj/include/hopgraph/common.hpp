#pragma once

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace hopgraph {

// Insertion-ordered JSON keeps serialized field order stable, which the
// byte-identical output contract depends on.
using Json = nlohmann::ordered_json;

// Bad input data or configuration (exit code 1 at the CLI).
class UserError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hopgraph
