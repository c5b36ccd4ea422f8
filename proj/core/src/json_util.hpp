#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace forge {

// Insertion-ordered so that every file we emit has a stable field order.
using Json = nlohmann::ordered_json;

inline std::optional<double> json_optional_double(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

inline Json json_from_optional(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

// Splits file contents into lines, dropping a trailing '\r' on each.
std::vector<std::string> split_lines(const std::string& contents);

}  // namespace forge
