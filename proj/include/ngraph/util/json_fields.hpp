#pragma once

#include <string>
#include <string_view>

#include "json.hpp"
#include "ngraph/util/codec.hpp"

namespace ngraph::util {

using Json = nlohmann::json;

/// Parses text, converting parser failures into FormatError with the byte
/// offset.
Json parse_json(std::string_view text, const std::string& what);

/// Checked accessors; failures name the dotted field path.
const Json& field(const Json& obj, std::string_view key, const std::string& path);
const Json& element(const Json& arr, std::size_t i, const std::string& path);
const Json& array_field(const Json& obj, std::string_view key, const std::string& path);
std::size_t size_field(const Json& obj, std::string_view key, const std::string& path);
double number_field(const Json& obj, std::string_view key, const std::string& path);
std::string string_field(const Json& obj, std::string_view key, const std::string& path);
bool bool_field(const Json& obj, std::string_view key, const std::string& path);
std::size_t as_size(const Json& v, const std::string& path);

}  // namespace ngraph::util
