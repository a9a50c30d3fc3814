#include "ngraph/util/json_fields.hpp"

namespace ngraph::util {

namespace {

std::string join(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

}  // namespace

Json parse_json(std::string_view text, const std::string& what) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw FormatError(what + ": parse error at byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

const Json& field(const Json& obj, std::string_view key, const std::string& path) {
  if (!obj.is_object()) throw FormatError((path.empty() ? std::string("document") : path) + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw FormatError(join(path, key) + ": missing field");
  return *it;
}

const Json& element(const Json& arr, std::size_t i, const std::string& path) {
  if (!arr.is_array() || i >= arr.size()) throw FormatError(path + "[" + std::to_string(i) + "]: missing element");
  return arr[i];
}

const Json& array_field(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_array()) throw FormatError(join(path, key) + ": expected an array");
  return v;
}

std::size_t as_size(const Json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    throw FormatError(path + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

std::size_t size_field(const Json& obj, std::string_view key, const std::string& path) {
  return as_size(field(obj, key, path), join(path, key));
}

double number_field(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_number()) throw FormatError(join(path, key) + ": expected a number");
  return v.get<double>();
}

std::string string_field(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_string()) throw FormatError(join(path, key) + ": expected a string");
  return v.get<std::string>();
}

bool bool_field(const Json& obj, std::string_view key, const std::string& path) {
  const Json& v = field(obj, key, path);
  if (!v.is_boolean()) throw FormatError(join(path, key) + ": expected a boolean");
  return v.get<bool>();
}

}  // namespace ngraph::util
