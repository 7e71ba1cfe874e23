#include "packlab/json_util.hpp"

#include <algorithm>

#include "packlab/errors.hpp"

namespace packlab::json_util {

json parse(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw MalformedDocument(e.what());
  }
}

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::strict); }

Reader::Reader(const json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
  if (!obj_.is_object()) throw SchemaViolation(where_ + ": expected an object");
}

void Reader::allow_only(std::initializer_list<std::string_view> keys) const {
  for (const auto& [k, v] : obj_.items()) {
    if (std::find(keys.begin(), keys.end(), std::string_view(k)) == keys.end()) {
      throw SchemaViolation(path(k) + ": unknown key");
    }
  }
}

std::string Reader::path(std::string_view key) const {
  return where_.empty() ? std::string(key) : where_ + "." + std::string(key);
}

bool Reader::has(std::string_view key) const { return obj_.contains(key); }

const json& Reader::at(std::string_view key) const {
  auto it = obj_.find(key);
  if (it == obj_.end()) throw SchemaViolation(path(key) + ": missing required field");
  return *it;
}

double as_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaViolation(where + ": expected a number");
  return v.get<double>();
}

std::int64_t as_integer(const json& v, const std::string& where) {
  if (v.is_number_integer()) return v.get<std::int64_t>();
  throw SchemaViolation(where + ": expected an integer");
}

double Reader::number(std::string_view key) const { return as_number(at(key), path(key)); }

double Reader::number_or(std::string_view key, double fallback) const {
  return has(key) ? number(key) : fallback;
}

std::int64_t Reader::integer(std::string_view key) const { return as_integer(at(key), path(key)); }

std::int64_t Reader::integer_or(std::string_view key, std::int64_t fallback) const {
  return has(key) ? integer(key) : fallback;
}

std::uint64_t Reader::uinteger(std::string_view key) const {
  const json& v = at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v.get<std::int64_t>());
  throw SchemaViolation(path(key) + ": expected a non-negative integer");
}

std::uint64_t Reader::uinteger_or(std::string_view key, std::uint64_t fallback) const {
  return has(key) ? uinteger(key) : fallback;
}

std::string Reader::string(std::string_view key) const {
  const json& v = at(key);
  if (!v.is_string()) throw SchemaViolation(path(key) + ": expected a string");
  return v.get<std::string>();
}

std::string Reader::string_or(std::string_view key, std::string fallback) const {
  return has(key) ? string(key) : fallback;
}

bool Reader::boolean_or(std::string_view key, bool fallback) const {
  if (!has(key)) return fallback;
  const json& v = at(key);
  if (!v.is_boolean()) throw SchemaViolation(path(key) + ": expected a boolean");
  return v.get<bool>();
}

const json& Reader::array(std::string_view key) const {
  const json& v = at(key);
  if (!v.is_array()) throw SchemaViolation(path(key) + ": expected an array");
  return v;
}

const json& Reader::object(std::string_view key) const {
  const json& v = at(key);
  if (!v.is_object()) throw SchemaViolation(path(key) + ": expected an object");
  return v;
}

}  // namespace packlab::json_util
