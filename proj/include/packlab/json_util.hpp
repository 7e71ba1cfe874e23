#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

namespace packlab::json_util {

using nlohmann::json;

/// Parses text, mapping syntax errors to MalformedDocument.
json parse(std::string_view text);

/// Canonical serialization: sorted keys (nlohmann's default object map),
/// shortest round-trip doubles, no whitespace. Used for hashing and for
/// every file the store writes.
std::string dump(const json& j);

/// Strict accessors over a JSON object. Every failure is a SchemaViolation
/// whose message carries the dotted location of the offending field.
class Reader {
 public:
  Reader(const json& obj, std::string where);

  // Rejects keys not listed.
  void allow_only(std::initializer_list<std::string_view> keys) const;

  bool has(std::string_view key) const;
  const json& at(std::string_view key) const;

  double number(std::string_view key) const;
  double number_or(std::string_view key, double fallback) const;
  std::int64_t integer(std::string_view key) const;
  std::int64_t integer_or(std::string_view key, std::int64_t fallback) const;
  std::uint64_t uinteger(std::string_view key) const;
  std::uint64_t uinteger_or(std::string_view key, std::uint64_t fallback) const;
  std::string string(std::string_view key) const;
  std::string string_or(std::string_view key, std::string fallback) const;
  bool boolean_or(std::string_view key, bool fallback) const;
  const json& array(std::string_view key) const;
  const json& object(std::string_view key) const;

  std::string path(std::string_view key) const;
  const std::string& where() const noexcept { return where_; }

 private:
  const json& obj_;
  std::string where_;
};

double as_number(const json& v, const std::string& where);
std::int64_t as_integer(const json& v, const std::string& where);

}  // namespace packlab::json_util
