#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "packlab/recipe.hpp"

namespace packlab {

// Parameter paths address one tunable field of a recipe:
//
//   global.grid_spacing | global.point_selection | global.ingredient_order
//   ingredient.<sel>.radius | count | nb_jitter | jitter_max | rejection_threshold
//   ingredient.<sel>.partner.<name>.weight | binding_distance
//
// <sel> is an ingredient name, a comma-separated group "A,B", or "*" for
// every ingredient.

enum class ParamKind { numeric, integer, categorical };

std::string_view to_string(ParamKind k) noexcept;
std::optional<ParamKind> param_kind_from_string(std::string_view s) noexcept;

using ParamValue = std::variant<std::int64_t, double, std::string>;

/// Sorted by path so iteration and serialization order are stable.
using Assignment = std::map<std::string, ParamValue>;

struct ParamPath {
  enum class Scope { global, ingredient };
  Scope scope = Scope::global;
  std::string selector;  // ingredient selector, empty for global
  std::string partner;   // partner name for partner.* fields
  std::string field;     // leaf field name

  // The natural kind of the addressed field.
  ParamKind kind() const noexcept;
};

/// Syntactic parse. Throws ValidationError on an unknown shape or field.
ParamPath parse_param_path(std::string_view path);

/// Ingredient names selected by the path, in recipe order.
/// Empty if the path is global.
std::vector<std::string> selected_ingredients(const Recipe& recipe, const ParamPath& path);

/// Violations when the path does not resolve against the recipe.
std::vector<std::string> check_param_path(const Recipe& recipe, std::string_view path);

/// Allowed values of a categorical field.
std::vector<std::string> categorical_options(const ParamPath& path);

/// Writes one value into the recipe. Throws ValidationError if the path
/// does not resolve or the value has an incompatible type.
void apply_override(Recipe& recipe, std::string_view path, const ParamValue& value);

/// Recipe with every override applied, then re-validated.
Recipe apply_assignment(Recipe recipe, const Assignment& assignment);

nlohmann::json to_json(const ParamValue& v);
ParamValue param_value_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const Assignment& a);
Assignment assignment_from_json(const nlohmann::json& j, const std::string& where);

// Number as double; nullopt for strings.
std::optional<double> numeric_value(const ParamValue& v) noexcept;
std::string display(const ParamValue& v);

}  // namespace packlab
