#include "packlab/params.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"

namespace packlab {

using nlohmann::json;

std::string_view to_string(ParamKind k) noexcept {
  switch (k) {
    case ParamKind::numeric: return "numeric";
    case ParamKind::integer: return "integer";
    case ParamKind::categorical: return "categorical";
  }
  return "?";
}

std::optional<ParamKind> param_kind_from_string(std::string_view s) noexcept {
  for (auto k : {ParamKind::numeric, ParamKind::integer, ParamKind::categorical}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

const std::vector<std::pair<std::string_view, ParamKind>> kGlobalFields = {
    {"grid_spacing", ParamKind::numeric},
    {"point_selection", ParamKind::categorical},
    {"ingredient_order", ParamKind::categorical},
};

const std::vector<std::pair<std::string_view, ParamKind>> kIngredientFields = {
    {"radius", ParamKind::numeric},         {"count", ParamKind::integer},
    {"nb_jitter", ParamKind::integer},      {"jitter_max", ParamKind::numeric},
    {"rejection_threshold", ParamKind::integer},
};

const std::vector<std::pair<std::string_view, ParamKind>> kPartnerFields = {
    {"weight", ParamKind::numeric},
    {"binding_distance", ParamKind::numeric},
};

std::optional<ParamKind> lookup(const std::vector<std::pair<std::string_view, ParamKind>>& table,
                                std::string_view field) {
  for (const auto& [name, kind] : table) {
    if (name == field) return kind;
  }
  return std::nullopt;
}

[[noreturn]] void bad_path(std::string_view path, const std::string& why) {
  throw ValidationError({"parameter '" + std::string(path) + "': " + why});
}

}  // namespace

ParamKind ParamPath::kind() const noexcept {
  if (scope == Scope::global) return *lookup(kGlobalFields, field);
  if (!partner.empty()) return *lookup(kPartnerFields, field);
  return *lookup(kIngredientFields, field);
}

ParamPath parse_param_path(std::string_view path) {
  // Ingredient selectors may contain commas but never dots.
  auto parts = split(path, '.');
  ParamPath p;
  if (parts.size() == 2 && parts[0] == "global") {
    p.scope = ParamPath::Scope::global;
    p.field = parts[1];
    if (!lookup(kGlobalFields, p.field)) bad_path(path, "unknown global field '" + p.field + "'");
    return p;
  }
  if (parts.size() >= 3 && parts[0] == "ingredient") {
    p.scope = ParamPath::Scope::ingredient;
    p.selector = parts[1];
    if (p.selector.empty()) bad_path(path, "empty ingredient selector");
    if (parts.size() == 3) {
      p.field = parts[2];
      if (!lookup(kIngredientFields, p.field)) bad_path(path, "unknown ingredient field '" + p.field + "'");
      return p;
    }
    if (parts.size() == 5 && parts[2] == "partner") {
      p.partner = parts[3];
      p.field = parts[4];
      if (p.partner.empty()) bad_path(path, "empty partner name");
      if (!lookup(kPartnerFields, p.field)) bad_path(path, "unknown partner field '" + p.field + "'");
      return p;
    }
  }
  bad_path(path, "expected global.<field> or ingredient.<name>.<field>");
}

std::vector<std::string> selected_ingredients(const Recipe& recipe, const ParamPath& path) {
  std::vector<std::string> out;
  if (path.scope == ParamPath::Scope::global) return out;
  if (path.selector == "*") {
    for (const auto& ing : recipe.ingredients) out.push_back(ing.name);
    return out;
  }
  auto wanted = split(path.selector, ',');
  for (const auto& ing : recipe.ingredients) {
    if (std::find(wanted.begin(), wanted.end(), ing.name) != wanted.end()) out.push_back(ing.name);
  }
  return out;
}

std::vector<std::string> check_param_path(const Recipe& recipe, std::string_view path) {
  ParamPath p;
  try {
    p = parse_param_path(path);
  } catch (const ValidationError& e) {
    return e.violations();
  }
  std::vector<std::string> out;
  const std::string who = "parameter '" + std::string(path) + "': ";
  if (p.scope == ParamPath::Scope::global) return out;
  if (p.selector != "*") {
    for (const auto& name : split(p.selector, ',')) {
      if (!recipe.find(name)) out.push_back(who + "ingredient '" + name + "' is not defined");
    }
  }
  if (!p.partner.empty()) {
    for (const auto& name : selected_ingredients(recipe, p)) {
      const Ingredient* ing = recipe.find(name);
      bool has = std::any_of(ing->partners.begin(), ing->partners.end(),
                             [&](const PartnerSpec& s) { return s.partner_name == p.partner; });
      if (!has) out.push_back(who + "ingredient '" + name + "' has no partner '" + p.partner + "'");
    }
  }
  return out;
}

std::vector<std::string> categorical_options(const ParamPath& path) {
  if (path.field == "point_selection") return {"random", "ordered"};
  if (path.field == "ingredient_order") return {"by_radius_desc", "random_interleave"};
  return {};
}

std::optional<double> numeric_value(const ParamValue& v) noexcept {
  if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto d = std::get_if<double>(&v)) return *d;
  return std::nullopt;
}

std::string display(const ParamValue& v) {
  if (auto s = std::get_if<std::string>(&v)) return *s;
  return json_util::dump(to_json(v));
}

namespace {

double want_number(std::string_view path, const ParamValue& v) {
  auto d = numeric_value(v);
  if (!d) bad_path(path, "expected a number");
  return *d;
}

std::int64_t want_integer(std::string_view path, const ParamValue& v) {
  if (auto i = std::get_if<std::int64_t>(&v)) return *i;
  if (auto d = std::get_if<double>(&v); d && std::isfinite(*d) && std::floor(*d) == *d) {
    return static_cast<std::int64_t>(*d);
  }
  bad_path(path, "expected an integer");
}

const std::string& want_string(std::string_view path, const ParamValue& v) {
  if (auto s = std::get_if<std::string>(&v)) return *s;
  bad_path(path, "expected a category name");
}

}  // namespace

void apply_override(Recipe& recipe, std::string_view path, const ParamValue& value) {
  const ParamPath p = parse_param_path(path);
  if (auto problems = check_param_path(recipe, path); !problems.empty()) throw ValidationError(problems);

  if (p.scope == ParamPath::Scope::global) {
    auto& g = recipe.defaults;
    if (p.field == "grid_spacing") {
      g.grid_spacing = want_number(path, value);
    } else if (p.field == "point_selection") {
      const auto& s = want_string(path, value);
      if (s == "random") g.point_selection = PointSelection::random;
      else if (s == "ordered") g.point_selection = PointSelection::ordered;
      else bad_path(path, "unknown point_selection '" + s + "'");
    } else if (p.field == "ingredient_order") {
      const auto& s = want_string(path, value);
      if (s == "by_radius_desc") g.ingredient_order = IngredientOrder::by_radius_desc;
      else if (s == "random_interleave") g.ingredient_order = IngredientOrder::random_interleave;
      else bad_path(path, "unknown ingredient_order '" + s + "'");
    }
    return;
  }

  for (const auto& name : selected_ingredients(recipe, p)) {
    Ingredient& ing = *recipe.find(name);
    if (!p.partner.empty()) {
      for (auto& spec : ing.partners) {
        if (spec.partner_name != p.partner) continue;
        if (p.field == "weight") spec.weight = want_number(path, value);
        else spec.binding_distance = want_number(path, value);
      }
      continue;
    }
    if (p.field == "radius") ing.radius = want_number(path, value);
    else if (p.field == "count") ing.count_requested = want_integer(path, value);
    else if (p.field == "nb_jitter") ing.nb_jitter = want_integer(path, value);
    else if (p.field == "jitter_max") ing.jitter_max = want_number(path, value);
    else if (p.field == "rejection_threshold") ing.rejection_threshold = want_integer(path, value);
  }
}

Recipe apply_assignment(Recipe recipe, const Assignment& assignment) {
  for (const auto& [path, value] : assignment) apply_override(recipe, path, value);
  if (auto violations = validate_recipe(recipe); !violations.empty()) throw ValidationError(std::move(violations));
  return recipe;
}

json to_json(const ParamValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

ParamValue param_value_from_json(const json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw SchemaViolation(where + ": expected a number or string");
}

json to_json(const Assignment& a) {
  json out = json::object();
  for (const auto& [k, v] : a) out[k] = to_json(v);
  return out;
}

Assignment assignment_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaViolation(where + ": expected an object");
  Assignment a;
  for (const auto& [k, v] : j.items()) a[k] = param_value_from_json(v, where + "." + k);
  return a;
}

}  // namespace packlab
