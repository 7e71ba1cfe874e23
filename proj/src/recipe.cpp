#include "packlab/recipe.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"

namespace packlab {

using json_util::json;
using json_util::Reader;

std::string_view to_string(VolumeMode m) noexcept {
  switch (m) {
    case VolumeMode::box3d: return "box3d";
    case VolumeMode::plane2d: return "plane2d";
    case VolumeMode::sphere_surface: return "sphere_surface";
  }
  return "?";
}

std::string_view to_string(PointSelection p) noexcept {
  return p == PointSelection::random ? "random" : "ordered";
}

std::string_view to_string(IngredientOrder o) noexcept {
  return o == IngredientOrder::by_radius_desc ? "by_radius_desc" : "random_interleave";
}

double PackingVolume::measure() const noexcept {
  switch (mode) {
    case VolumeMode::box3d: return extents[0] * extents[1] * extents[2];
    case VolumeMode::plane2d: return extents[0] * extents[1];
    case VolumeMode::sphere_surface: return 4.0 * std::numbers::pi * extents[0] * extents[0];
  }
  return 0.0;
}

const Ingredient* Recipe::find(std::string_view ingredient) const noexcept {
  auto it = std::find_if(ingredients.begin(), ingredients.end(),
                         [&](const Ingredient& i) { return i.name == ingredient; });
  return it == ingredients.end() ? nullptr : &*it;
}

Ingredient* Recipe::find(std::string_view ingredient) noexcept {
  return const_cast<Ingredient*>(std::as_const(*this).find(ingredient));
}

bool is_valid_identifier(std::string_view name) noexcept {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' || c == '-';
  });
}

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(const std::string& value, const std::array<Enum, N>& options, const std::string& where) {
  for (Enum e : options) {
    if (to_string(e) == value) return e;
  }
  std::string allowed;
  for (Enum e : options) {
    if (!allowed.empty()) allowed += ", ";
    allowed += to_string(e);
  }
  throw SchemaViolation(where + ": '" + value + "' is not one of {" + allowed + "}");
}

PackingVolume parse_volume(const json& j) {
  Reader r(j, "volume");
  r.allow_only({"mode", "extents", "periodic"});
  PackingVolume v;
  v.mode = parse_enum(r.string("mode"),
                      std::array{VolumeMode::box3d, VolumeMode::plane2d, VolumeMode::sphere_surface},
                      r.path("mode"));
  const json& ext = r.array("extents");
  if (ext.size() != 3) throw SchemaViolation("volume.extents: expected exactly 3 numbers");
  for (std::size_t i = 0; i < 3; ++i) {
    v.extents[i] = json_util::as_number(ext[i], "volume.extents[" + std::to_string(i) + "]");
  }
  v.periodic = r.boolean_or("periodic", false);
  return v;
}

PartnerSpec parse_partner(const json& j, const std::string& where) {
  Reader r(j, where);
  r.allow_only({"name", "weight", "binding_distance"});
  PartnerSpec p;
  p.partner_name = r.string("name");
  p.weight = r.number_or("weight", 0.0);
  p.binding_distance = r.number("binding_distance");
  return p;
}

}  // namespace

Recipe recipe_from_json(const json& doc) {
  Reader r(doc, "");
  r.allow_only({"name", "volume", "defaults", "ingredients"});

  Recipe recipe;
  recipe.name = r.string("name");
  recipe.volume = parse_volume(r.object("volume"));

  const json& ings = r.array("ingredients");
  bool spacing_given = false;
  if (r.has("defaults")) {
    Reader d(r.object("defaults"), "defaults");
    d.allow_only({"grid_spacing", "point_selection", "ingredient_order", "seed"});
    if (d.has("grid_spacing")) {
      recipe.defaults.grid_spacing = d.number("grid_spacing");
      spacing_given = true;
    }
    recipe.defaults.point_selection =
        parse_enum(d.string_or("point_selection", "random"),
                   std::array{PointSelection::random, PointSelection::ordered}, d.path("point_selection"));
    recipe.defaults.ingredient_order =
        parse_enum(d.string_or("ingredient_order", "by_radius_desc"),
                   std::array{IngredientOrder::by_radius_desc, IngredientOrder::random_interleave},
                   d.path("ingredient_order"));
    recipe.defaults.seed = d.uinteger_or("seed", 0);
  }

  std::vector<bool> jitter_given;
  for (std::size_t i = 0; i < ings.size(); ++i) {
    Reader ir(ings[i], "ingredients[" + std::to_string(i) + "]");
    ir.allow_only({"name", "radius", "count", "nb_jitter", "jitter_max", "rejection_threshold", "partners"});
    Ingredient ing;
    ing.name = ir.string("name");
    ing.radius = ir.number("radius");
    ing.count_requested = ir.integer("count");
    ing.nb_jitter = ir.integer_or("nb_jitter", kDefaultNbJitter);
    jitter_given.push_back(ir.has("jitter_max"));
    ing.jitter_max = ir.number_or("jitter_max", 0.0);
    ing.rejection_threshold = ir.integer_or("rejection_threshold", kDefaultRejectionThreshold);
    if (ir.has("partners")) {
      const json& ps = ir.array("partners");
      for (std::size_t k = 0; k < ps.size(); ++k) {
        ing.partners.push_back(parse_partner(ps[k], ir.path("partners") + "[" + std::to_string(k) + "]"));
      }
    }
    recipe.ingredients.push_back(std::move(ing));
  }

  if (!spacing_given && !recipe.ingredients.empty()) {
    double smallest = recipe.ingredients.front().radius;
    for (const auto& ing : recipe.ingredients) smallest = std::min(smallest, ing.radius);
    recipe.defaults.grid_spacing = smallest;
  }
  for (std::size_t i = 0; i < recipe.ingredients.size(); ++i) {
    if (!jitter_given[i]) recipe.ingredients[i].jitter_max = recipe.defaults.grid_spacing;
  }

  if (auto violations = validate_recipe(recipe); !violations.empty()) {
    throw ValidationError(std::move(violations));
  }
  return recipe;
}

Recipe parse_recipe(std::string_view text) { return recipe_from_json(json_util::parse(text)); }

json to_json(const Recipe& recipe) {
  json ings = json::array();
  for (const auto& ing : recipe.ingredients) {
    json partners = json::array();
    for (const auto& p : ing.partners) {
      partners.push_back({{"name", p.partner_name}, {"weight", p.weight}, {"binding_distance", p.binding_distance}});
    }
    ings.push_back({{"name", ing.name},
                    {"radius", ing.radius},
                    {"count", ing.count_requested},
                    {"nb_jitter", ing.nb_jitter},
                    {"jitter_max", ing.jitter_max},
                    {"rejection_threshold", ing.rejection_threshold},
                    {"partners", std::move(partners)}});
  }
  const auto& v = recipe.volume;
  return {{"name", recipe.name},
          {"volume",
           {{"mode", to_string(v.mode)},
            {"extents", {v.extents[0], v.extents[1], v.extents[2]}},
            {"periodic", v.periodic}}},
          {"defaults",
           {{"grid_spacing", recipe.defaults.grid_spacing},
            {"point_selection", to_string(recipe.defaults.point_selection)},
            {"ingredient_order", to_string(recipe.defaults.ingredient_order)},
            {"seed", recipe.defaults.seed}}},
          {"ingredients", std::move(ings)}};
}

std::vector<std::string> validate_recipe(const Recipe& recipe) {
  std::vector<std::string> out;
  auto fail = [&](std::string msg) { out.push_back(std::move(msg)); };
  auto finite = [](double x) { return std::isfinite(x); };

  const auto& v = recipe.volume;
  switch (v.mode) {
    case VolumeMode::box3d:
      for (int i = 0; i < 3; ++i) {
        if (!finite(v.extents[i]) || v.extents[i] <= 0) {
          fail("volume: extent " + std::to_string(i) + " must be > 0");
        }
      }
      break;
    case VolumeMode::plane2d:
      for (int i = 0; i < 2; ++i) {
        if (!finite(v.extents[i]) || v.extents[i] <= 0) {
          fail("volume: extent " + std::to_string(i) + " must be > 0");
        }
      }
      if (v.extents[2] != 0.0) fail("volume: plane2d requires z extent = 0");
      break;
    case VolumeMode::sphere_surface:
      if (!finite(v.extents[0]) || v.extents[0] <= 0) fail("volume: sphere radius must be > 0");
      if (v.periodic) fail("volume: periodic is not allowed for sphere_surface");
      break;
  }

  const auto& g = recipe.defaults;
  if (!finite(g.grid_spacing) || g.grid_spacing <= 0) {
    fail("defaults: grid_spacing must be > 0");
  } else {
    double smallest = v.extents[0];
    for (int i = 1; i < v.active_axes() && v.mode != VolumeMode::sphere_surface; ++i) {
      smallest = std::min(smallest, v.extents[i]);
    }
    if (smallest > 0 && g.grid_spacing > smallest) {
      fail("defaults: grid_spacing must not exceed the smallest volume extent");
    }
  }

  if (recipe.ingredients.empty()) fail("recipe: at least one ingredient is required");

  std::set<std::string> names;
  for (const auto& ing : recipe.ingredients) names.insert(ing.name);
  std::set<std::string> seen;
  for (const auto& ing : recipe.ingredients) {
    const std::string who = "ingredient " + ing.name + ": ";
    if (!is_valid_identifier(ing.name)) fail(who + "name must be non-empty and use only [A-Za-z0-9_-]");
    if (!seen.insert(ing.name).second) fail(who + "duplicate name");
    if (!finite(ing.radius) || ing.radius <= 0) fail(who + "radius must be > 0");
    if (ing.count_requested < 0) fail(who + "count must be >= 0");
    if (ing.nb_jitter < 1) fail(who + "nb_jitter must be >= 1");
    if (!finite(ing.jitter_max) || ing.jitter_max < 0) fail(who + "jitter_max must be >= 0");
    if (ing.rejection_threshold < 1) fail(who + "rejection_threshold must be >= 1");
    std::set<std::string> partner_seen;
    for (const auto& p : ing.partners) {
      if (!names.contains(p.partner_name)) fail(who + "partner '" + p.partner_name + "' is not defined");
      if (!partner_seen.insert(p.partner_name).second) fail(who + "partner '" + p.partner_name + "' listed twice");
      if (!(p.weight >= 0.0 && p.weight <= 1.0)) fail(who + "partner weight must be in [0, 1]");
      if (!finite(p.binding_distance) || p.binding_distance <= 0) {
        fail(who + "partner binding_distance must be > 0");
      }
    }
  }
  return out;
}

}  // namespace packlab
