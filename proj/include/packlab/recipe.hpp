#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace packlab {

enum class VolumeMode { box3d, plane2d, sphere_surface };
enum class PointSelection { random, ordered };
enum class IngredientOrder { by_radius_desc, random_interleave };

std::string_view to_string(VolumeMode m) noexcept;
std::string_view to_string(PointSelection p) noexcept;
std::string_view to_string(IngredientOrder o) noexcept;

/// The region being packed.
///
/// box3d spans [0, x] x [0, y] x [0, z]. plane2d is the degenerate box with
/// z = 0 and circles are spheres whose centers have z = 0. sphere_surface is
/// the sphere of radius extents[0] centered at the origin; instances are
/// placed with their centers on the surface.
struct PackingVolume {
  VolumeMode mode = VolumeMode::box3d;
  std::array<double, 3> extents{};
  bool periodic = false;

  bool is_planar() const noexcept { return mode == VolumeMode::plane2d; }
  bool is_surface() const noexcept { return mode == VolumeMode::sphere_surface; }
  int active_axes() const noexcept { return mode == VolumeMode::box3d ? 3 : 2; }
  double surface_radius() const noexcept { return extents[0]; }

  /// Volume, area, or surface area depending on mode.
  double measure() const noexcept;

  friend bool operator==(const PackingVolume&, const PackingVolume&) = default;
};

struct PartnerSpec {
  std::string partner_name;
  double weight = 0.0;
  double binding_distance = 1.0;

  friend bool operator==(const PartnerSpec&, const PartnerSpec&) = default;
};

struct Ingredient {
  std::string name;
  double radius = 1.0;
  std::int64_t count_requested = 0;
  std::int64_t nb_jitter = 10;
  double jitter_max = 0.0;
  std::int64_t rejection_threshold = 100;
  std::vector<PartnerSpec> partners;

  friend bool operator==(const Ingredient&, const Ingredient&) = default;
};

struct GeneralParams {
  double grid_spacing = 1.0;
  PointSelection point_selection = PointSelection::random;
  std::uint64_t seed = 0;
  IngredientOrder ingredient_order = IngredientOrder::by_radius_desc;

  friend bool operator==(const GeneralParams&, const GeneralParams&) = default;
};

struct Recipe {
  std::string name;
  PackingVolume volume;
  std::vector<Ingredient> ingredients;
  GeneralParams defaults;

  const Ingredient* find(std::string_view ingredient) const noexcept;
  Ingredient* find(std::string_view ingredient) noexcept;

  friend bool operator==(const Recipe&, const Recipe&) = default;
};

inline constexpr std::int64_t kDefaultNbJitter = 10;
inline constexpr std::int64_t kDefaultRejectionThreshold = 100;

/// Parses a recipe document. Omitted per-ingredient parameters are filled
/// with the defaults above; jitter_max defaults to the grid spacing, and the
/// grid spacing defaults to the smallest ingredient radius.
///
/// Throws MalformedDocument, SchemaViolation or ValidationError.
Recipe parse_recipe(std::string_view text);
Recipe recipe_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Recipe& recipe);

/// Every invariant violation, in a stable order. Empty means valid.
std::vector<std::string> validate_recipe(const Recipe& recipe);

/// Ingredient names are restricted so they can appear in dotted parameter paths.
bool is_valid_identifier(std::string_view name) noexcept;

}  // namespace packlab
