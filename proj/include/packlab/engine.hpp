#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "packlab/geometry.hpp"
#include "packlab/params.hpp"
#include "packlab/recipe.hpp"
#include "packlab/rng.hpp"
#include "packlab/vec3.hpp"

namespace packlab {

struct PlacedInstance {
  std::string ingredient;
  Vec3 position;
  double radius = 0.0;

  friend bool operator==(const PlacedInstance&, const PlacedInstance&) = default;
};

struct ConfigRef {
  std::int64_t run_index = 0;
  Assignment assignment;

  friend bool operator==(const ConfigRef&, const ConfigRef&) = default;
};

struct PackingOutput {
  std::vector<PlacedInstance> instances;
  std::uint64_t seed = 0;
  double runtime_seconds = 0.0;
  std::map<std::string, std::int64_t> placed_counts;
  std::map<std::string, std::int64_t> requested_counts;
  ConfigRef config_ref;

  friend bool operator==(const PackingOutput&, const PackingOutput&) = default;
};

nlohmann::json to_json(const PackingOutput& out);
PackingOutput packing_output_from_json(const nlohmann::json& j);

/// Candidate drop points with an occupancy bitmap. Free points are kept in
/// a swap-remove list so uniform selection is O(1).
class Grid {
 public:
  Grid(std::vector<Vec3> points, double spacing, const PackingVolume& volume);

  std::span<const Vec3> points() const noexcept { return points_; }
  double spacing() const noexcept { return spacing_; }
  std::size_t size() const noexcept { return points_.size(); }
  std::size_t free_count() const noexcept { return free_list_.size(); }
  bool is_free(std::size_t i) const noexcept { return free_flags_[i] != 0; }

  void occupy(std::size_t i);
  // Marks every point within `radius` of `center`; returns how many changed.
  std::size_t occupy_within(Vec3 center, double radius);

  std::optional<std::size_t> random_free(Rng& rng) const;
  std::optional<std::size_t> first_free() const;

 private:
  std::vector<Vec3> points_;
  double spacing_;
  Geometry geometry_;
  CellIndex index_;
  std::vector<std::uint8_t> free_flags_;
  std::vector<std::uint32_t> free_list_;
  std::vector<std::uint32_t> slot_;
  mutable std::size_t cursor_ = 0;
};

/// box: ceil(x/s) * ceil(y/s) * ceil(z/s) cell centers; plane: the z = 0
/// layer; sphere_surface: ceil(4 pi R^2 / s^2) Fibonacci-spiral points.
/// Throws EmptyGrid for an unusable spacing.
Grid build_grid(const PackingVolume& volume, double spacing);

/// Placed instances with a bucket index for neighbor queries. Counts the
/// pair distance tests it performs.
class PackingSpace {
 public:
  PackingSpace(const PackingVolume& volume, std::span<const std::string> ingredient_names, double max_radius);

  const Geometry& geometry() const noexcept { return geometry_; }
  const PackingVolume& volume() const noexcept { return geometry_.volume(); }

  bool collision_free(Vec3 pos, double radius) const;
  void add(std::size_t ingredient_index, Vec3 pos, double radius);

  std::span<const PlacedInstance> instances() const noexcept { return instances_; }
  std::span<const std::uint32_t> instances_of(std::size_t ingredient_index) const noexcept {
    return by_ingredient_[ingredient_index];
  }
  std::size_t ingredient_index(std::string_view name) const;

  std::uint64_t pair_tests() const noexcept { return pair_tests_; }

 private:
  Geometry geometry_;
  std::vector<std::string> names_;
  double max_radius_;
  CellIndex index_;
  std::vector<PlacedInstance> instances_;
  std::vector<std::vector<std::uint32_t>> by_ingredient_;
  mutable std::uint64_t pair_tests_ = 0;
};

/// Reference check: Euclidean (minimum-image when periodic) distance test
/// against every placed instance, plus containment for bounded volumes.
bool collision_free(Vec3 pos, double radius, std::span<const PlacedInstance> placed, const PackingVolume& volume);

struct DropPoint {
  Vec3 position;
  bool partner_biased = false;
};

/// Next drop point for `ing`. With probability w (the weight of the
/// heaviest partner that has placed instances) the point is drawn uniformly
/// within binding_distance of a random placed partner instance; otherwise
/// it is a free grid point. No random draw is made when w = 0.
/// Throws NoFreePoint when the grid branch is taken and no point is free.
DropPoint choose_drop_point(const Grid& grid, const PackingSpace& space, const Ingredient& ing,
                            PointSelection selection, Rng& rng);

struct PlacementAttempt {
  std::optional<Vec3> position;
  int candidates_tested = 0;
};

/// Tests the drop point, then up to nb_jitter - 1 jittered candidates.
PlacementAttempt attempt_place(const Ingredient& ing, Vec3 drop_point, const PackingSpace& space, Rng& rng);

enum class RuntimeClock {
  // Deterministic cost model over counted work; outputs stay byte-identical.
  modeled,
  // Measured wall-clock time.
  wall,
};

struct PackOptions {
  RuntimeClock clock = RuntimeClock::modeled;
};

// Cost model constants for RuntimeClock::modeled, in seconds.
inline constexpr double kCandidateCost = 1e-7;
inline constexpr double kPairTestCost = 1e-8;
inline constexpr double kGridMarkCost = 1e-8;

/// Runs one seeded packing. Throws ValidationError on an invalid recipe or
/// assignment; geometric frustration only lowers the placed counts.
PackingOutput pack(const Recipe& recipe, const Assignment& assignment, std::uint64_t seed,
                   std::int64_t run_index = 0, PackOptions options = {});

/// Uniform point in the ball (3D), disk (plane), or tangent disk projected
/// back onto the sphere (surface) of the given radius around `center`.
Vec3 jitter_point(const PackingVolume& volume, Vec3 center, double radius, Rng& rng);

/// Uniform point within distance `radius` of `center`, restricted to the
/// volume's manifold (plane or sphere surface).
Vec3 sample_near(const PackingVolume& volume, Vec3 center, double radius, Rng& rng);

}  // namespace packlab
