#include "packlab/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"

namespace packlab {

using json_util::json;

// ---------------------------------------------------------------- grid

Grid::Grid(std::vector<Vec3> points, double spacing, const PackingVolume& volume)
    : points_(std::move(points)),
      spacing_(spacing),
      geometry_(volume),
      index_(geometry_, 2.0 * spacing),
      free_flags_(points_.size(), 1),
      free_list_(points_.size()),
      slot_(points_.size()) {
  for (std::uint32_t i = 0; i < points_.size(); ++i) {
    free_list_[i] = i;
    slot_[i] = i;
    index_.insert(i, points_[i]);
  }
}

void Grid::occupy(std::size_t i) {
  if (!free_flags_[i]) return;
  free_flags_[i] = 0;
  const std::uint32_t s = slot_[i];
  const std::uint32_t last = free_list_.back();
  free_list_[s] = last;
  slot_[last] = s;
  free_list_.pop_back();
}

std::size_t Grid::occupy_within(Vec3 center, double radius) {
  std::size_t changed = 0;
  index_.for_each_near(center, radius, [&](std::uint32_t id) {
    if (free_flags_[id] && geometry_.distance(center, points_[id]) <= radius) {
      occupy(id);
      ++changed;
    }
  });
  return changed;
}

std::optional<std::size_t> Grid::random_free(Rng& rng) const {
  if (free_list_.empty()) return std::nullopt;
  return free_list_[rng.below(free_list_.size())];
}

std::optional<std::size_t> Grid::first_free() const {
  while (cursor_ < points_.size() && !free_flags_[cursor_]) ++cursor_;
  if (cursor_ == points_.size()) return std::nullopt;
  return cursor_;
}

namespace {
constexpr double kMaxGridPoints = 5.0e7;
}  // namespace

Grid build_grid(const PackingVolume& volume, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw EmptyGrid("grid spacing must be positive");
  std::vector<Vec3> pts;
  if (volume.is_surface()) {
    const double R = volume.surface_radius();
    const double want = std::ceil(4.0 * std::numbers::pi * R * R / (spacing * spacing));
    if (!(want >= 1.0) || want > kMaxGridPoints) throw EmptyGrid("sphere grid size out of range");
    const auto n = static_cast<std::size_t>(want);
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Equal-area bands in z; golden-angle longitude.
      const double z = 1.0 - (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
      const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden_angle * static_cast<double>(i);
      pts.push_back({R * rho * std::cos(phi), R * rho * std::sin(phi), R * z});
    }
    return Grid(std::move(pts), spacing, volume);
  }

  std::array<std::size_t, 3> n{1, 1, 1};
  double total = 1.0;
  for (int a = 0; a < volume.active_axes(); ++a) {
    const double cells = std::ceil(volume.extents[static_cast<std::size_t>(a)] / spacing);
    if (!(cells >= 1.0)) throw EmptyGrid("volume extent too small for the grid");
    total *= cells;
    n[static_cast<std::size_t>(a)] = static_cast<std::size_t>(cells);
  }
  if (total > kMaxGridPoints) throw EmptyGrid("grid has too many points");
  pts.reserve(static_cast<std::size_t>(total));
  auto center = [&](std::size_t axis, std::size_t i) {
    if (axis >= static_cast<std::size_t>(volume.active_axes())) return 0.0;
    return (static_cast<double>(i) + 0.5) * volume.extents[axis] / static_cast<double>(n[axis]);
  };
  for (std::size_t i = 0; i < n[0]; ++i) {
    for (std::size_t j = 0; j < n[1]; ++j) {
      for (std::size_t k = 0; k < n[2]; ++k) pts.push_back({center(0, i), center(1, j), center(2, k)});
    }
  }
  return Grid(std::move(pts), spacing, volume);
}

// ---------------------------------------------------------------- collision

bool collision_free(Vec3 pos, double radius, std::span<const PlacedInstance> placed, const PackingVolume& volume) {
  const Geometry g(volume);
  if (!g.contains(pos, radius)) return false;
  for (const auto& q : placed) {
    const double sum = radius + q.radius;
    if (g.distance(pos, q.position) < sum - 1e-9 * sum) return false;
  }
  return true;
}

PackingSpace::PackingSpace(const PackingVolume& volume, std::span<const std::string> ingredient_names,
                           double max_radius)
    : geometry_(volume),
      names_(ingredient_names.begin(), ingredient_names.end()),
      max_radius_(max_radius),
      index_(geometry_, std::max(2.0 * max_radius, 1e-9)),
      by_ingredient_(names_.size()) {}

std::size_t PackingSpace::ingredient_index(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ValidationError({"unknown ingredient '" + std::string(name) + "'"});
  return static_cast<std::size_t>(it - names_.begin());
}

bool PackingSpace::collision_free(Vec3 pos, double radius) const {
  if (!geometry_.contains(pos, radius)) return false;
  bool ok = true;
  index_.for_each_near(pos, radius + max_radius_, [&](std::uint32_t id) {
    if (!ok) return;
    const auto& q = instances_[id];
    ++pair_tests_;
    const double sum = radius + q.radius;
    if (geometry_.distance(pos, q.position) < sum - 1e-9 * sum) ok = false;
  });
  return ok;
}

void PackingSpace::add(std::size_t ingredient_index, Vec3 pos, double radius) {
  const auto id = static_cast<std::uint32_t>(instances_.size());
  pos = geometry_.wrap(pos);
  instances_.push_back({names_[ingredient_index], pos, radius});
  by_ingredient_[ingredient_index].push_back(id);
  index_.insert(id, pos);
}

// ---------------------------------------------------------------- sampling

namespace {

Vec3 in_unit_ball(Rng& rng, int dims) {
  for (;;) {
    Vec3 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), dims == 3 ? rng.uniform(-1.0, 1.0) : 0.0};
    if (dot(v, v) <= 1.0) return v;
  }
}

// Orthonormal tangent basis at unit normal n.
std::pair<Vec3, Vec3> tangent_basis(Vec3 n) {
  const Vec3 helper = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
  Vec3 t1 = cross(n, helper);
  t1 = (1.0 / norm(t1)) * t1;
  const Vec3 t2 = cross(n, t1);
  return {t1, t2};
}

Vec3 project_to_sphere(Vec3 p, double R) {
  const double len = norm(p);
  return (R / len) * p;
}

}  // namespace

Vec3 jitter_point(const PackingVolume& volume, Vec3 center, double radius, Rng& rng) {
  if (volume.is_surface()) {
    const double R = volume.surface_radius();
    const Vec3 n = (1.0 / norm(center)) * center;
    const auto [t1, t2] = tangent_basis(n);
    const Vec3 d = in_unit_ball(rng, 2);
    return project_to_sphere(center + radius * (d.x * t1 + d.y * t2), R);
  }
  const Vec3 d = in_unit_ball(rng, volume.is_planar() ? 2 : 3);
  return center + radius * d;
}

Vec3 sample_near(const PackingVolume& volume, Vec3 center, double radius, Rng& rng) {
  if (!volume.is_surface()) return jitter_point(volume, center, radius, rng);
  // Points within chord distance d of a surface point form a cap of height
  // d^2 / 2R; area-uniform sampling on a cap is uniform in height.
  const double R = volume.surface_radius();
  const double h = std::min(2.0 * R, radius * radius / (2.0 * R));
  const double z = R - h * rng.uniform();
  const double phi = 2.0 * std::numbers::pi * rng.uniform();
  const double rho = std::sqrt(std::max(0.0, R * R - z * z));
  const Vec3 n = (1.0 / norm(center)) * center;
  const auto [t1, t2] = tangent_basis(n);
  return project_to_sphere(z * n + rho * std::cos(phi) * t1 + rho * std::sin(phi) * t2, R);
}

DropPoint choose_drop_point(const Grid& grid, const PackingSpace& space, const Ingredient& ing,
                            PointSelection selection, Rng& rng) {
  // Heaviest partner first; listing order breaks ties.
  std::vector<const PartnerSpec*> partners;
  for (const auto& p : ing.partners) partners.push_back(&p);
  std::stable_sort(partners.begin(), partners.end(),
                   [](const PartnerSpec* a, const PartnerSpec* b) { return a->weight > b->weight; });
  for (const PartnerSpec* p : partners) {
    const auto& placed = space.instances_of(space.ingredient_index(p->partner_name));
    if (placed.empty()) continue;
    if (p->weight <= 0.0) break;
    if (!rng.bernoulli(p->weight)) break;
    const auto& anchor = space.instances()[placed[rng.below(placed.size())]];
    Vec3 pos = sample_near(space.volume(), anchor.position, p->binding_distance, rng);
    return {space.geometry().wrap(pos), true};
  }

  const auto idx = selection == PointSelection::random ? grid.random_free(rng) : grid.first_free();
  if (!idx) throw NoFreePoint();
  return {grid.points()[*idx], false};
}

PlacementAttempt attempt_place(const Ingredient& ing, Vec3 drop_point, const PackingSpace& space, Rng& rng) {
  PlacementAttempt out;
  const auto& geo = space.geometry();
  for (std::int64_t t = 0; t < ing.nb_jitter; ++t) {
    Vec3 candidate = drop_point;
    if (t > 0 && ing.jitter_max > 0.0) candidate = geo.wrap(jitter_point(space.volume(), drop_point, ing.jitter_max, rng));
    ++out.candidates_tested;
    if (space.collision_free(candidate, ing.radius)) {
      out.position = candidate;
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------- pack

PackingOutput pack(const Recipe& base, const Assignment& assignment, std::uint64_t seed, std::int64_t run_index,
                   PackOptions options) {
  const auto started = std::chrono::steady_clock::now();
  const Recipe recipe = apply_assignment(base, assignment);
  const auto& ings = recipe.ingredients;
  const std::size_t n = ings.size();

  Rng rng(seed);
  Grid grid = build_grid(recipe.volume, recipe.defaults.grid_spacing);

  std::vector<std::string> names;
  double max_radius = 0.0;
  for (const auto& ing : ings) {
    names.push_back(ing.name);
    max_radius = std::max(max_radius, ing.radius);
  }
  PackingSpace space(recipe.volume, names, max_radius);

  std::vector<std::size_t> by_size(n);
  std::iota(by_size.begin(), by_size.end(), std::size_t{0});
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](std::size_t a, std::size_t b) { return ings[a].radius > ings[b].radius; });

  std::vector<std::int64_t> placed(n, 0);
  std::vector<std::int64_t> failures(n, 0);
  std::vector<bool> exhausted(n);
  for (std::size_t i = 0; i < n; ++i) exhausted[i] = ings[i].count_requested == 0;

  auto next_ingredient = [&]() -> std::optional<std::size_t> {
    if (recipe.defaults.ingredient_order == IngredientOrder::by_radius_desc) {
      for (std::size_t i : by_size) {
        if (!exhausted[i]) return i;
      }
      return std::nullopt;
    }
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (!exhausted[i]) total += static_cast<std::uint64_t>(ings[i].count_requested - placed[i]);
    }
    if (total == 0) return std::nullopt;
    std::uint64_t pick = rng.below(total);
    for (std::size_t i = 0; i < n; ++i) {
      if (exhausted[i]) continue;
      const auto w = static_cast<std::uint64_t>(ings[i].count_requested - placed[i]);
      if (pick < w) return i;
      pick -= w;
    }
    return std::nullopt;
  };

  std::uint64_t candidates = 0;
  std::uint64_t marks = 0;
  while (auto next = next_ingredient()) {
    const std::size_t i = *next;
    const Ingredient& ing = ings[i];
    DropPoint drop;
    try {
      drop = choose_drop_point(grid, space, ing, recipe.defaults.point_selection, rng);
    } catch (const NoFreePoint&) {
      exhausted[i] = true;
      continue;
    }
    const PlacementAttempt attempt = attempt_place(ing, drop.position, space, rng);
    candidates += static_cast<std::uint64_t>(attempt.candidates_tested);
    if (attempt.position) {
      space.add(i, *attempt.position, ing.radius);
      marks += grid.occupy_within(*attempt.position, ing.radius);
      failures[i] = 0;
      if (++placed[i] == ing.count_requested) exhausted[i] = true;
    } else if (++failures[i] >= ing.rejection_threshold) {
      exhausted[i] = true;
    }
  }

  PackingOutput out;
  out.instances.assign(space.instances().begin(), space.instances().end());
  out.seed = seed;
  out.config_ref = {run_index, assignment};
  for (std::size_t i = 0; i < n; ++i) {
    out.placed_counts[ings[i].name] = placed[i];
    out.requested_counts[ings[i].name] = ings[i].count_requested;
  }
  if (options.clock == RuntimeClock::wall) {
    out.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  } else {
    out.runtime_seconds = static_cast<double>(candidates) * kCandidateCost +
                          static_cast<double>(space.pair_tests()) * kPairTestCost +
                          static_cast<double>(marks) * kGridMarkCost;
  }
  return out;
}

// ---------------------------------------------------------------- serialization

json to_json(const PackingOutput& out) {
  json instances = json::array();
  for (const auto& inst : out.instances) {
    instances.push_back({{"ingredient", inst.ingredient},
                         {"position", {inst.position.x, inst.position.y, inst.position.z}},
                         {"radius", inst.radius}});
  }
  return {{"seed", out.seed},
          {"runtime_seconds", out.runtime_seconds},
          {"config_ref", {{"run_index", out.config_ref.run_index}, {"assignment", to_json(out.config_ref.assignment)}}},
          {"instances", std::move(instances)},
          {"placed_counts", out.placed_counts},
          {"requested_counts", out.requested_counts}};
}

PackingOutput packing_output_from_json(const json& j) {
  json_util::Reader r(j, "output");
  r.allow_only({"seed", "runtime_seconds", "config_ref", "instances", "placed_counts", "requested_counts"});
  PackingOutput out;
  out.seed = r.uinteger("seed");
  out.runtime_seconds = r.number("runtime_seconds");
  json_util::Reader c(r.object("config_ref"), "output.config_ref");
  out.config_ref.run_index = c.integer("run_index");
  out.config_ref.assignment = assignment_from_json(c.object("assignment"), "output.config_ref.assignment");
  const json& instances = r.array("instances");
  for (std::size_t k = 0; k < instances.size(); ++k) {
    json_util::Reader ir(instances[k], "output.instances[" + std::to_string(k) + "]");
    PlacedInstance inst;
    inst.ingredient = ir.string("ingredient");
    const json& pos = ir.array("position");
    if (pos.size() != 3) throw SchemaViolation(ir.path("position") + ": expected 3 numbers");
    for (int a = 0; a < 3; ++a) inst.position[a] = json_util::as_number(pos[static_cast<std::size_t>(a)], ir.path("position"));
    inst.radius = ir.number("radius");
    out.instances.push_back(std::move(inst));
  }
  for (const auto& [k, v] : r.object("placed_counts").items()) out.placed_counts[k] = json_util::as_integer(v, "placed_counts");
  for (const auto& [k, v] : r.object("requested_counts").items()) {
    out.requested_counts[k] = json_util::as_integer(v, "requested_counts");
  }
  return out;
}

}  // namespace packlab
