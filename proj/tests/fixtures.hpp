#pragma once

// Recipes and experiments shared by the unit and acceptance suites.

#include <string>

#include "packlab/recipe.hpp"
#include "packlab/sampler.hpp"

namespace fixtures {

// Plane sized so about 30 radius-5 circles fit (67 x 67; calibrated with
// generous budgets: 27..31 placed over 20 seeds).
inline packlab::Recipe overpack_recipe() {
  return packlab::parse_recipe(R"({
    "name": "overpack_plane",
    "volume": {"mode": "plane2d", "extents": [67, 67, 0]},
    "defaults": {"grid_spacing": 1},
    "ingredients": [{"name": "sphere", "radius": 5, "count": 40, "jitter_max": 5}]
  })");
}

inline packlab::ParameterSpec even_integer(std::string target, double lo, double hi, int k) {
  packlab::ParameterSpec s;
  s.target = std::move(target);
  s.kind = packlab::ParamKind::integer;
  s.interval = packlab::ParameterSpec::Interval{lo, hi};
  s.method = packlab::SamplingMethod::even;
  s.k_steps = k;
  return s;
}

// count 10..40 x nbJitter 5..500 x rejectionThreshold 30..300, N = 10, R = 5.
inline packlab::ExperimentConfig overpack_experiment() {
  packlab::ExperimentConfig cfg;
  cfg.recipe = overpack_recipe();
  cfg.specs = {even_integer("ingredient.sphere.count", 10, 40, 4),
               even_integer("ingredient.sphere.nb_jitter", 5, 500, 10),
               even_integer("ingredient.sphere.rejection_threshold", 30, 300, 10)};
  cfg.n_configs = 10;
  cfg.r_seeds = 5;
  cfg.base_seed = 7;
  return cfg;
}

// Large anchors A and small dependents B that may bind to A.
inline packlab::Recipe binding_recipe(bool with_partner, double weight = 0.0) {
  std::string partners =
      with_partner ? R"(, "partners": [{"name": "A", "weight": )" + std::to_string(weight) +
                         R"(, "binding_distance": 14}])"
                   : "";
  return packlab::parse_recipe(R"({
    "name": "binding_plane",
    "volume": {"mode": "plane2d", "extents": [100, 100, 0]},
    "defaults": {"grid_spacing": 1},
    "ingredients": [
      {"name": "A", "radius": 6, "count": 8, "jitter_max": 3},
      {"name": "B", "radius": 2, "count": 40, "jitter_max": 1)" +
                               partners + R"(}
    ]
  })");
}

// Sphere surface R = 20 with 120 radius-1.5 instances: occupancy 120 * pi * 1.5^2 / (4 pi 400) = 16.9%.
inline packlab::Recipe surface_recipe(double self_weight) {
  return packlab::parse_recipe(R"({
    "name": "surface",
    "volume": {"mode": "sphere_surface", "extents": [20, 0, 0]},
    "defaults": {"grid_spacing": 1},
    "ingredients": [{"name": "protein", "radius": 1.5, "count": 120, "jitter_max": 1,
                     "partners": [{"name": "protein", "weight": )" +
                               std::to_string(self_weight) + R"(, "binding_distance": 4}]}]
  })");
}

}  // namespace fixtures
