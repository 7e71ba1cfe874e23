#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "packlab/params.hpp"
#include "packlab/recipe.hpp"

namespace packlab {

enum class SamplingMethod { even, uniform_random };

struct ParameterSpec {
  struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Interval&, const Interval&) = default;
  };

  std::string target;
  ParamKind kind = ParamKind::numeric;
  // Exactly one of interval / values is used; categorical specs always use values.
  std::optional<Interval> interval;
  std::vector<ParamValue> values;
  SamplingMethod method = SamplingMethod::even;
  int k_steps = 2;

  friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

inline constexpr std::size_t kDefaultLatticeCap = 100'000;

struct ExperimentConfig {
  Recipe recipe;
  std::vector<ParameterSpec> specs;
  std::int64_t n_configs = 1;
  std::int64_t r_seeds = 1;
  std::uint64_t base_seed = 0;
  std::string output_location;
  std::size_t lattice_cap = kDefaultLatticeCap;

  std::int64_t total_jobs() const noexcept { return n_configs * r_seeds; }

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct RunConfig {
  std::int64_t run_index = 0;
  Assignment assignment;
  std::vector<std::uint64_t> seeds;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Violations of the experiment's invariants, including those of its recipe.
std::vector<std::string> validate_experiment(const ExperimentConfig& cfg);

/// Number of values an even spec contributes to the lattice.
std::vector<ParamValue> even_values(const ParameterSpec& spec);

/// Full Cartesian lattice of even-sampled specs; the first spec varies
/// slowest. Throws ComboExplosion when the size would exceed `cap`.
std::vector<Assignment> expand_even(const std::vector<ParameterSpec>& specs, std::size_t cap = kDefaultLatticeCap);

/// n independent uniform draws over every spec's domain. Draw a is a pure
/// function of (rng_seed, a), so a longer list extends a shorter one.
std::vector<Assignment> sample_uniform(const std::vector<ParameterSpec>& specs, std::int64_t n,
                                       std::uint64_t rng_seed);

/// seed(i, j) for run i, replicate j.
std::uint64_t derive_seed(std::uint64_t base_seed, std::int64_t run_index, std::int64_t replicate);

/// Lattice indices kept when the lattice is larger than n: a shuffled
/// selection seeded by base_seed, returned in ascending lattice order.
std::vector<std::size_t> lattice_selection(std::size_t lattice_size, std::size_t n, std::uint64_t base_seed);

/// The N run configurations of an experiment.
std::vector<RunConfig> build_job_matrix(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);
nlohmann::json to_json(const ParameterSpec& spec);
nlohmann::json to_json(const RunConfig& run);

/// Parses an experiment document. A string-valued `recipe` is read as a path
/// relative to `base_dir`.
ExperimentConfig experiment_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig import_experiment(std::string_view text, const std::filesystem::path& base_dir = {});

/// Self-contained document (recipe embedded). Throws ValidationError for an
/// invalid configuration.
std::string export_experiment(const ExperimentConfig& cfg);

/// 16 lowercase hex chars: FNV-1a 64 of the canonical experiment document.
std::string experiment_id(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(std::string_view bytes) noexcept;

}  // namespace packlab
