#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "packlab/engine.hpp"
#include "packlab/recipe.hpp"
#include "packlab/sampler.hpp"

namespace packlab {

/// Mean pairwise distance between ingredient types. Names are sorted;
/// entries are missing when a type has no partner instances to pair with.
struct DistanceMatrix {
  std::vector<std::string> names;
  std::vector<std::optional<double>> values;  // row-major, names.size()^2

  std::optional<double> at(std::size_t i, std::size_t j) const { return values[i * names.size() + j]; }
  std::optional<double> at(const std::string& a, const std::string& b) const;

  friend bool operator==(const DistanceMatrix&, const DistanceMatrix&) = default;
};

struct OutputMetrics {
  std::uint64_t seed = 0;
  std::map<std::string, double> space_occupancy;
  std::map<std::string, double> usage;
  std::map<std::string, std::int64_t> placed;
  std::map<std::string, std::int64_t> requested;
  DistanceMatrix distance;
  double runtime_seconds = 0.0;

  // Scalar metrics keyed for filtering: usage, space_occupancy, runtime,
  // placed, and their per-ingredient forms "usage.<name>" etc.
  std::map<std::string, double> flat() const;

  friend bool operator==(const OutputMetrics&, const OutputMetrics&) = default;
};

struct RunSummary {
  std::int64_t run_index = 0;
  Assignment assignment;
  std::vector<std::uint64_t> seeds;
  std::map<std::string, double> metrics;  // seed means of OutputMetrics::flat()
  DistanceMatrix distance;
  std::vector<OutputMetrics> per_seed;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

std::map<std::string, double> space_occupancy(const PackingOutput& out, const PackingVolume& volume);
std::map<std::string, double> usage(const PackingOutput& out);
DistanceMatrix distance_matrix(const PackingOutput& out, const PackingVolume& volume);

OutputMetrics compute_metrics(const PackingOutput& out, const PackingVolume& volume);

/// Throws MismatchedRun if an output belongs to another run.
RunSummary summarize_run(std::span<const PackingOutput> outputs, const RunConfig& run, const PackingVolume& volume);
/// Averages already computed per-seed metrics.
RunSummary summarize_run(std::vector<OutputMetrics> per_seed, const RunConfig& run);

nlohmann::json to_json(const DistanceMatrix& m);
DistanceMatrix distance_matrix_from_json(const nlohmann::json& j);
nlohmann::json to_json(const OutputMetrics& m);
OutputMetrics output_metrics_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunSummary& s);
RunSummary run_summary_from_json(const nlohmann::json& j);

/// One canonical JSON object per line, ordered by run index.
std::string runs_jsonl(std::span<const RunSummary> summaries);
std::vector<RunSummary> parse_runs_jsonl(std::string_view text);

}  // namespace packlab
