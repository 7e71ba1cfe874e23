#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "packlab/density.hpp"
#include "packlab/engine.hpp"
#include "packlab/recipe.hpp"
#include "packlab/sampler.hpp"

namespace packlab {

enum class ExperimentStatus { created, running, done, failed };
std::string_view to_string(ExperimentStatus s) noexcept;

struct ExperimentRecord {
  std::string id;
  ExperimentConfig config;
  ExperimentStatus status = ExperimentStatus::created;
  std::int64_t completed_jobs = 0;
  std::int64_t total_jobs = 0;
  std::string message;  // failure reason, if any

  double progress() const noexcept {
    return total_jobs == 0 ? 1.0 : static_cast<double>(completed_jobs) / static_cast<double>(total_jobs);
  }
};

/// On-disk layout under a data root:
///
///   recipes/<name>.json
///   experiments/<id>/experiment.json, recipe.json
///   experiments/<id>/runs/run_<n>/output_<r>.json
///   experiments/<id>/runs.jsonl
///   experiments/<id>/density/run_<n>/volume.bin, volume.json,
///       proj_<axis>.pgm (+ .json), proj_<axis>.<ingredient>.pgm (+ .json)
///
/// Every file is written to a temporary name and renamed into place, so a
/// reader never sees a partial file. Rewriting a file with different bytes
/// throws ConflictError. Status is derived from the files present, so any
/// number of processes can share a root.
class Store {
 public:
  explicit Store(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path experiment_dir(std::string_view id) const;

  // Recipes shared through the service.
  std::string save_recipe(const Recipe& r);
  std::vector<std::string> list_recipes() const;
  Recipe load_recipe(std::string_view name) const;

  /// Idempotent; returns the record for the (possibly existing) experiment.
  ExperimentRecord save_experiment(const ExperimentConfig& cfg);
  std::vector<std::string> list_experiments() const;
  bool has_experiment(std::string_view id) const;
  ExperimentConfig load_experiment(std::string_view id) const;  // NotFound
  ExperimentRecord record(std::string_view id) const;
  std::string experiment_document(std::string_view id) const;

  void save_output(std::string_view id, std::int64_t run, std::int64_t replicate, const PackingOutput& out);
  bool has_output(std::string_view id, std::int64_t run, std::int64_t replicate) const;
  PackingOutput load_output(std::string_view id, std::int64_t run, std::int64_t replicate) const;
  std::int64_t count_outputs(std::string_view id) const;

  void save_runs_jsonl(std::string_view id, const std::string& text);
  std::optional<std::string> load_runs_jsonl(std::string_view id) const;

  void save_density(std::string_view id, std::int64_t run, const DensityVolume& vol);
  bool has_density(std::string_view id, std::int64_t run) const;
  /// Stored PGM for axis and channel ("combined" or an ingredient name).
  std::string load_heatmap(std::string_view id, std::int64_t run, Axis axis, std::string_view channel) const;
  DensityVolume load_density(std::string_view id, std::int64_t run) const;

  void mark_running(std::string_view id);
  void mark_failed(std::string_view id, const std::string& message);
  void clear_markers(std::string_view id);

 private:
  std::filesystem::path output_path(std::string_view id, std::int64_t run, std::int64_t replicate) const;
  std::filesystem::path density_dir(std::string_view id, std::int64_t run) const;

  std::filesystem::path root_;
};

/// Atomic write with conflict detection: identical existing bytes are a
/// no-op, different bytes throw ConflictError.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
/// Unconditional atomic replace.
void replace_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);  // IoError

}  // namespace packlab
