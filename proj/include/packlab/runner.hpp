#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>

#include "packlab/engine.hpp"
#include "packlab/store.hpp"

namespace packlab {

struct RunnerOptions {
  int jobs = 0;  // 0 = hardware concurrency
  PackOptions pack;
  // Called after every finished job with (completed, total); may run on any worker.
  std::function<void(std::int64_t, std::int64_t)> on_progress;
  // Checked between jobs; setting it stops the run without finalizing.
  const std::atomic<bool>* cancel = nullptr;
};

struct RunnerReport {
  std::int64_t total = 0;
  std::int64_t executed = 0;
  std::int64_t skipped = 0;  // outputs already on disk
  bool finalized = false;
};

int resolve_jobs(int requested) noexcept;

/// Executes every missing (run, replicate) job of a saved experiment, then
/// writes runs.jsonl and the per-run averaged densities. Resumable: existing
/// outputs are kept. Marks the experiment failed and rethrows on error.
RunnerReport run_experiment(Store& store, const std::string& id, const RunnerOptions& options = {});

/// Metrics table and densities from the stored outputs. Every output must exist.
void finalize_experiment(Store& store, const std::string& id, int jobs = 0);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// stops further work and is rethrown.
void parallel_for(std::int64_t n, int jobs, const std::function<void(std::int64_t)>& fn,
                  const std::atomic<bool>* cancel = nullptr);

}  // namespace packlab
