#include "packlab/runner.hpp"

#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "packlab/density.hpp"
#include "packlab/errors.hpp"
#include "packlab/metrics.hpp"
#include "packlab/sampler.hpp"

namespace packlab {

int resolve_jobs(int requested) noexcept {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, int jobs, const std::function<void(std::int64_t)>& fn,
                  const std::atomic<bool>* cancel) {
  if (n <= 0) return;
  const int workers = static_cast<int>(std::min<std::int64_t>(resolve_jobs(jobs), n));
  std::atomic<std::int64_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr error;
  std::mutex error_mutex;

  auto work = [&] {
    for (;;) {
      if (stop.load() || (cancel && cancel->load())) return;
      const std::int64_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        stop = true;
      }
    }
  };

  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

void finalize_experiment(Store& store, const std::string& id, int jobs) {
  const ExperimentConfig cfg = store.load_experiment(id);
  const auto matrix = build_job_matrix(cfg);
  const PackingVolume& volume = cfg.recipe.volume;
  const auto dims = default_dims(volume);
  std::vector<RunSummary> summaries(matrix.size());

  parallel_for(static_cast<std::int64_t>(matrix.size()), jobs, [&](std::int64_t n) {
    const RunConfig& rc = matrix[static_cast<std::size_t>(n)];
    std::vector<PackingOutput> outputs;
    std::vector<DensityVolume> volumes;
    for (std::size_t r = 0; r < rc.seeds.size(); ++r) {
      outputs.push_back(store.load_output(id, rc.run_index, static_cast<std::int64_t>(r)));
      volumes.push_back(voxelize(outputs.back(), volume, dims, kDefaultSubsamples));
    }
    summaries[static_cast<std::size_t>(n)] = summarize_run(outputs, rc, volume);
    store.save_density(id, rc.run_index, average_volumes(volumes));
  });

  store.save_runs_jsonl(id, runs_jsonl(summaries));
}

RunnerReport run_experiment(Store& store, const std::string& id, const RunnerOptions& options) {
  const ExperimentConfig cfg = store.load_experiment(id);
  RunnerReport report;
  report.total = cfg.total_jobs();
  store.mark_running(id);
  try {
    const auto matrix = build_job_matrix(cfg);
    const std::int64_t r_seeds = cfg.r_seeds;
    std::atomic<std::int64_t> done{0}, executed{0};

    parallel_for(report.total, options.jobs, [&](std::int64_t job) {
      const RunConfig& rc = matrix[static_cast<std::size_t>(job / r_seeds)];
      const std::int64_t r = job % r_seeds;
      if (!store.has_output(id, rc.run_index, r)) {
        const auto out = pack(cfg.recipe, rc.assignment, rc.seeds[static_cast<std::size_t>(r)], rc.run_index,
                              options.pack);
        store.save_output(id, rc.run_index, r, out);
        ++executed;
      }
      const std::int64_t d = ++done;
      if (options.on_progress) options.on_progress(d, report.total);
    }, options.cancel);

    report.executed = executed.load();
    report.skipped = done.load() - report.executed;
    if (done.load() == report.total) {
      finalize_experiment(store, id, options.jobs);
      report.finalized = true;
    }
    store.clear_markers(id);
  } catch (const std::exception& e) {
    store.mark_failed(id, e.what());
    throw;
  }
  return report;
}

}  // namespace packlab
