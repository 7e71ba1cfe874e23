#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "packlab/density.hpp"
#include "packlab/engine.hpp"
#include "packlab/errors.hpp"
#include "packlab/store.hpp"
#include "tempdir.hpp"

using namespace packlab;
namespace fs = std::filesystem;

namespace {

std::size_t count_entries(const fs::path& dir) {
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++n;
  return n;
}

}  // namespace

TEST_CASE("save_experiment is idempotent and content addressed") {
  TempDir tmp("store");
  Store store(tmp.path());
  const auto cfg = fixtures::overpack_experiment();

  const auto a = store.save_experiment(cfg);
  const auto b = store.save_experiment(cfg);
  CHECK(a.id == b.id);
  CHECK(a.id.size() == 16);
  CHECK(count_entries(tmp.path() / "experiments") == 1);
  CHECK(a.status == ExperimentStatus::created);
  CHECK(a.total_jobs == 50);
  CHECK(a.completed_jobs == 0);

  auto other = cfg;
  other.base_seed = 8;
  const auto c = store.save_experiment(other);
  CHECK(c.id != a.id);
  CHECK(store.list_experiments().size() == 2);

  CHECK(store.load_experiment(a.id) == cfg);
  CHECK(fs::exists(store.experiment_dir(a.id) / "recipe.json"));
  CHECK(parse_recipe(read_file(store.experiment_dir(a.id) / "recipe.json")) == cfg.recipe);
}

TEST_CASE("unknown or malformed experiment ids are NotFound") {
  TempDir tmp("store");
  Store store(tmp.path());
  CHECK_THROWS_AS(store.load_experiment("0123456789abcdef"), NotFound);
  CHECK_THROWS_AS(store.load_experiment("../../etc"), NotFound);
  CHECK_FALSE(store.has_experiment("../x"));
  CHECK(store.list_experiments().empty());
}

TEST_CASE("outputs round trip and drive status") {
  TempDir tmp("store");
  Store store(tmp.path());
  const auto cfg = fixtures::overpack_experiment();
  const std::string id = store.save_experiment(cfg).id;
  const auto jobs = build_job_matrix(cfg);

  const auto out = pack(cfg.recipe, jobs[0].assignment, jobs[0].seeds[0], 0);
  store.save_output(id, 0, 0, out);
  CHECK(store.load_output(id, 0, 0) == out);
  CHECK_THROWS_AS(store.load_output(id, 0, 1), NotFound);
  CHECK_THROWS_AS(store.save_output("ffffffffffffffff", 0, 0, out), NotFound);

  SUBCASE("identical rewrite is not a conflict") {
    CHECK_NOTHROW(store.save_output(id, 0, 0, out));
  }
  SUBCASE("different bytes are a conflict") {
    auto changed = out;
    changed.runtime_seconds += 1.0;
    CHECK_THROWS_AS(store.save_output(id, 0, 0, changed), ConflictError);
    CHECK(store.load_output(id, 0, 0) == out);
  }
  SUBCASE("partial experiment reports running with progress") {
    // 30 of 50 files; content is irrelevant to status.
    int written = 1;
    for (std::int64_t n = 0; n < 10 && written < 30; ++n) {
      for (std::int64_t r = 0; r < 5 && written < 30; ++r) {
        if (n == 0 && r == 0) continue;
        store.save_output(id, n, r, out);
        ++written;
      }
    }
    const auto rec = store.record(id);
    CHECK(rec.completed_jobs == 30);
    CHECK(rec.status == ExperimentStatus::running);
    CHECK(rec.progress() == doctest::Approx(0.6));
  }
}

TEST_CASE("markers override derived status") {
  TempDir tmp("store");
  Store store(tmp.path());
  const std::string id = store.save_experiment(fixtures::overpack_experiment()).id;
  store.mark_running(id);
  CHECK(store.record(id).status == ExperimentStatus::running);
  store.mark_failed(id, "disk full");
  auto rec = store.record(id);
  CHECK(rec.status == ExperimentStatus::failed);
  CHECK(rec.message == "disk full");
  store.clear_markers(id);
  CHECK(store.record(id).status == ExperimentStatus::created);
}

TEST_CASE("write_file_atomic leaves no temporaries") {
  TempDir tmp("store");
  const fs::path p = tmp.path() / "a" / "b.txt";
  write_file_atomic(p, "hello");
  CHECK(read_file(p) == "hello");
  write_file_atomic(p, "hello");
  CHECK_THROWS_AS(write_file_atomic(p, "world"), ConflictError);
  replace_file_atomic(p, "world");
  CHECK(read_file(p) == "world");
  CHECK(count_entries(p.parent_path()) == 1);
  CHECK_THROWS_AS(read_file(tmp.path() / "missing"), IoError);
}

TEST_CASE("recipes are stored by name") {
  TempDir tmp("store");
  Store store(tmp.path());
  CHECK(store.list_recipes().empty());
  const auto r = fixtures::overpack_recipe();
  CHECK(store.save_recipe(r) == r.name);
  CHECK(store.list_recipes() == std::vector<std::string>{r.name});
  CHECK(store.load_recipe(r.name) == r);
  CHECK_THROWS_AS(store.load_recipe("nope"), NotFound);
  CHECK_THROWS_AS(store.load_recipe("../x"), NotFound);
}

TEST_CASE("density volumes and projections persist") {
  TempDir tmp("store");
  Store store(tmp.path());
  const auto cfg = fixtures::overpack_experiment();
  const std::string id = store.save_experiment(cfg).id;
  const auto out = pack(cfg.recipe, {}, 3, 0);
  const auto vol = voxelize(out, cfg.recipe.volume, default_dims(cfg.recipe.volume), kDefaultSubsamples);
  store.save_density(id, 0, vol);
  CHECK(store.has_density(id, 0));
  CHECK(store.load_density(id, 0) == vol);
  const std::string pgm = store.load_heatmap(id, 0, Axis::z, "combined");
  CHECK(pgm == to_pgm(project(vol, Axis::z)));
  CHECK(store.load_heatmap(id, 0, Axis::x, "sphere") == to_pgm(project(vol, Axis::x, "sphere")));
  CHECK_THROWS_AS(store.load_heatmap(id, 0, Axis::z, "nothing"), NotFound);
  CHECK_THROWS_AS(store.load_heatmap(id, 1, Axis::z, "combined"), NotFound);
  CHECK_NOTHROW(store.save_density(id, 0, vol));
}
