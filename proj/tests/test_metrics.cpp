#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"
#include "packlab/metrics.hpp"

using namespace packlab;

namespace {

PackingOutput output_of(std::vector<PlacedInstance> inst, std::map<std::string, std::int64_t> requested) {
  PackingOutput out;
  out.instances = std::move(inst);
  out.requested_counts = std::move(requested);
  for (const auto& [name, _] : out.requested_counts) out.placed_counts[name] = 0;
  for (const auto& i : out.instances) out.placed_counts[i.ingredient]++;
  return out;
}

const PackingVolume kBox{VolumeMode::box3d, {100, 100, 100}, false};
const PackingVolume kPlane{VolumeMode::plane2d, {100, 100, 0}, false};

}  // namespace

TEST_CASE("space_occupancy examples") {
  auto one = output_of({{"A", {50, 50, 50}, 10}}, {{"A", 1}});
  CHECK(space_occupancy(one, kBox).at("A") == doctest::Approx(4188.790204786391 / 1e6).epsilon(1e-9));

  auto empty = output_of({}, {{"A", 3}, {"B", 2}});
  for (const auto& [_, v] : space_occupancy(empty, kBox)) CHECK(v == 0.0);

  std::vector<PlacedInstance> circles;
  for (int i = 0; i < 6; ++i) {
    for (int j = 0; j < 5; ++j) circles.push_back({"A", {8.0 + 16.0 * i, 10.0 + 20.0 * j, 0}, 5});
  }
  auto plane = output_of(circles, {{"A", 30}});
  const double occ = space_occupancy(plane, kPlane).at("A");
  CHECK(occ == doctest::Approx(30 * std::numbers::pi * 25 / 1e4).epsilon(1e-12));
  CHECK(std::abs(occ - oracles::union_fraction(plane.instances, kPlane, 1000, 1)) <= 1e-3);

  // Sphere surface: a contact cap of chord radius r has area pi r^2.
  const PackingVolume surf{VolumeMode::sphere_surface, {20, 0, 0}, false};
  auto capped = output_of({{"P", {0, 0, 20}, 6}, {"P", {0, 0, -20}, 6}}, {{"P", 2}});
  const double expect = 2 * std::numbers::pi * 36 / (4 * std::numbers::pi * 400);
  CHECK(space_occupancy(capped, surf).at("P") == doctest::Approx(expect));
  CHECK(std::abs(space_occupancy(capped, surf).at("P") - oracles::union_fraction(capped.instances, surf, 1000, 2)) <= 1e-3);
}

TEST_CASE("space_occupancy of packed outputs matches the union estimate") {
  for (const Recipe& r : {fixtures::binding_recipe(true, 0.5), fixtures::surface_recipe(0.0)}) {
    const auto out = pack(r, {}, 3);
    double sum = 0;
    for (const auto& [_, v] : space_occupancy(out, r.volume)) sum += v;
    CHECK(sum <= 1.0 + 1e-6);
    CHECK(std::abs(sum - oracles::union_fraction(out.instances, r.volume, 600, 9)) <= 2e-3);
  }
}

TEST_CASE("space_occupancy is additive over instance subsets") {
  const auto out = pack(fixtures::binding_recipe(false), {}, 5);
  PackingOutput left = out, right = out;
  left.instances.clear();
  right.instances.clear();
  for (std::size_t i = 0; i < out.instances.size(); ++i) (i % 3 ? left : right).instances.push_back(out.instances[i]);
  const auto whole = space_occupancy(out, kPlane);
  const auto a = space_occupancy(left, kPlane), b = space_occupancy(right, kPlane);
  for (const auto& [name, v] : whole) CHECK(v == doctest::Approx(a.at(name) + b.at(name)).epsilon(1e-12));
}

TEST_CASE("usage examples") {
  PackingOutput out;
  out.requested_counts = {{"A", 30}, {"B", 40}, {"C", 0}};
  out.placed_counts = {{"A", 30}, {"B", 30}, {"C", 0}};
  const auto u = usage(out);
  CHECK(u.at("A") == 1.0);
  CHECK(u.at("B") == 0.75);
  CHECK(u.at("C") == 1.0);
}

TEST_CASE("distance_matrix examples") {
  auto tri = output_of({{"A", {0, 0, 0}, 1}, {"A", {3, 4, 0}, 1}}, {{"A", 2}});
  auto m = distance_matrix(tri, kBox);
  REQUIRE(m.names == std::vector<std::string>{"A"});
  CHECK(*m.at(0, 0) == 5.0);

  auto ab = output_of({{"A", {0, 0, 0}, 1}, {"A", {10, 0, 0}, 1}, {"B", {5, 0, 0}, 1}}, {{"A", 2}, {"B", 1}});
  m = distance_matrix(ab, kBox);
  CHECK(*m.at("A", "B") == 5.0);
  CHECK(*m.at("B", "A") == 5.0);
  CHECK(*m.at("A", "A") == 10.0);
  CHECK_FALSE(m.at("B", "B").has_value());  // one instance

  auto missing = output_of({{"A", {0, 0, 0}, 1}}, {{"A", 1}, {"Z", 4}});
  m = distance_matrix(missing, kBox);
  CHECK_FALSE(m.at("A", "Z").has_value());
  CHECK_FALSE(m.at("Z", "Z").has_value());
}

TEST_CASE("property: distance_matrix equals the brute-force loop exactly") {
  Rng rng(31);
  const PackingVolume periodic{VolumeMode::box3d, {50, 40, 30}, true};
  for (const PackingVolume& v : {kBox, periodic}) {
    for (int t = 0; t < 20; ++t) {
      std::vector<PlacedInstance> inst;
      for (int i = 0; i < 50; ++i) {
        const char* names[] = {"x", "y", "z"};
        inst.push_back({names[rng.below(3)], {rng.uniform(0, v.extents[0]), rng.uniform(0, v.extents[1]),
                                              rng.uniform(0, v.extents[2])}, 1});
      }
      const auto out = output_of(inst, {{"x", 50}, {"y", 50}, {"z", 50}});
      const auto m = distance_matrix(out, v);
      for (const auto& a : m.names) {
        for (const auto& b : m.names) {
          const auto want = oracles::brute_mean_distance(inst, a, b, v);
          REQUIRE(m.at(a, b).has_value() == want.has_value());
          if (want) CHECK(*m.at(a, b) == *want);
          CHECK(m.at(a, b) == m.at(b, a));
        }
      }
    }
  }
}

TEST_CASE("distance_matrix invariances") {
  const auto out = pack(fixtures::binding_recipe(true, 0.5), {}, 2);
  const auto base = distance_matrix(out, kPlane);

  PackingOutput moved = out;
  for (auto& i : moved.instances) i.position = i.position + Vec3{17.25, -3.5, 0};
  const auto shifted = distance_matrix(moved, kPlane);

  PackingOutput reversed = out;
  std::reverse(reversed.instances.begin(), reversed.instances.end());
  const auto permuted = distance_matrix(reversed, kPlane);

  for (std::size_t c = 0; c < base.values.size(); ++c) {
    REQUIRE(base.values[c].has_value());
    CHECK(*shifted.values[c] == doctest::Approx(*base.values[c]).epsilon(1e-12));
    CHECK(*permuted.values[c] == doctest::Approx(*base.values[c]).epsilon(1e-12));
  }
}

TEST_CASE("summarize_run") {
  const Recipe r = fixtures::overpack_recipe();
  RunConfig run{2, {{"ingredient.sphere.count", std::int64_t{40}}}, {11, 12, 13, 14, 15}};
  std::vector<PackingOutput> outs;
  for (auto seed : run.seeds) outs.push_back(pack(r, run.assignment, seed, run.run_index));

  SUBCASE("R = 1 equals the single output") {
    const auto s = summarize_run(std::span(outs).first(1), run, r.volume);
    const auto m = compute_metrics(outs[0], r.volume);
    CHECK(s.metrics == m.flat());
    CHECK(s.distance == m.distance);
    CHECK(s.seeds == std::vector<std::uint64_t>{11});
  }
  SUBCASE("means are recomputed independently from raw per-seed files") {
    const auto s = summarize_run(outs, run, r.volume);
    CHECK(s.assignment == run.assignment);
    CHECK(s.seeds == run.seeds);
    // Recompute from the serialized outputs without the metrics module's averaging.
    double usage = 0, placed = 0, runtime = 0, occ = 0;
    for (const auto& o : outs) {
      const auto back = packing_output_from_json(json_util::parse(json_util::dump(to_json(o))));
      const double n = static_cast<double>(back.instances.size());
      placed += n;
      usage += n / 40.0;
      runtime += back.runtime_seconds;
      occ += n * std::numbers::pi * 25.0 / (67.0 * 67.0);
    }
    CHECK(s.metrics.at("usage") == doctest::Approx(usage / 5).epsilon(1e-12));
    CHECK(s.metrics.at("usage.sphere") == doctest::Approx(usage / 5).epsilon(1e-12));
    CHECK(s.metrics.at("placed") == doctest::Approx(placed / 5).epsilon(1e-12));
    CHECK(s.metrics.at("runtime") == doctest::Approx(runtime / 5).epsilon(1e-12));
    CHECK(s.metrics.at("space_occupancy") == doctest::Approx(occ / 5).epsilon(1e-12));
    // Each mean lies within the per-seed range.
    for (const auto& [k, v] : s.metrics) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& m : s.per_seed) {
        lo = std::min(lo, m.flat().at(k));
        hi = std::max(hi, m.flat().at(k));
      }
      CHECK(v >= lo);
      CHECK(v <= hi);
    }
  }
  SUBCASE("usage mean of 1.0 and 0.5") {
    OutputMetrics a, b;
    a.usage = {{"A", 1.0}};
    a.placed = {{"A", 4}};
    a.requested = {{"A", 4}};
    b.usage = {{"A", 0.5}};
    b.placed = {{"A", 2}};
    b.requested = {{"A", 4}};
    const auto s = summarize_run({a, b}, RunConfig{});
    CHECK(s.metrics.at("usage") == 0.75);
  }
  SUBCASE("missing distance entries are skipped") {
    OutputMetrics a, b;
    a.distance = {{"A"}, {std::nullopt}};
    b.distance = {{"A"}, {4.0}};
    CHECK(*summarize_run({a, b}, RunConfig{}).distance.at(0, 0) == 4.0);
    CHECK_FALSE(summarize_run({a, a}, RunConfig{}).distance.at(0, 0).has_value());
  }
  SUBCASE("mismatched run") {
    outs[1].config_ref.run_index = 9;
    CHECK_THROWS_AS(summarize_run(outs, run, r.volume), MismatchedRun);
  }
  SUBCASE("runs.jsonl round trip is byte-stable") {
    std::vector<RunSummary> summaries{summarize_run(outs, run, r.volume)};
    RunConfig other = run;
    other.run_index = 0;
    for (auto& o : outs) o.config_ref.run_index = 0;
    summaries.push_back(summarize_run(outs, other, r.volume));
    const std::string text = runs_jsonl(summaries);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    const auto back = parse_runs_jsonl(text);
    REQUIRE(back.size() == 2);
    CHECK(back[0].run_index == 0);
    CHECK(back[1] == summaries[0]);
    CHECK(runs_jsonl(back) == text);
  }
}
