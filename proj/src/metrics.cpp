#include "packlab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "packlab/errors.hpp"
#include "packlab/geometry.hpp"
#include "packlab/json_util.hpp"

namespace packlab {

using json_util::json;

std::optional<double> DistanceMatrix::at(const std::string& a, const std::string& b) const {
  const auto ia = std::find(names.begin(), names.end(), a);
  const auto ib = std::find(names.begin(), names.end(), b);
  if (ia == names.end() || ib == names.end()) return std::nullopt;
  return at(static_cast<std::size_t>(ia - names.begin()), static_cast<std::size_t>(ib - names.begin()));
}

std::map<std::string, double> space_occupancy(const PackingOutput& out, const PackingVolume& volume) {
  std::map<std::string, double> covered;
  for (const auto& [name, _] : out.requested_counts) covered[name] = 0.0;
  double total = volume.measure();
  for (const auto& inst : out.instances) {
    const double r = inst.radius;
    double m = 0.0;
    switch (volume.mode) {
      case VolumeMode::box3d:
        m = 4.0 / 3.0 * std::numbers::pi * r * r * r;
        break;
      case VolumeMode::plane2d:
        m = std::numbers::pi * r * r;
        break;
      case VolumeMode::sphere_surface: {
        // Cap of chord radius r: height r^2 / 2R, area 2 pi R h = pi r^2.
        const double R = volume.surface_radius();
        m = std::min(std::numbers::pi * r * r, 4.0 * std::numbers::pi * R * R);
        break;
      }
    }
    covered[inst.ingredient] += m;
  }
  for (auto& [_, v] : covered) v /= total;
  return covered;
}

std::map<std::string, double> usage(const PackingOutput& out) {
  std::map<std::string, double> u;
  for (const auto& [name, requested] : out.requested_counts) {
    const auto it = out.placed_counts.find(name);
    const std::int64_t placed = it == out.placed_counts.end() ? 0 : it->second;
    u[name] = requested == 0 ? 1.0 : static_cast<double>(placed) / static_cast<double>(requested);
  }
  return u;
}

DistanceMatrix distance_matrix(const PackingOutput& out, const PackingVolume& volume) {
  DistanceMatrix m;
  for (const auto& [name, _] : out.requested_counts) m.names.push_back(name);
  const std::size_t k = m.names.size();
  m.values.assign(k * k, std::nullopt);

  std::vector<std::size_t> type(out.instances.size(), k);
  for (std::size_t i = 0; i < out.instances.size(); ++i) {
    const auto it = std::find(m.names.begin(), m.names.end(), out.instances[i].ingredient);
    type[i] = static_cast<std::size_t>(it - m.names.begin());
  }

  // Each unordered pair i < j, in index order, feeds the entry of its type
  // pair. Counting it once instead of twice leaves the mean unchanged and
  // makes the matrix exactly symmetric.
  const Geometry g(volume);
  std::vector<double> sum(k * k, 0.0);
  std::vector<std::uint64_t> pairs(k * k, 0);
  for (std::size_t i = 0; i < out.instances.size(); ++i) {
    if (type[i] == k) continue;
    for (std::size_t j = i + 1; j < out.instances.size(); ++j) {
      if (type[j] == k) continue;
      const std::size_t c = std::min(type[i], type[j]) * k + std::max(type[i], type[j]);
      sum[c] += g.distance(out.instances[i].position, out.instances[j].position);
      ++pairs[c];
    }
  }
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      const std::size_t c = a * k + b;
      if (pairs[c] == 0) continue;
      const double mean = sum[c] / static_cast<double>(pairs[c]);
      m.values[c] = mean;
      m.values[b * k + a] = mean;
    }
  }
  return m;
}

std::map<std::string, double> OutputMetrics::flat() const {
  std::map<std::string, double> f;
  double occ = 0.0;
  for (const auto& [name, v] : space_occupancy) {
    f["space_occupancy." + name] = v;
    occ += v;
  }
  f["space_occupancy"] = occ;
  for (const auto& [name, v] : usage) f["usage." + name] = v;
  std::int64_t placed_total = 0, requested_total = 0;
  for (const auto& [name, n] : placed) {
    f["placed." + name] = static_cast<double>(n);
    placed_total += n;
  }
  for (const auto& [name, n] : requested) requested_total += n;
  f["placed"] = static_cast<double>(placed_total);
  // Overall usage pools the counts of every ingredient.
  f["usage"] = requested_total == 0 ? 1.0 : static_cast<double>(placed_total) / static_cast<double>(requested_total);
  f["runtime"] = runtime_seconds;
  return f;
}

OutputMetrics compute_metrics(const PackingOutput& out, const PackingVolume& volume) {
  OutputMetrics m;
  m.seed = out.seed;
  m.space_occupancy = space_occupancy(out, volume);
  m.usage = usage(out);
  m.placed = out.placed_counts;
  m.requested = out.requested_counts;
  m.distance = distance_matrix(out, volume);
  m.runtime_seconds = out.runtime_seconds;
  return m;
}

RunSummary summarize_run(std::span<const PackingOutput> outputs, const RunConfig& run, const PackingVolume& volume) {
  std::vector<OutputMetrics> per_seed;
  for (const auto& out : outputs) {
    if (out.config_ref.run_index != run.run_index) {
      throw MismatchedRun("output for run " + std::to_string(out.config_ref.run_index) + " passed to run " +
                          std::to_string(run.run_index));
    }
    per_seed.push_back(compute_metrics(out, volume));
  }
  return summarize_run(std::move(per_seed), run);
}

RunSummary summarize_run(std::vector<OutputMetrics> per_seed, const RunConfig& run) {
  RunSummary s;
  s.run_index = run.run_index;
  s.assignment = run.assignment;
  for (const auto& m : per_seed) s.seeds.push_back(m.seed);

  // Scalar means, clamped into the per-seed range so rounding never puts a
  // mean of equal values outside them.
  std::map<std::string, std::vector<double>> columns;
  for (const auto& m : per_seed) {
    for (const auto& [k, v] : m.flat()) columns[k].push_back(v);
  }
  for (const auto& [k, vals] : columns) {
    double sum = 0.0;
    for (double v : vals) sum += v;
    const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    s.metrics[k] = std::clamp(sum / static_cast<double>(vals.size()), *lo, *hi);
  }

  if (!per_seed.empty()) {
    s.distance.names = per_seed.front().distance.names;
    const std::size_t cells = per_seed.front().distance.values.size();
    s.distance.values.assign(cells, std::nullopt);
    for (std::size_t c = 0; c < cells; ++c) {
      double sum = 0.0;
      int n = 0;
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& m : per_seed) {
        if (m.distance.names != s.distance.names) throw MismatchedRun("ingredient sets differ between seeds");
        if (const auto& v = m.distance.values[c]) {
          sum += *v;
          lo = std::min(lo, *v);
          hi = std::max(hi, *v);
          ++n;
        }
      }
      if (n > 0) s.distance.values[c] = std::clamp(sum / n, lo, hi);
    }
  }
  s.per_seed = std::move(per_seed);
  return s;
}

// ---------------------------------------------------------------- serialization

json to_json(const DistanceMatrix& m) {
  json rows = json::array();
  const std::size_t k = m.names.size();
  for (std::size_t i = 0; i < k; ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < k; ++j) {
      const auto v = m.at(i, j);
      row.push_back(v ? json(*v) : json(nullptr));
    }
    rows.push_back(std::move(row));
  }
  return {{"names", m.names}, {"values", std::move(rows)}};
}

DistanceMatrix distance_matrix_from_json(const json& j) {
  json_util::Reader r(j, "distance");
  r.allow_only({"names", "values"});
  DistanceMatrix m;
  for (const auto& n : r.array("names")) {
    if (!n.is_string()) throw SchemaViolation("distance.names: expected strings");
    m.names.push_back(n.get<std::string>());
  }
  const json& rows = r.array("values");
  const std::size_t k = m.names.size();
  if (rows.size() != k) throw SchemaViolation("distance.values: expected " + std::to_string(k) + " rows");
  for (const auto& row : rows) {
    if (!row.is_array() || row.size() != k) throw SchemaViolation("distance.values: ragged matrix");
    for (const auto& v : row) {
      m.values.push_back(v.is_null() ? std::nullopt : std::optional<double>(json_util::as_number(v, "distance.values")));
    }
  }
  return m;
}

json to_json(const OutputMetrics& m) {
  return {{"seed", m.seed},
          {"space_occupancy", m.space_occupancy},
          {"usage", m.usage},
          {"placed", m.placed},
          {"requested", m.requested},
          {"distance", to_json(m.distance)},
          {"runtime_seconds", m.runtime_seconds}};
}

namespace {

template <typename T>
std::map<std::string, T> read_map(const json& j, const std::string& where) {
  if (!j.is_object()) throw SchemaViolation(where + ": expected an object");
  std::map<std::string, T> out;
  for (const auto& [k, v] : j.items()) {
    if constexpr (std::is_same_v<T, double>) {
      out[k] = json_util::as_number(v, where + "." + k);
    } else {
      out[k] = json_util::as_integer(v, where + "." + k);
    }
  }
  return out;
}

}  // namespace

OutputMetrics output_metrics_from_json(const json& j) {
  json_util::Reader r(j, "metrics");
  r.allow_only({"seed", "space_occupancy", "usage", "placed", "requested", "distance", "runtime_seconds"});
  OutputMetrics m;
  m.seed = r.uinteger("seed");
  m.space_occupancy = read_map<double>(r.at("space_occupancy"), "metrics.space_occupancy");
  m.usage = read_map<double>(r.at("usage"), "metrics.usage");
  m.placed = read_map<std::int64_t>(r.at("placed"), "metrics.placed");
  m.requested = read_map<std::int64_t>(r.at("requested"), "metrics.requested");
  m.distance = distance_matrix_from_json(r.at("distance"));
  m.runtime_seconds = r.number("runtime_seconds");
  return m;
}

json to_json(const RunSummary& s) {
  json per_seed = json::array();
  for (const auto& m : s.per_seed) per_seed.push_back(to_json(m));
  return {{"run_index", s.run_index},         {"assignment", to_json(s.assignment)}, {"seeds", s.seeds},
          {"metrics", s.metrics},             {"distance", to_json(s.distance)},     {"per_seed", std::move(per_seed)}};
}

RunSummary run_summary_from_json(const json& j) {
  json_util::Reader r(j, "run");
  r.allow_only({"run_index", "assignment", "seeds", "metrics", "distance", "per_seed"});
  RunSummary s;
  s.run_index = r.integer("run_index");
  s.assignment = assignment_from_json(r.object("assignment"), "run.assignment");
  for (const auto& v : r.array("seeds")) {
    if (!v.is_number_unsigned()) throw SchemaViolation("run.seeds: expected unsigned integers");
    s.seeds.push_back(v.get<std::uint64_t>());
  }
  s.metrics = read_map<double>(r.at("metrics"), "run.metrics");
  s.distance = distance_matrix_from_json(r.at("distance"));
  for (const auto& m : r.array("per_seed")) s.per_seed.push_back(output_metrics_from_json(m));
  return s;
}

std::string runs_jsonl(std::span<const RunSummary> summaries) {
  std::vector<const RunSummary*> sorted;
  for (const auto& s : summaries) sorted.push_back(&s);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RunSummary* a, const RunSummary* b) { return a->run_index < b->run_index; });
  std::string out;
  for (const RunSummary* s : sorted) {
    out += json_util::dump(to_json(*s));
    out += '\n';
  }
  return out;
}

std::vector<RunSummary> parse_runs_jsonl(std::string_view text) {
  std::vector<RunSummary> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(run_summary_from_json(json_util::parse(line)));
  }
  return out;
}

}  // namespace packlab
