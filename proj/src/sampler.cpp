#include "packlab/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"
#include "packlab/rng.hpp"

namespace packlab {

using json_util::json;
using json_util::Reader;

namespace {

constexpr std::uint64_t kSeedStream = 0x5eed5eed5eed5eedULL;
constexpr std::uint64_t kUniformStream = 0x0a11f0a11f0a11fULL;
constexpr std::uint64_t kShuffleStream = 0x5bff1e5bff1e5bffULL;

bool has_value_set(const ParameterSpec& s) { return !s.interval.has_value(); }

std::vector<std::string> check_spec(const Recipe& recipe, const ParameterSpec& s) {
  std::vector<std::string> out;
  const std::string who = "spec '" + s.target + "': ";
  auto path_problems = check_param_path(recipe, s.target);
  if (!path_problems.empty()) return path_problems;
  const ParamPath path = parse_param_path(s.target);
  const ParamKind field = path.kind();

  if (field == ParamKind::categorical && s.kind != ParamKind::categorical) {
    out.push_back(who + "field is categorical");
  } else if (field == ParamKind::integer && s.kind != ParamKind::integer) {
    out.push_back(who + "field is integer-valued");
  } else if (field == ParamKind::numeric && s.kind == ParamKind::categorical) {
    out.push_back(who + "field is numeric");
  }

  if (s.kind == ParamKind::categorical && s.interval) out.push_back(who + "categorical specs need a value set");
  if (s.interval) {
    const auto [lo, hi] = *s.interval;
    if (!std::isfinite(lo) || !std::isfinite(hi)) out.push_back(who + "interval bounds must be finite");
    else if (lo > hi) out.push_back(who + "interval requires lo <= hi");
    else if (s.method == SamplingMethod::even && lo == hi) out.push_back(who + "even sampling needs lo < hi");
    if (s.method == SamplingMethod::even && s.k_steps < 2) out.push_back(who + "even sampling needs k_steps >= 2");
    if (s.kind == ParamKind::integer && std::isfinite(lo) && std::isfinite(hi) &&
        std::ceil(lo) > std::floor(hi)) {
      out.push_back(who + "integer interval contains no integer");
    }
  } else {
    if (s.values.empty()) out.push_back(who + "value set must not be empty");
    const auto options = categorical_options(path);
    std::set<ParamValue> distinct;
    for (const auto& v : s.values) {
      if (!distinct.insert(v).second) out.push_back(who + "duplicate value '" + display(v) + "'");
      if (s.kind == ParamKind::categorical) {
        auto str = std::get_if<std::string>(&v);
        if (!str || std::find(options.begin(), options.end(), *str) == options.end()) {
          out.push_back(who + "'" + display(v) + "' is not a valid category");
        }
      } else if (s.kind == ParamKind::integer && !std::holds_alternative<std::int64_t>(v)) {
        out.push_back(who + "value '" + display(v) + "' is not an integer");
      } else if (s.kind == ParamKind::numeric && !numeric_value(v)) {
        out.push_back(who + "value '" + display(v) + "' is not a number");
      }
    }
  }
  return out;
}

ParamValue draw(const ParameterSpec& s, Rng& rng) {
  if (has_value_set(s)) return s.values[rng.below(s.values.size())];
  const auto [lo, hi] = *s.interval;
  if (s.kind == ParamKind::integer) {
    return rng.between(static_cast<std::int64_t>(std::ceil(lo)), static_cast<std::int64_t>(std::floor(hi)));
  }
  return rng.uniform(lo, hi);
}

std::size_t lattice_size(const std::vector<ParameterSpec>& evens, std::size_t cap) {
  std::size_t size = 1;
  for (const auto& s : evens) {
    const std::size_t n = even_values(s).size();
    if (n != 0 && size > cap / n) {
      throw ComboExplosion("even-sampled lattice exceeds " + std::to_string(cap) + " configurations");
    }
    size *= n;
  }
  if (size > cap) throw ComboExplosion("even-sampled lattice exceeds " + std::to_string(cap) + " configurations");
  return size;
}

void split_specs(const std::vector<ParameterSpec>& specs, std::vector<ParameterSpec>& evens,
                 std::vector<ParameterSpec>& uniforms) {
  for (const auto& s : specs) (s.method == SamplingMethod::even ? evens : uniforms).push_back(s);
}

}  // namespace

std::vector<ParamValue> even_values(const ParameterSpec& spec) {
  if (has_value_set(spec)) return spec.values;
  const auto [lo, hi] = *spec.interval;
  const int k = spec.k_steps;
  std::vector<ParamValue> out;
  for (int i = 0; i < k; ++i) {
    // Endpoints are taken verbatim so they survive floating-point rounding.
    const double x = i == 0 ? lo : (i == k - 1 ? hi : lo + i * (hi - lo) / (k - 1));
    if (spec.kind == ParamKind::integer) {
      const std::int64_t r = std::llround(x);
      ParamValue v = r;
      if (out.empty() || out.back() != v) out.push_back(v);
    } else {
      out.emplace_back(x);
    }
  }
  return out;
}

std::vector<Assignment> expand_even(const std::vector<ParameterSpec>& specs, std::size_t cap) {
  const std::size_t total = lattice_size(specs, cap);
  std::vector<std::vector<ParamValue>> axes;
  for (const auto& s : specs) axes.push_back(even_values(s));

  std::vector<Assignment> out;
  out.reserve(total);
  std::vector<std::size_t> idx(specs.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    Assignment a;
    for (std::size_t d = 0; d < specs.size(); ++d) a[specs[d].target] = axes[d][idx[d]];
    out.push_back(std::move(a));
    // Odometer increment, last spec fastest.
    for (std::size_t d = specs.size(); d-- > 0;) {
      if (++idx[d] < axes[d].size()) break;
      idx[d] = 0;
    }
  }
  return out;
}

std::vector<Assignment> sample_uniform(const std::vector<ParameterSpec>& specs, std::int64_t n,
                                       std::uint64_t rng_seed) {
  std::vector<Assignment> out;
  out.reserve(static_cast<std::size_t>(std::max<std::int64_t>(n, 0)));
  for (std::int64_t a = 0; a < n; ++a) {
    Rng rng(hash_combine(rng_seed, static_cast<std::uint64_t>(a)));
    Assignment assignment;
    for (const auto& s : specs) assignment[s.target] = draw(s, rng);
    out.push_back(std::move(assignment));
  }
  return out;
}

std::uint64_t derive_seed(std::uint64_t base_seed, std::int64_t run_index, std::int64_t replicate) {
  std::uint64_t h = hash_combine(mix64(base_seed ^ kSeedStream), static_cast<std::uint64_t>(run_index));
  return hash_combine(h, static_cast<std::uint64_t>(replicate));
}

std::vector<std::size_t> lattice_selection(std::size_t lattice_size, std::size_t n, std::uint64_t base_seed) {
  std::vector<std::size_t> order(lattice_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (n >= lattice_size) return order;
  Rng rng(hash_combine(base_seed, kShuffleStream));
  // Partial Fisher-Yates: positions [0, n) end up a uniform n-subset.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(lattice_size - i));
    std::swap(order[i], order[j]);
  }
  order.resize(n);
  std::sort(order.begin(), order.end());
  return order;
}

std::vector<std::string> validate_experiment(const ExperimentConfig& cfg) {
  std::vector<std::string> out = validate_recipe(cfg.recipe);
  if (cfg.n_configs < 1) out.push_back("experiment: n_configs must be >= 1");
  if (cfg.r_seeds < 1) out.push_back("experiment: r_seeds must be >= 1");
  if (cfg.lattice_cap < 1) out.push_back("experiment: lattice_cap must be >= 1");
  std::set<std::string> targets;
  bool specs_ok = true;
  for (const auto& s : cfg.specs) {
    if (!targets.insert(s.target).second) out.push_back("spec '" + s.target + "': sampled twice");
    auto problems = check_spec(cfg.recipe, s);
    specs_ok = specs_ok && problems.empty();
    out.insert(out.end(), problems.begin(), problems.end());
  }
  if (!out.empty() || !specs_ok) return out;

  std::vector<ParameterSpec> evens, uniforms;
  split_specs(cfg.specs, evens, uniforms);
  if (!evens.empty() && uniforms.empty()) {
    try {
      const std::size_t size = lattice_size(evens, cfg.lattice_cap);
      if (static_cast<std::size_t>(cfg.n_configs) > size) {
        out.push_back("experiment: n_configs (" + std::to_string(cfg.n_configs) +
                      ") exceeds the even-sampled lattice size (" + std::to_string(size) + ")");
      }
    } catch (const ComboExplosion& e) {
      out.push_back(std::string("experiment: ") + e.what());
    }
  }
  return out;
}

std::vector<RunConfig> build_job_matrix(const ExperimentConfig& cfg) {
  if (auto v = validate_experiment(cfg); !v.empty()) throw ValidationError(std::move(v));

  std::vector<ParameterSpec> evens, uniforms;
  split_specs(cfg.specs, evens, uniforms);
  const auto n = static_cast<std::size_t>(cfg.n_configs);

  std::vector<Assignment> lattice = expand_even(evens, cfg.lattice_cap);
  std::vector<Assignment> points;
  if (lattice.size() >= n) {
    for (std::size_t i : lattice_selection(lattice.size(), n, cfg.base_seed)) points.push_back(lattice[i]);
  } else {
    // Only reachable with uniform specs present: lattice points repeat with fresh draws.
    for (std::size_t i = 0; i < n; ++i) points.push_back(lattice[i % lattice.size()]);
  }
  if (!uniforms.empty()) {
    auto draws = sample_uniform(uniforms, cfg.n_configs, hash_combine(cfg.base_seed, kUniformStream));
    for (std::size_t i = 0; i < n; ++i) points[i].merge(draws[i]);
  }

  std::vector<RunConfig> runs;
  runs.reserve(n);
  std::vector<std::string> problems;
  for (std::size_t i = 0; i < n; ++i) {
    RunConfig rc;
    rc.run_index = static_cast<std::int64_t>(i);
    rc.assignment = std::move(points[i]);
    std::set<std::uint64_t> used;
    for (std::int64_t j = 0; j < cfg.r_seeds; ++j) {
      std::uint64_t s = derive_seed(cfg.base_seed, rc.run_index, j);
      while (!used.insert(s).second) s = mix64(s);
      rc.seeds.push_back(s);
    }
    try {
      (void)apply_assignment(cfg.recipe, rc.assignment);
    } catch (const ValidationError& e) {
      for (const auto& v : e.violations()) problems.push_back("run " + std::to_string(i) + ": " + v);
    }
    runs.push_back(std::move(rc));
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return runs;
}

json to_json(const ParameterSpec& s) {
  json j = {{"target", s.target}, {"kind", to_string(s.kind)}};
  if (s.interval) {
    j["domain"] = {{"lo", s.interval->lo}, {"hi", s.interval->hi}};
  } else {
    json vals = json::array();
    for (const auto& v : s.values) vals.push_back(to_json(v));
    j["domain"] = {{"values", std::move(vals)}};
  }
  if (s.method == SamplingMethod::even) {
    j["method"] = "even";
    if (s.interval) j["steps"] = s.k_steps;
  } else {
    j["method"] = "uniform";
  }
  return j;
}

json to_json(const ExperimentConfig& cfg) {
  json specs = json::array();
  for (const auto& s : cfg.specs) specs.push_back(to_json(s));
  return {{"format_version", 1},
          {"recipe", to_json(cfg.recipe)},
          {"specs", std::move(specs)},
          {"n_configs", cfg.n_configs},
          {"r_seeds", cfg.r_seeds},
          {"base_seed", cfg.base_seed},
          {"output_location", cfg.output_location},
          {"lattice_cap", cfg.lattice_cap}};
}

json to_json(const RunConfig& run) {
  return {{"run_index", run.run_index}, {"assignment", to_json(run.assignment)}, {"seeds", run.seeds}};
}

namespace {

ParameterSpec spec_from_json(const json& j, const std::string& where) {
  Reader r(j, where);
  r.allow_only({"target", "kind", "domain", "method", "steps"});
  ParameterSpec s;
  s.target = r.string("target");
  const std::string kind = r.string("kind");
  auto k = param_kind_from_string(kind);
  if (!k) throw SchemaViolation(r.path("kind") + ": expected numeric, integer or categorical");
  s.kind = *k;

  Reader d(r.object("domain"), r.path("domain"));
  d.allow_only({"lo", "hi", "values"});
  if (d.has("values")) {
    if (d.has("lo") || d.has("hi")) throw SchemaViolation(d.where() + ": give either lo/hi or values");
    const json& vals = d.array("values");
    for (std::size_t i = 0; i < vals.size(); ++i) {
      s.values.push_back(param_value_from_json(vals[i], d.path("values") + "[" + std::to_string(i) + "]"));
    }
  } else {
    s.interval = ParameterSpec::Interval{d.number("lo"), d.number("hi")};
  }

  const std::string method = r.string("method");
  if (method == "even") {
    s.method = SamplingMethod::even;
    if (s.interval) {
      const std::int64_t steps = r.integer("steps");
      if (steps < 0 || steps > 1'000'000) throw SchemaViolation(r.path("steps") + ": out of range");
      s.k_steps = static_cast<int>(steps);
    } else if (r.has("steps")) {
      throw SchemaViolation(r.path("steps") + ": value-set specs enumerate every value");
    }
  } else if (method == "uniform") {
    s.method = SamplingMethod::uniform_random;
    if (r.has("steps")) throw SchemaViolation(r.path("steps") + ": only valid for even sampling");
  } else {
    throw SchemaViolation(r.path("method") + ": expected 'even' or 'uniform'");
  }
  return s;
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExperimentConfig experiment_from_json(const json& doc, const std::filesystem::path& base_dir) {
  Reader r(doc, "");
  r.allow_only({"format_version", "recipe", "specs", "n_configs", "r_seeds", "base_seed", "output_location",
                "lattice_cap"});
  if (r.integer("format_version") != 1) throw SchemaViolation("format_version: only version 1 is supported");

  ExperimentConfig cfg;
  const json& recipe = r.at("recipe");
  if (recipe.is_string()) {
    cfg.recipe = parse_recipe(read_text(base_dir / recipe.get<std::string>()));
  } else {
    cfg.recipe = recipe_from_json(recipe);
  }
  if (r.has("specs")) {
    const json& specs = r.array("specs");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      cfg.specs.push_back(spec_from_json(specs[i], "specs[" + std::to_string(i) + "]"));
    }
  }
  cfg.n_configs = r.integer("n_configs");
  cfg.r_seeds = r.integer("r_seeds");
  cfg.base_seed = r.uinteger_or("base_seed", 0);
  cfg.output_location = r.string_or("output_location", "");
  cfg.lattice_cap = static_cast<std::size_t>(r.uinteger_or("lattice_cap", kDefaultLatticeCap));
  return cfg;
}

ExperimentConfig import_experiment(std::string_view text, const std::filesystem::path& base_dir) {
  return experiment_from_json(json_util::parse(text), base_dir);
}

std::string export_experiment(const ExperimentConfig& cfg) {
  if (auto v = validate_experiment(cfg); !v.empty()) throw ValidationError(std::move(v));
  return to_json(cfg).dump(2) + "\n";
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string experiment_id(const ExperimentConfig& cfg) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::uint64_t h = fnv1a64(json_util::dump(to_json(cfg)));
  std::string id(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) id[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return id;
}

}  // namespace packlab
