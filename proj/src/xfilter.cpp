#include "packlab/xfilter.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"
#include "packlab/nice_scale.hpp"

namespace packlab {

using json_util::json;

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

ParamKind kind_of(const ParamValue& v) {
  if (std::holds_alternative<std::int64_t>(v)) return ParamKind::integer;
  if (std::holds_alternative<double>(v)) return ParamKind::numeric;
  return ParamKind::categorical;
}

}  // namespace

RunTable::RunTable(std::span<const RunSummary> summaries) {
  // Rows in run-index order.
  std::vector<const RunSummary*> rows;
  for (const auto& s : summaries) rows.push_back(&s);
  std::sort(rows.begin(), rows.end(), [](const RunSummary* a, const RunSummary* b) { return a->run_index < b->run_index; });
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i]->run_index == rows[i - 1]->run_index) {
      throw DuplicateRun("run " + std::to_string(rows[i]->run_index) + " appears twice");
    }
  }

  // Parameters first (sorted by path), then metrics (sorted by key). A path
  // whose values mix integers and reals is numeric.
  std::map<std::string, ParamKind> params;
  std::set<std::string> metrics;
  for (const RunSummary* s : rows) {
    for (const auto& [path, v] : s->assignment) {
      const ParamKind k = kind_of(v);
      auto [it, fresh] = params.emplace(path, k);
      if (!fresh && it->second != k) {
        if (it->second == ParamKind::categorical || k == ParamKind::categorical) {
          throw ValidationError({"dimension " + path + " mixes categorical and numeric values"});
        }
        it->second = ParamKind::numeric;
      }
    }
    for (const auto& [key, _] : s->metrics) metrics.insert(key);
  }
  for (const auto& [path, k] : params) dims_.push_back({path, k, false});
  for (const auto& key : metrics) dims_.push_back({key, ParamKind::numeric, true});
  for (std::size_t d = 0; d < dims_.size(); ++d) by_name_.emplace(dims_[d].name, d);

  columns_.assign(dims_.size(), std::vector<double>(rows.size(), kMissing));
  categories_.assign(dims_.size(), {});
  std::vector<std::map<std::string, std::size_t>> codes(dims_.size());
  // Category codes follow sorted value order.
  for (std::size_t d = 0; d < dims_.size(); ++d) {
    if (dims_[d].kind != ParamKind::categorical) continue;
    std::set<std::string> seen;
    for (const RunSummary* s : rows) {
      const auto it = s->assignment.find(dims_[d].name);
      if (it != s->assignment.end()) seen.insert(std::get<std::string>(it->second));
    }
    categories_[d].assign(seen.begin(), seen.end());
    for (std::size_t c = 0; c < categories_[d].size(); ++c) codes[d][categories_[d][c]] = c;
  }

  run_index_.reserve(rows.size());
  seeds_.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const RunSummary& s = *rows[r];
    run_index_.push_back(s.run_index);
    seeds_.push_back(s.seeds);
    for (std::size_t d = 0; d < dims_.size(); ++d) {
      const Dimension& dim = dims_[d];
      if (dim.is_metric) {
        const auto it = s.metrics.find(dim.name);
        if (it != s.metrics.end()) columns_[d][r] = it->second;
        continue;
      }
      const auto it = s.assignment.find(dim.name);
      if (it == s.assignment.end()) continue;
      if (dim.kind == ParamKind::categorical) {
        columns_[d][r] = static_cast<double>(codes[d].at(std::get<std::string>(it->second)));
      } else {
        columns_[d][r] = numeric_value(it->second).value_or(kMissing);
      }
    }
  }
}

std::size_t RunTable::index_of(std::string_view name) const {
  const auto it = by_name_.find(name);
  if (it == by_name_.end()) throw UnknownDimension("unknown dimension '" + std::string(name) + "'");
  return it->second;
}

const Dimension& RunTable::dimension(std::string_view name) const { return dims_[index_of(name)]; }

std::vector<std::uint8_t> RunTable::mask(const RowGroup& row, std::string_view skip) const {
  std::vector<std::uint8_t> m(size(), 1);
  for (const auto& [name, pred] : row.filters) {
    const std::size_t d = index_of(name);
    if (name == skip) continue;
    const auto& col = columns_[d];
    if (dims_[d].kind == ParamKind::categorical) {
      if (pred.interval) throw ValidationError({"filter on " + name + ": categorical dimensions take a value set"});
      std::vector<std::uint8_t> allowed(categories_[d].size(), 0);
      for (std::size_t c = 0; c < categories_[d].size(); ++c) allowed[c] = pred.values.count(categories_[d][c]) ? 1 : 0;
      for (std::size_t r = 0; r < col.size(); ++r) {
        m[r] &= !std::isnan(col[r]) && allowed[static_cast<std::size_t>(col[r])];
      }
    } else {
      if (!pred.interval) throw ValidationError({"filter on " + name + ": numeric dimensions take an interval"});
      const double lo = pred.interval->lo, hi = pred.interval->hi;
      // NaN compares false, so missing values never pass.
      for (std::size_t r = 0; r < col.size(); ++r) m[r] &= col[r] >= lo && col[r] <= hi;
    }
  }
  return m;
}

std::shared_ptr<const RunTable::Binning> RunTable::binning(std::size_t dim, int bins) const {
  {
    std::lock_guard lock(cache_mutex_);
    const auto it = cache_.find({dim, bins});
    if (it != cache_.end()) return it->second;
  }
  auto b = std::make_shared<Binning>();
  const auto& col = columns_[dim];
  double lo = INFINITY, hi = -INFINITY;
  for (double v : col) {
    if (std::isnan(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo > hi) {
    lo = 0.0;
    hi = 1.0;
  }
  b->edges = nice_bin_edges(lo, hi, bins);
  const std::size_t nb = b->edges.size() - 1;
  b->bin_of_row.assign(col.size(), -1);
  for (std::size_t r = 0; r < col.size(); ++r) {
    const double v = col[r];
    if (std::isnan(v) || v < b->edges.front() || v > b->edges.back()) continue;
    // Half-open [e_i, e_i+1), the last bin closed.
    auto k = static_cast<std::size_t>(std::upper_bound(b->edges.begin(), b->edges.end(), v) - b->edges.begin());
    k = std::min(k == 0 ? 0 : k - 1, nb - 1);
    b->bin_of_row[r] = static_cast<std::int32_t>(k);
  }
  std::lock_guard lock(cache_mutex_);
  return cache_.emplace(std::pair{dim, bins}, std::move(b)).first->second;
}

std::vector<std::int64_t> apply_filters(const RunTable& table, const RowGroup& row) {
  const auto m = table.mask(row);
  std::vector<std::int64_t> out;
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (m[r]) out.push_back(table.run_index(r));
  }
  return out;
}

Histogram histogram(const RunTable& table, const RowGroup& row, std::string_view dimension, int bins) {
  const Dimension& dim = table.dimension(dimension);
  const auto& dims = table.dimensions();
  const auto d = static_cast<std::size_t>(&dim - dims.data());
  const auto m = table.mask(row, dimension);

  Histogram h;
  h.dimension = dim.name;
  h.kind = dim.kind;
  if (dim.kind == ParamKind::categorical) {
    h.categories = table.categories(d);
    h.full_counts.assign(h.categories.size(), 0);
    h.filtered_counts.assign(h.categories.size(), 0);
    for (std::size_t r = 0; r < table.size(); ++r) {
      const double v = table.value(d, r);
      if (std::isnan(v)) continue;
      const auto c = static_cast<std::size_t>(v);
      ++h.full_counts[c];
      if (m[r]) ++h.filtered_counts[c];
    }
    return h;
  }
  if (bins < 1) throw ValidationError({"histogram: bins must be >= 1"});
  const auto b = table.binning(d, bins);
  h.edges = b->edges;
  h.full_counts.assign(h.edges.size() - 1, 0);
  h.filtered_counts.assign(h.edges.size() - 1, 0);
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::int32_t k = b->bin_of_row[r];
    if (k < 0) continue;
    ++h.full_counts[static_cast<std::size_t>(k)];
    if (m[r]) ++h.filtered_counts[static_cast<std::size_t>(k)];
  }
  return h;
}

std::vector<MatchingRun> list_matching_runs(const RunTable& table, const RowGroup& row) {
  const auto m = table.mask(row);
  std::vector<MatchingRun> out;
  for (std::size_t r = 0; r < m.size(); ++r) {
    if (m[r]) out.push_back({table.run_index(r), table.seeds(r)});
  }
  return out;
}

// ---------------------------------------------------------------- wire forms

RowGroup row_from_json(const json& filters, std::string row_id) {
  RowGroup row;
  row.row_id = std::move(row_id);
  if (filters.is_null()) return row;
  if (!filters.is_object()) throw SchemaViolation("filters: expected an object");
  for (const auto& [name, spec] : filters.items()) {
    const std::string where = "filters." + name;
    const json* range = nullptr;
    const json* values = nullptr;
    if (spec.is_object()) {
      json_util::Reader r(spec, where);
      r.allow_only({"range", "values"});
      if (r.has("range")) range = &r.at("range");
      if (r.has("values")) values = &r.at("values");
      if ((range == nullptr) == (values == nullptr)) throw SchemaViolation(where + ": give exactly one of range, values");
    } else if (spec.is_array() && spec.size() == 2 && spec[0].is_number() && spec[1].is_number()) {
      range = &spec;
    } else if (spec.is_array()) {
      values = &spec;
    } else {
      throw SchemaViolation(where + ": expected a range or a value list");
    }
    if (range) {
      if (!range->is_array() || range->size() != 2) throw SchemaViolation(where + ".range: expected [lo, hi]");
      row.filters[name] = Predicate::range(json_util::as_number((*range)[0], where), json_util::as_number((*range)[1], where));
    } else {
      if (!values->is_array()) throw SchemaViolation(where + ".values: expected a list");
      std::set<std::string> set;
      for (const auto& v : *values) {
        if (!v.is_string()) throw SchemaViolation(where + ".values: expected strings");
        set.insert(v.get<std::string>());
      }
      row.filters[name] = Predicate::one_of(std::move(set));
    }
  }
  return row;
}

json to_json(const RowGroup& row) {
  json out = json::object();
  for (const auto& [name, p] : row.filters) {
    if (p.interval) {
      out[name] = {{"range", {p.interval->lo, p.interval->hi}}};
    } else {
      out[name] = {{"values", std::vector<std::string>(p.values.begin(), p.values.end())}};
    }
  }
  return out;
}

json to_json(const Histogram& h) {
  json out{{"dimension", h.dimension},
           {"kind", to_string(h.kind)},
           {"full_counts", h.full_counts},
           {"filtered_counts", h.filtered_counts}};
  if (h.kind == ParamKind::categorical) {
    out["categories"] = h.categories;
  } else {
    out["edges"] = h.edges;
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s, std::string_view expr) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ValidationError({"filter '" + std::string(expr) + "': '" + std::string(s) + "' is not a number"});
  }
  return v;
}

}  // namespace

std::pair<std::string, Predicate> parse_filter_expression(std::string_view expr) {
  const auto eq = expr.find('=');
  auto fail = [&]() -> std::pair<std::string, Predicate> {
    throw ValidationError({"filter '" + std::string(expr) + "': expected name=[lo,hi] or name={a,b}"});
  };
  if (eq == std::string_view::npos) return fail();
  const std::string_view name = trim(expr.substr(0, eq));
  const std::string_view body = trim(expr.substr(eq + 1));
  if (name.empty() || body.size() < 2) return fail();
  const std::string_view inner = body.substr(1, body.size() - 2);
  if (body.front() == '[' && body.back() == ']') {
    const auto comma = inner.find(',');
    if (comma == std::string_view::npos || inner.find(',', comma + 1) != std::string_view::npos) return fail();
    return {std::string(name), Predicate::range(parse_double(inner.substr(0, comma), expr), parse_double(inner.substr(comma + 1), expr))};
  }
  if (body.front() == '{' && body.back() == '}') {
    std::set<std::string> values;
    std::size_t start = 0;
    while (start <= inner.size()) {
      const auto comma = inner.find(',', start);
      const auto item = trim(inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
      if (!item.empty()) values.emplace(item);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    return {std::string(name), Predicate::one_of(std::move(values))};
  }
  return fail();
}

}  // namespace packlab
