#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "packlab/metrics.hpp"
#include "packlab/params.hpp"

namespace packlab {

struct Dimension {
  std::string name;
  ParamKind kind = ParamKind::numeric;
  bool is_metric = false;

  friend bool operator==(const Dimension&, const Dimension&) = default;
};

/// Closed interval for numeric and integer dimensions, value set for
/// categorical ones. lo > hi is allowed and matches nothing.
struct Predicate {
  struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    friend bool operator==(const Interval&, const Interval&) = default;
  };
  std::optional<Interval> interval;
  std::set<std::string> values;

  static Predicate range(double lo, double hi) { return {Interval{lo, hi}, {}}; }
  static Predicate one_of(std::set<std::string> v) { return {std::nullopt, std::move(v)}; }

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

struct RowGroup {
  std::string row_id;
  std::map<std::string, Predicate> filters;
};

struct Histogram {
  std::string dimension;
  ParamKind kind = ParamKind::numeric;
  std::vector<double> edges;            // numeric and integer
  std::vector<std::string> categories;  // categorical
  std::vector<std::int64_t> full_counts;
  std::vector<std::int64_t> filtered_counts;
};

struct MatchingRun {
  std::int64_t run_index = 0;
  std::vector<std::uint64_t> seeds;
};

inline constexpr int kDefaultBins = 20;

/// Immutable columnar table over run summaries. Every assignment path and
/// every scalar metric becomes a dimension. Queries are thread-safe.
class RunTable {
 public:
  /// Throws DuplicateRun if two summaries share a run index.
  explicit RunTable(std::span<const RunSummary> summaries);

  std::size_t size() const noexcept { return run_index_.size(); }
  const std::vector<Dimension>& dimensions() const noexcept { return dims_; }
  const Dimension& dimension(std::string_view name) const;  // UnknownDimension

  std::int64_t run_index(std::size_t row) const { return run_index_[row]; }
  const std::vector<std::uint64_t>& seeds(std::size_t row) const { return seeds_[row]; }
  // Numeric value, or the category code for categorical dimensions; NaN if absent.
  double value(std::size_t dim, std::size_t row) const { return columns_[dim][row]; }
  const std::vector<std::string>& categories(std::size_t dim) const { return categories_[dim]; }

  /// Rows passing every predicate; `skip` names one filter to ignore.
  /// Throws UnknownDimension or ValidationError (predicate kind mismatch).
  std::vector<std::uint8_t> mask(const RowGroup& row, std::string_view skip = {}) const;

  /// Cached per (dimension, bins): bin edges over the full extent and each row's bin (-1 if absent).
  struct Binning {
    std::vector<double> edges;
    std::vector<std::int32_t> bin_of_row;
  };
  std::shared_ptr<const Binning> binning(std::size_t dim, int bins) const;

 private:
  std::size_t index_of(std::string_view name) const;

  std::vector<Dimension> dims_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
  std::vector<std::vector<double>> columns_;
  std::vector<std::vector<std::string>> categories_;
  std::vector<std::int64_t> run_index_;
  std::vector<std::vector<std::uint64_t>> seeds_;

  mutable std::mutex cache_mutex_;
  mutable std::map<std::pair<std::size_t, int>, std::shared_ptr<const Binning>> cache_;
};

/// Run indices (ascending) matching every predicate of the row.
std::vector<std::int64_t> apply_filters(const RunTable& table, const RowGroup& row);

/// Full counts over all runs; filtered counts over runs matching every
/// filter except the one on `dimension` itself.
Histogram histogram(const RunTable& table, const RowGroup& row, std::string_view dimension, int bins = kDefaultBins);

std::vector<MatchingRun> list_matching_runs(const RunTable& table, const RowGroup& row);

/// Wire form: {"name": {"range": [lo, hi]}} or {"name": {"values": [...]}};
/// a bare [lo, hi] or list of strings is accepted as shorthand.
RowGroup row_from_json(const nlohmann::json& filters, std::string row_id = {});
nlohmann::json to_json(const RowGroup& row);
nlohmann::json to_json(const Histogram& h);

/// Command-line grammar: `name=[lo,hi]` or `name={a,b}`.
std::pair<std::string, Predicate> parse_filter_expression(std::string_view expr);

}  // namespace packlab
