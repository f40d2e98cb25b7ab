#pragma once

#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapeq/filter.hpp"
#include "shapeq/schema.hpp"
#include "shapeq/series.hpp"

namespace shapeq {

inline constexpr std::size_t kMaxDatasetRows = 5'000'000;

/// Immutable table. Every row has one cell per column.
class Dataset {
 public:
  /// Throws Error(Errc::schema) when column names are empty or repeated, or
  /// a row has the wrong width.
  Dataset(std::string name, std::vector<Column> columns, std::vector<Row> rows);

  const std::string& name() const { return name_; }
  std::span<const Column> columns() const { return columns_; }
  std::span<const Row> rows() const { return rows_; }
  std::size_t row_count() const { return rows_.size(); }

  /// Throws Error(Errc::validation) for unknown names.
  std::size_t column_index(std::string_view name) const;
  const Column& column(std::string_view name) const { return columns_[column_index(name)]; }

 private:
  std::string name_;
  std::vector<Column> columns_;
  std::vector<Row> rows_;
};

/// Parses CSV with a header row and infers column kinds: a column is
/// quantitative iff every non-missing value is a finite number. Empty cells
/// and "NaN" are missing.
Dataset load_dataset(std::string_view csv_bytes, std::string name);

enum class Display { line, scatter };
enum class Aggregate { none, mean, median };

std::string_view to_string(Display d);
std::string_view to_string(Aggregate a);

/// The (x, y, group) choice that induces a collection of series.
struct ViewSpec {
  std::string x_attr;
  std::string y_attr;
  std::string group_attr;
  Display display = Display::line;
  Aggregate aggregate = Aggregate::mean;  ///< resolves duplicate x within a group

  /// Throws Error(Errc::validation) unless the attributes are distinct,
  /// present, and x/y are quantitative.
  void validate(const Dataset& ds) const;
};

/// Closed y interval a series must stay within to be kept.
struct ValueRange {
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct CollectionDiagnostics {
  std::size_t rows_total = 0;
  std::size_t rows_filtered = 0;  ///< rejected by the filter
  std::size_t rows_missing = 0;   ///< missing x, y or group value
  std::vector<std::string> short_series;     ///< dropped with fewer than 2 points
  std::vector<std::string> out_of_y_range;   ///< dropped by the y-range constraint
};

struct Collection {
  std::vector<Series> series;  ///< ordered lexicographically by id
  CollectionDiagnostics diagnostics;
};

/// Groups rows into series. Throws Error(Errc::validation) for an invalid
/// view or filter and Error(Errc::ambiguity) when aggregate=none meets a
/// duplicate x.
Collection build_collection(const Dataset& ds, const ViewSpec& view,
                            const filter::FilterAst* filter = nullptr,
                            std::optional<ValueRange> y_range = std::nullopt);

struct RangeConstraint {
  std::string attr;
  double min = -std::numeric_limits<double>::infinity();
  double max = std::numeric_limits<double>::infinity();
};

struct DynamicClass {
  std::string name;
  std::vector<RangeConstraint> constraints;  ///< conjunction, bounds inclusive
  Aggregate aggregate = Aggregate::mean;     ///< mean or median

  void validate(const Dataset& ds) const;
  bool contains(const Dataset& ds, const Row& row) const;
};

/// Pointwise mean/median of member series after resampling each to n points.
/// Members are aligned by relative position along their own x extent; the
/// output x grid spans the union of member extents.
Series aggregate_members(std::span<const Series> members, Aggregate how, std::size_t n,
                         std::string label);

/// Aggregate series over the rows in the class. Throws
/// Error(Errc::empty_class) when no member series exists.
Series aggregate_class(const Dataset& ds, const DynamicClass& cls, const ViewSpec& view,
                       std::size_t resample_n = 50);

/// Name -> dataset map. Readers run concurrently; writers are serialized.
class DatasetRegistry {
 public:
  void put(std::shared_ptr<const Dataset> ds);
  /// Throws Error(Errc::not_found).
  std::shared_ptr<const Dataset> get(std::string_view name) const;
  bool contains(std::string_view name) const;
  std::vector<std::shared_ptr<const Dataset>> list() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const Dataset>, std::less<>> datasets_;
};

}  // namespace shapeq
