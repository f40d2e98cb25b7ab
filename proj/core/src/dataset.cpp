#include "shapeq/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <set>

#include "shapeq/csv.hpp"
#include "shapeq/error.hpp"
#include "shapeq/pattern.hpp"

namespace shapeq {

std::string_view to_string(Display d) { return d == Display::line ? "line" : "scatter"; }

std::string_view to_string(Aggregate a) {
  switch (a) {
    case Aggregate::none: return "none";
    case Aggregate::mean: return "mean";
    case Aggregate::median: return "median";
  }
  return "?";
}

Dataset::Dataset(std::string name, std::vector<Column> columns, std::vector<Row> rows)
    : name_(std::move(name)), columns_(std::move(columns)), rows_(std::move(rows)) {
  std::set<std::string_view> seen;
  for (const Column& c : columns_) {
    if (c.name.empty()) throw Error(Errc::schema, "column names must be nonempty");
    if (!seen.insert(c.name).second) throw Error(Errc::schema, "duplicate column name '" + c.name + "'");
  }
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (rows_[r].size() != columns_.size()) {
      throw Error(Errc::schema, "row " + std::to_string(r + 1) + " has " +
                                    std::to_string(rows_[r].size()) + " cells, expected " +
                                    std::to_string(columns_.size()));
    }
  }
}

std::size_t Dataset::column_index(std::string_view name) const {
  auto index = find_column(columns_, name);
  if (!index) throw Error(Errc::validation, "unknown attribute '" + std::string(name) + "'");
  return *index;
}

namespace {

bool is_missing_text(std::string_view s) {
  if (s.empty()) return true;
  return s == "NaN";
}

}  // namespace

Dataset load_dataset(std::string_view csv_bytes, std::string name) {
  auto records = csv::read(csv_bytes);
  if (records.empty()) throw Error(Errc::parse, "empty CSV: a header row is required");
  const auto& header = records.front().fields;
  if (records.size() < 2) throw Error(Errc::parse, "CSV has a header but no data rows");
  if (records.size() - 1 > kMaxDatasetRows) {
    throw Error(Errc::too_large, "dataset has " + std::to_string(records.size() - 1) +
                                     " rows; the limit is " + std::to_string(kMaxDatasetRows));
  }

  std::vector<Column> columns;
  std::set<std::string_view> seen;
  for (const auto& field : header) {
    if (field.empty()) throw Error(Errc::schema, "header has an empty column name");
    if (!seen.insert(field).second) throw Error(Errc::schema, "duplicate column name '" + field + "'");
    columns.push_back({field, ColumnKind::quantitative, true});
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].fields.size() != header.size()) {
      throw Error(Errc::parse, "line " + std::to_string(records[r].line) + ": expected " +
                                   std::to_string(header.size()) + " fields, got " +
                                   std::to_string(records[r].fields.size()));
    }
  }

  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (std::size_t r = 1; r < records.size(); ++r) {
      const std::string& cell = records[r].fields[c];
      if (!is_missing_text(cell) && !csv::parse_number(cell)) {
        columns[c].kind = ColumnKind::categorical;
        break;
      }
    }
  }

  std::vector<Row> rows;
  rows.reserve(records.size() - 1);
  for (std::size_t r = 1; r < records.size(); ++r) {
    Row row(columns.size());
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::string& cell = records[r].fields[c];
      if (is_missing_text(cell)) continue;
      if (columns[c].kind == ColumnKind::quantitative) {
        row[c] = *csv::parse_number(cell);
      } else {
        row[c] = std::move(cell);
      }
    }
    rows.push_back(std::move(row));
  }
  return Dataset(std::move(name), std::move(columns), std::move(rows));
}

void ViewSpec::validate(const Dataset& ds) const {
  const Column& x = ds.column(x_attr);
  const Column& y = ds.column(y_attr);
  ds.column(group_attr);
  if (x_attr == y_attr || x_attr == group_attr || y_attr == group_attr) {
    throw Error(Errc::validation, "x, y and group attributes must be distinct");
  }
  if (x.kind != ColumnKind::quantitative) {
    throw Error(Errc::validation, "x attribute '" + x_attr + "' must be quantitative");
  }
  if (y.kind != ColumnKind::quantitative) {
    throw Error(Errc::validation, "y attribute '" + y_attr + "' must be quantitative");
  }
}

namespace {

std::string group_key(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return csv::format_number(*d);
  return std::get<std::string>(cell);
}

double median_of(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

// Sorts by x and merges duplicate x values per `how`.
std::vector<Point> collapse(std::vector<Point> raw, Aggregate how, const std::string& group) {
  std::stable_sort(raw.begin(), raw.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
  std::vector<Point> out;
  out.reserve(raw.size());
  std::vector<double> ys;
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t j = i;
    while (j < raw.size() && raw[j].x == raw[i].x) ++j;
    if (j - i > 1) {
      if (how == Aggregate::none) {
        throw Error(Errc::ambiguity, "group '" + group + "' has duplicate x value " +
                                         csv::format_number(raw[i].x) +
                                         " and aggregate is none");
      }
      ys.clear();
      for (std::size_t k = i; k < j; ++k) ys.push_back(raw[k].y);
      double y = 0.0;
      if (how == Aggregate::mean) {
        for (double v : ys) y += v;
        y /= static_cast<double>(ys.size());
      } else {
        y = median_of(ys);
      }
      out.push_back({raw[i].x, y});
    } else {
      out.push_back(raw[i]);
    }
    i = j;
  }
  return out;
}

template <typename Keep>
Collection group_rows(const Dataset& ds, const ViewSpec& view, Keep&& keep,
                      std::optional<ValueRange> y_range) {
  const std::size_t xi = ds.column_index(view.x_attr);
  const std::size_t yi = ds.column_index(view.y_attr);
  const std::size_t gi = ds.column_index(view.group_attr);

  Collection out;
  out.diagnostics.rows_total = ds.row_count();
  struct Group {
    std::vector<Point> points;
    std::size_t rows = 0;
  };
  std::map<std::string, Group> groups;
  for (const Row& row : ds.rows()) {
    if (!keep(row)) {
      ++out.diagnostics.rows_filtered;
      continue;
    }
    if (is_missing(row[xi]) || is_missing(row[yi]) || is_missing(row[gi])) {
      ++out.diagnostics.rows_missing;
      continue;
    }
    Group& g = groups[group_key(row[gi])];
    g.points.push_back({std::get<double>(row[xi]), std::get<double>(row[yi])});
    ++g.rows;
  }

  for (auto& [id, g] : groups) {
    auto points = collapse(std::move(g.points), view.aggregate, id);
    if (points.size() < 2) {
      out.diagnostics.short_series.push_back(id);
      continue;
    }
    if (y_range) {
      auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                          [](const Point& a, const Point& b) { return a.y < b.y; });
      if (lo->y < y_range->min || hi->y > y_range->max) {
        out.diagnostics.out_of_y_range.push_back(id);
        continue;
      }
    }
    out.series.push_back({id, std::move(points), g.rows});
  }
  return out;
}

}  // namespace

Collection build_collection(const Dataset& ds, const ViewSpec& view, const filter::FilterAst* filter,
                            std::optional<ValueRange> y_range) {
  view.validate(ds);
  if (filter && !filter->empty()) {
    filter::BoundFilter bound(*filter, ds.columns());
    return group_rows(ds, view, [&](const Row& row) { return bound.matches(row); }, y_range);
  }
  return group_rows(ds, view, [](const Row&) { return true; }, y_range);
}

void DynamicClass::validate(const Dataset& ds) const {
  if (name.empty()) throw Error(Errc::validation, "dynamic class needs a name");
  if (aggregate == Aggregate::none) {
    throw Error(Errc::validation, "dynamic class '" + name + "' aggregate must be mean or median");
  }
  for (const auto& c : constraints) {
    const Column& col = ds.column(c.attr);
    if (col.kind != ColumnKind::quantitative) {
      throw Error(Errc::validation, "dynamic class constraint on categorical attribute '" + c.attr + "'");
    }
    if (std::isnan(c.min) || std::isnan(c.max) || c.min > c.max) {
      throw Error(Errc::validation, "dynamic class constraint on '" + c.attr + "' needs min <= max");
    }
  }
}

bool DynamicClass::contains(const Dataset& ds, const Row& row) const {
  for (const auto& c : constraints) {
    const auto* v = std::get_if<double>(&row[ds.column_index(c.attr)]);
    if (!v || *v < c.min || *v > c.max) return false;
  }
  return true;
}

Series aggregate_members(std::span<const Series> members, Aggregate how, std::size_t n,
                         std::string label) {
  if (members.empty()) throw Error(Errc::empty_class, "class '" + label + "' has no members");
  if (how == Aggregate::none) throw Error(Errc::parameter, "aggregate must be mean or median");
  std::vector<std::vector<double>> sampled;
  sampled.reserve(members.size());
  double x0 = members.front().points.front().x;
  double x1 = members.front().points.back().x;
  std::size_t rows = 0;
  for (const Series& s : members) {
    sampled.push_back(resample(s.points, n));
    x0 = std::min(x0, s.points.front().x);
    x1 = std::max(x1, s.points.back().x);
    rows += s.source_count;
  }
  Series out;
  out.id = std::move(label);
  out.source_count = rows;
  out.points.reserve(n);
  std::vector<double> column(sampled.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < sampled.size(); ++m) column[m] = sampled[m][i];
    double y = 0.0;
    if (how == Aggregate::mean) {
      for (double v : column) y += v;
      y /= static_cast<double>(column.size());
    } else {
      y = median_of(column);
    }
    double x = i + 1 == n ? x1 : x0 + (x1 - x0) * static_cast<double>(i) / static_cast<double>(n - 1);
    out.points.push_back({x, y});
  }
  return out;
}

Series aggregate_class(const Dataset& ds, const DynamicClass& cls, const ViewSpec& view,
                       std::size_t resample_n) {
  view.validate(ds);
  cls.validate(ds);
  auto members = group_rows(ds, view, [&](const Row& row) { return cls.contains(ds, row); }, std::nullopt);
  if (members.series.empty()) {
    throw Error(Errc::empty_class, "dynamic class '" + cls.name + "' has no member series");
  }
  return aggregate_members(members.series, cls.aggregate, resample_n, cls.name);
}

void DatasetRegistry::put(std::shared_ptr<const Dataset> ds) {
  std::unique_lock lock(mutex_);
  datasets_[ds->name()] = std::move(ds);
}

std::shared_ptr<const Dataset> DatasetRegistry::get(std::string_view name) const {
  std::shared_lock lock(mutex_);
  auto it = datasets_.find(name);
  if (it == datasets_.end()) throw Error(Errc::not_found, "unknown dataset '" + std::string(name) + "'");
  return it->second;
}

bool DatasetRegistry::contains(std::string_view name) const {
  std::shared_lock lock(mutex_);
  return datasets_.find(name) != datasets_.end();
}

std::vector<std::shared_ptr<const Dataset>> DatasetRegistry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<std::shared_ptr<const Dataset>> out;
  for (const auto& [_, ds] : datasets_) out.push_back(ds);
  return out;
}

}  // namespace shapeq
