#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shapeq/expr.hpp"
#include "shapeq/series.hpp"

namespace shapeq {

enum class QuerySource { sketch, equation, upload, series };

/// The shape being searched for, with x strictly ascending.
struct PatternQuery {
  QuerySource source = QuerySource::series;
  std::vector<Point> points;
  std::optional<std::string> origin_id;    ///< set when built from a series
  std::optional<std::string> origin_text;  ///< equation text or upload file name

  /// Throws Error(Errc::parameter) unless >= 2 finite points, x strictly ascending.
  void validate() const;
};

enum class Metric { euclidean, slope };
enum class Normalization { zscore, minmax, none };
enum class SmoothMethod { none, moving_average, exponential };

std::string_view to_string(QuerySource s);
std::string_view to_string(Metric m);
std::string_view to_string(Normalization n);
std::string_view to_string(SmoothMethod s);

struct XRange {
  double min = 0.0;
  double max = 0.0;
};

/// Knobs that control how a query is compared against candidates.
struct MatchSpec {
  Metric metric = Metric::euclidean;
  Normalization normalize = Normalization::zscore;
  SmoothMethod smooth = SmoothMethod::none;
  double smooth_param = 1.0;  ///< odd window for moving average, alpha for exponential
  std::size_t resample_n = 50;
  std::optional<XRange> x_range;  ///< in query coordinates
  bool x_normalize = true;

  /// Throws Error(Errc::parameter) on inconsistent settings.
  void validate() const;
};

struct RankedMatch {
  std::string series_id;
  double distance = 0.0;
  int rank = 0;
  bool operator==(const RankedMatch&) const = default;
};

struct RankDiagnostics {
  std::size_t candidates = 0;
  std::vector<std::string> skipped;  ///< no points inside x_range
  std::vector<std::string> flat;     ///< constant after smoothing; normalized to zeros
  bool query_flat = false;
};

struct RankResult {
  std::vector<RankedMatch> matches;
  RankDiagnostics diagnostics;
};

/// Piecewise-linear samples at n evenly spaced x over [first.x, last.x].
std::vector<double> resample(std::span<const Point> points, std::size_t n);

/// z-score (population std), min-max, or identity. Constant input maps to
/// all zeros under zscore and minmax.
std::vector<double> normalize(std::span<const double> v, Normalization mode);

/// Centered moving average (window truncated at the ends) or
/// exponential smoothing s[0]=v[0], s[i]=a*v[i]+(1-a)*s[i-1].
std::vector<double> smooth(std::span<const double> v, SmoothMethod method, double param);

double distance(std::span<const double> a, std::span<const double> b, Metric metric);

/// Runs restrict -> resample -> smooth -> normalize on one point list and
/// returns the comparison vector, or nullopt when fewer than 2 points fall
/// inside the range. `flat` reports a constant vector before normalization.
std::optional<std::vector<double>> pipeline(std::span<const Point> points, const MatchSpec& spec,
                                            const std::optional<XRange>& relative_range,
                                            bool* flat = nullptr);

/// Ranks the collection by distance to the query, ascending, ties broken
/// by series id, truncated to top_k.
RankResult rank(const PatternQuery& query, std::span<const Series> collection,
                const MatchSpec& spec, std::size_t top_k);

/// Maps canvas pixels (y grows downward) into the unit square and collapses
/// backtracking: a point at or left of the previous x redraws that span.
PatternQuery query_from_sketch(std::span<const Point> canvas_points, double canvas_width,
                               double canvas_height);

/// Samples y = f(x) at n evenly spaced x in [xmin, xmax].
PatternQuery query_from_equation(const expr::ExprAst& ast, double xmin, double xmax,
                                 std::size_t n, std::string text = {});

/// Two-column x,y CSV, header optional.
PatternQuery query_from_upload(std::string_view csv_bytes, std::string file_name = {});

/// Throws Error(Errc::not_found) for an unknown id.
PatternQuery query_from_series(std::string_view series_id, std::span<const Series> collection);

/// A fixed-length vector (e.g. a cluster centroid) as points at x = i/(n-1).
PatternQuery query_from_vector(std::span<const double> values, std::string origin);

/// Overdraws part of an existing query: base points inside the stroke's x
/// span are replaced by the stroke. `stroke` is in the base query's
/// coordinates. The result keeps origin_id and is tagged as a sketch.
PatternQuery overdraw(const PatternQuery& base, std::span<const Point> stroke);

}  // namespace shapeq
