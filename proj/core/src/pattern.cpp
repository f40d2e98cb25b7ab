#include "shapeq/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "shapeq/csv.hpp"
#include "shapeq/error.hpp"

namespace shapeq {

std::string_view to_string(QuerySource s) {
  switch (s) {
    case QuerySource::sketch: return "sketch";
    case QuerySource::equation: return "equation";
    case QuerySource::upload: return "upload";
    case QuerySource::series: return "series";
  }
  return "?";
}

std::string_view to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "slope"; }

std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::zscore: return "zscore";
    case Normalization::minmax: return "minmax";
    case Normalization::none: return "none";
  }
  return "?";
}

std::string_view to_string(SmoothMethod s) {
  switch (s) {
    case SmoothMethod::none: return "none";
    case SmoothMethod::moving_average: return "movingAverage";
    case SmoothMethod::exponential: return "exponential";
  }
  return "?";
}

namespace {

[[noreturn]] void bad_param(const std::string& message) { throw Error(Errc::parameter, message); }

bool is_odd_window(double w) { return w >= 1 && std::floor(w) == w && static_cast<long long>(w) % 2 == 1; }

void check_points(std::span<const Point> points, const char* what) {
  if (points.size() < 2) bad_param(std::string(what) + " needs at least 2 points");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!std::isfinite(points[i].x) || !std::isfinite(points[i].y)) {
      bad_param(std::string(what) + " has a non-finite value at index " + std::to_string(i));
    }
    if (i > 0 && !(points[i].x > points[i - 1].x)) {
      bad_param(std::string(what) + " x values must be strictly ascending (index " +
                std::to_string(i) + ")");
    }
  }
}

// Runs fn(i) for i in [0, n), fanned out over hardware threads for large n.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  constexpr std::size_t kMinPerThread = 2048;
  std::size_t threads = std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()),
                                              n / kMinPerThread);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    std::size_t lo = t * chunk;
    std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
}

}  // namespace

void PatternQuery::validate() const { check_points(points, "pattern query"); }

void MatchSpec::validate() const {
  if (resample_n < 2) bad_param("resampleN must be at least 2");
  if (metric == Metric::slope && resample_n < 3) bad_param("slope metric requires resampleN >= 3");
  if (smooth == SmoothMethod::moving_average) {
    if (!is_odd_window(smooth_param)) bad_param("moving-average window must be an odd integer >= 1");
    if (smooth_param > static_cast<double>(resample_n)) {
      bad_param("moving-average window exceeds resampleN");
    }
  }
  if (smooth == SmoothMethod::exponential && !(smooth_param > 0.0 && smooth_param <= 1.0)) {
    bad_param("exponential smoothing alpha must be in (0, 1]");
  }
  if (x_range) {
    if (!std::isfinite(x_range->min) || !std::isfinite(x_range->max) ||
        !(x_range->min < x_range->max)) {
      bad_param("xRange requires finite xmin < xmax");
    }
  }
}

std::vector<double> resample(std::span<const Point> points, std::size_t n) {
  if (n < 2) bad_param("resample length must be at least 2");
  if (points.size() < 2) bad_param("resample needs at least 2 points");
  std::vector<double> out(n);
  const double x0 = points.front().x;
  const double x1 = points.back().x;
  const double span = x1 - x0;
  std::size_t seg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      out[i] = points.front().y;
      continue;
    }
    if (i == n - 1) {
      out[i] = points.back().y;
      continue;
    }
    double x = x0 + span * static_cast<double>(i) / static_cast<double>(n - 1);
    while (seg + 2 < points.size() && points[seg + 1].x < x) ++seg;
    const Point& a = points[seg];
    const Point& b = points[seg + 1];
    double t = (x - a.x) / (b.x - a.x);
    out[i] = a.y + t * (b.y - a.y);
  }
  return out;
}

std::vector<double> normalize(std::span<const double> v, Normalization mode) {
  std::vector<double> out(v.begin(), v.end());
  if (v.empty() || mode == Normalization::none) return out;
  if (mode == Normalization::zscore) {
    double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    double sd = std::sqrt(ss / static_cast<double>(v.size()));
    if (sd == 0.0 || !std::isfinite(sd)) {
      std::fill(out.begin(), out.end(), 0.0);
      return out;
    }
    for (double& x : out) x = (x - mean) / sd;
    return out;
  }
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  double range = *hi - *lo;
  if (range == 0.0) {
    std::fill(out.begin(), out.end(), 0.0);
    return out;
  }
  for (double& x : out) x = (x - *lo) / range;
  return out;
}

std::vector<double> smooth(std::span<const double> v, SmoothMethod method, double param) {
  std::vector<double> out(v.begin(), v.end());
  switch (method) {
    case SmoothMethod::none:
      return out;
    case SmoothMethod::moving_average: {
      if (!is_odd_window(param)) bad_param("moving-average window must be an odd integer >= 1");
      auto window = static_cast<std::size_t>(param);
      if (window > v.size()) bad_param("moving-average window exceeds series length");
      if (window == 1) return out;
      const std::size_t half = window / 2;
      // Prefix sums keep this O(n) for any window.
      std::vector<double> prefix(v.size() + 1, 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) prefix[i + 1] = prefix[i] + v[i];
      for (std::size_t i = 0; i < v.size(); ++i) {
        std::size_t lo = i >= half ? i - half : 0;
        std::size_t hi = std::min(v.size() - 1, i + half);
        out[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
      }
      return out;
    }
    case SmoothMethod::exponential: {
      if (!(param > 0.0 && param <= 1.0)) bad_param("exponential smoothing alpha must be in (0, 1]");
      if (param == 1.0) return out;
      for (std::size_t i = 1; i < out.size(); ++i) {
        out[i] = param * v[i] + (1.0 - param) * out[i - 1];
      }
      return out;
    }
  }
  return out;
}

double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (a.size() != b.size()) {
    bad_param("distance length mismatch: " + std::to_string(a.size()) + " vs " +
              std::to_string(b.size()));
  }
  const std::size_t min_len = metric == Metric::slope ? 3 : 2;
  if (a.size() < min_len) bad_param("distance vectors too short");
  double ss = 0.0;
  if (metric == Metric::euclidean) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      double d = a[i] - b[i];
      ss += d * d;
    }
  } else {
    for (std::size_t i = 1; i < a.size(); ++i) {
      double d = (a[i] - a[i - 1]) - (b[i] - b[i - 1]);
      ss += d * d;
    }
  }
  return std::sqrt(ss);
}

std::optional<std::vector<double>> pipeline(std::span<const Point> points, const MatchSpec& spec,
                                            const std::optional<XRange>& window, bool* flat) {
  std::vector<Point> kept;
  std::span<const Point> use = points;
  if (window) {
    const double x0 = points.front().x;
    const double span = points.back().x - x0;
    for (const Point& p : points) {
      double x = spec.x_normalize ? (p.x - x0) / span : p.x;
      if (x >= window->min && x <= window->max) kept.push_back(p);
    }
    if (kept.size() < 2) return std::nullopt;
    use = kept;
  }
  std::vector<double> v = resample(use, spec.resample_n);
  v = smooth(v, spec.smooth, spec.smooth_param);
  if (flat) {
    auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    *flat = *lo == *hi;
  }
  return normalize(v, spec.normalize);
}

RankResult rank(const PatternQuery& query, std::span<const Series> collection,
                const MatchSpec& spec, std::size_t top_k) {
  spec.validate();
  query.validate();
  if (top_k < 1) bad_param("topK must be at least 1");
  if (collection.empty()) throw Error(Errc::empty_collection, "collection is empty");

  std::optional<XRange> window;
  if (spec.x_range) {
    const double q0 = query.points.front().x;
    const double q1 = query.points.back().x;
    if (spec.x_range->max < q0 || spec.x_range->min > q1) {
      bad_param("xRange does not overlap the query's x extent");
    }
    window = spec.x_range;
    if (spec.x_normalize) {
      window = XRange{(spec.x_range->min - q0) / (q1 - q0), (spec.x_range->max - q0) / (q1 - q0)};
    }
  }

  RankResult result;
  auto query_vec = pipeline(query.points, spec, window, &result.diagnostics.query_flat);
  if (!query_vec) bad_param("xRange leaves fewer than 2 query points");

  struct Scored {
    double distance;
    bool usable;
    bool flat;
  };
  std::vector<Scored> scored(collection.size());
  parallel_for(collection.size(), [&](std::size_t i) {
    const Series& s = collection[i];
    if (s.points.size() < 2) {
      scored[i] = {0.0, false, false};
      return;
    }
    bool flat = false;
    auto vec = pipeline(s.points, spec, window, &flat);
    scored[i] = vec ? Scored{distance(*query_vec, *vec, spec.metric), true, flat}
                    : Scored{0.0, false, false};
  });

  std::vector<std::size_t> order;
  order.reserve(collection.size());
  for (std::size_t i = 0; i < collection.size(); ++i) {
    if (!scored[i].usable) {
      result.diagnostics.skipped.push_back(collection[i].id);
      continue;
    }
    if (scored[i].flat) result.diagnostics.flat.push_back(collection[i].id);
    order.push_back(i);
  }
  result.diagnostics.candidates = order.size();
  if (order.empty()) {
    throw Error(Errc::empty_collection, "no series has points inside the requested x range");
  }

  auto before = [&](std::size_t a, std::size_t b) {
    if (scored[a].distance != scored[b].distance) return scored[a].distance < scored[b].distance;
    return collection[a].id < collection[b].id;
  };
  std::size_t k = std::min(top_k, order.size());
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);

  result.matches.reserve(k);
  for (std::size_t r = 0; r < k; ++r) {
    result.matches.push_back(
        {collection[order[r]].id, scored[order[r]].distance, static_cast<int>(r + 1)});
  }
  return result;
}

PatternQuery query_from_sketch(std::span<const Point> canvas_points, double canvas_width,
                               double canvas_height) {
  if (!(canvas_width > 0.0) || !(canvas_height > 0.0)) bad_param("canvas dimensions must be positive");
  if (canvas_points.size() < 2) {
    throw Error(Errc::degenerate_sketch, "sketch needs at least 2 points");
  }
  std::vector<Point> cleaned;
  for (const Point& p : canvas_points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) bad_param("sketch has a non-finite point");
    Point q{p.x / canvas_width, 1.0 - p.y / canvas_height};
    // A backtracking stroke redraws: later points replace whatever sat at or right of them.
    while (!cleaned.empty() && cleaned.back().x >= q.x) cleaned.pop_back();
    cleaned.push_back(q);
  }
  if (cleaned.size() < 2) {
    throw Error(Errc::degenerate_sketch, "sketch has fewer than 2 distinct x positions after cleanup");
  }
  PatternQuery q;
  q.source = QuerySource::sketch;
  q.points = std::move(cleaned);
  return q;
}

PatternQuery query_from_equation(const expr::ExprAst& ast, double xmin, double xmax,
                                 std::size_t n, std::string text) {
  if (!std::isfinite(xmin) || !std::isfinite(xmax) || !(xmin < xmax)) {
    bad_param("equation range requires finite xmin < xmax");
  }
  if (n < 2) bad_param("equation sample count must be at least 2");
  PatternQuery q;
  q.source = QuerySource::equation;
  q.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = i + 1 == n ? xmax
                          : xmin + (xmax - xmin) * static_cast<double>(i) / static_cast<double>(n - 1);
    try {
      q.points.push_back({x, expr::eval(ast, x)});
    } catch (const Error& e) {
      throw Error(Errc::domain, e.detail() + " at x=" + csv::format_number(x));
    }
  }
  q.origin_text = text.empty() ? expr::to_string(ast) : std::move(text);
  return q;
}

PatternQuery query_from_upload(std::string_view csv_bytes, std::string file_name) {
  std::vector<csv::Record> records;
  try {
    records = csv::read(csv_bytes);
  } catch (const Error& e) {
    throw Error(Errc::format, e.detail());
  }
  if (records.empty()) throw Error(Errc::format, "uploaded pattern is empty");
  std::vector<Point> points;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.fields.size() != 2) {
      throw Error(Errc::format, "line " + std::to_string(rec.line) + ": expected 2 columns (x,y), got " +
                                    std::to_string(rec.fields.size()));
    }
    auto x = csv::parse_number(rec.fields[0]);
    auto y = csv::parse_number(rec.fields[1]);
    if (!x || !y) {
      // Only the first row may be a header, and then both cells must be non-numeric.
      if (r == 0 && !x && !y) continue;
      throw Error(Errc::format, "line " + std::to_string(rec.line) + ": non-numeric cell");
    }
    points.push_back({*x, *y});
  }
  std::stable_sort(points.begin(), points.end(),
                   [](const Point& a, const Point& b) { return a.x < b.x; });
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].x == points[i - 1].x) {
      throw Error(Errc::format, "duplicate x value " + csv::format_number(points[i].x));
    }
  }
  if (points.size() < 2) throw Error(Errc::format, "uploaded pattern needs at least 2 points");
  PatternQuery q;
  q.source = QuerySource::upload;
  q.points = std::move(points);
  if (!file_name.empty()) q.origin_text = std::move(file_name);
  return q;
}

PatternQuery query_from_series(std::string_view series_id, std::span<const Series> collection) {
  for (const Series& s : collection) {
    if (s.id != series_id) continue;
    PatternQuery q;
    q.source = QuerySource::series;
    q.points = s.points;
    q.origin_id = s.id;
    return q;
  }
  throw Error(Errc::not_found, "series '" + std::string(series_id) + "' is not in the collection");
}

PatternQuery query_from_vector(std::span<const double> values, std::string origin) {
  if (values.size() < 2) bad_param("vector query needs at least 2 values");
  PatternQuery q;
  q.source = QuerySource::series;
  q.points.reserve(values.size());
  const double last = static_cast<double>(values.size() - 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    q.points.push_back({static_cast<double>(i) / last, values[i]});
  }
  q.origin_id = std::move(origin);
  q.validate();
  return q;
}

PatternQuery overdraw(const PatternQuery& base, std::span<const Point> stroke) {
  std::vector<Point> cleaned;
  for (const Point& p : stroke) {
    while (!cleaned.empty() && cleaned.back().x >= p.x) cleaned.pop_back();
    cleaned.push_back(p);
  }
  if (cleaned.size() < 2) throw Error(Errc::degenerate_sketch, "overdraw stroke needs 2 distinct x positions");
  const double lo = cleaned.front().x;
  const double hi = cleaned.back().x;
  PatternQuery q;
  q.source = QuerySource::sketch;
  q.origin_id = base.origin_id;
  q.origin_text = base.origin_text;
  for (const Point& p : base.points) {
    if (p.x < lo) q.points.push_back(p);
  }
  q.points.insert(q.points.end(), cleaned.begin(), cleaned.end());
  for (const Point& p : base.points) {
    if (p.x > hi) q.points.push_back(p);
  }
  q.validate();
  return q;
}

}  // namespace shapeq
