#include "oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace shapeq::oracle {

namespace {

double lerp_at(const std::vector<Point>& pts, double x) {
  // Linear scan for the bracketing segment.
  for (std::size_t j = 0; j + 1 < pts.size(); ++j) {
    if (pts[j].x <= x && x <= pts[j + 1].x) {
      double t = (x - pts[j].x) / (pts[j + 1].x - pts[j].x);
      return pts[j].y + t * (pts[j + 1].y - pts[j].y);
    }
  }
  return x < pts.front().x ? pts.front().y : pts.back().y;
}

std::vector<double> naive_resample(const std::vector<Point>& pts, std::size_t n) {
  std::vector<double> out;
  double a = pts.front().x;
  double b = pts.back().x;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0) {
      out.push_back(pts.front().y);
    } else if (i == n - 1) {
      out.push_back(pts.back().y);
    } else {
      out.push_back(lerp_at(pts, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1)));
    }
  }
  return out;
}

std::vector<double> naive_smooth(const std::vector<double>& v, SmoothMethod m, double param) {
  if (m == SmoothMethod::none) return v;
  std::vector<double> out(v.size());
  if (m == SmoothMethod::moving_average) {
    long h = static_cast<long>(param) / 2;
    long n = static_cast<long>(v.size());
    if (h == 0) return v;
    for (long i = 0; i < n; ++i) {
      double sum = 0;
      long count = 0;
      for (long j = i - h; j <= i + h; ++j) {
        if (j < 0 || j >= n) continue;
        sum += v[static_cast<std::size_t>(j)];
        ++count;
      }
      out[static_cast<std::size_t>(i)] = sum / static_cast<double>(count);
    }
    return out;
  }
  if (param == 1.0) return v;
  out[0] = v[0];
  for (std::size_t i = 1; i < v.size(); ++i) out[i] = param * v[i] + (1 - param) * out[i - 1];
  return out;
}

std::vector<double> naive_normalize(const std::vector<double>& v, Normalization mode) {
  if (mode == Normalization::none) return v;
  std::vector<double> out(v.size(), 0.0);
  if (mode == Normalization::zscore) {
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    double sd = std::sqrt(var / static_cast<double>(v.size()));
    if (sd == 0) return out;
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean) / sd;
    return out;
  }
  double lo = v[0], hi = v[0];
  for (double x : v) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  if (hi == lo) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  return out;
}

double naive_distance(const std::vector<double>& a, const std::vector<double>& b, Metric m) {
  double ss = 0;
  if (m == Metric::euclidean) {
    for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  } else {
    for (std::size_t i = 1; i < a.size(); ++i) {
      double da = a[i] - a[i - 1];
      double db = b[i] - b[i - 1];
      ss += (da - db) * (da - db);
    }
  }
  return std::sqrt(ss);
}

// Points kept by the x range; `lo`/`hi` already in the point list's frame.
std::vector<Point> restrict_points(const std::vector<Point>& pts, bool relative, double lo, double hi) {
  std::vector<Point> out;
  for (const Point& p : pts) {
    double x = relative ? (p.x - pts.front().x) / (pts.back().x - pts.front().x) : p.x;
    if (lo <= x && x <= hi) out.push_back(p);
  }
  return out;
}

std::optional<std::vector<double>> vectorize(const std::vector<Point>& pts, const MatchSpec& spec,
                                             bool restricted, double lo, double hi) {
  std::vector<Point> use = pts;
  if (restricted) {
    use = restrict_points(pts, spec.x_normalize, lo, hi);
    if (use.size() < 2) return std::nullopt;
  }
  auto v = naive_resample(use, spec.resample_n);
  v = naive_smooth(v, spec.smooth, spec.smooth_param);
  return naive_normalize(v, spec.normalize);
}

}  // namespace

namespace {

struct FullRank {
  std::optional<Errc> error;
  std::vector<RankedMatch> all;
};

FullRank full_rank(const PatternQuery& query, const std::vector<Series>& collection, const MatchSpec& spec) {
  bool restricted = spec.x_range.has_value();
  double lo = 0, hi = 0;
  if (restricted) {
    lo = spec.x_range->min;
    hi = spec.x_range->max;
    if (spec.x_normalize) {
      double q0 = query.points.front().x;
      double q1 = query.points.back().x;
      lo = (lo - q0) / (q1 - q0);
      hi = (hi - q0) / (q1 - q0);
    }
  }
  auto qv = vectorize(query.points, spec, restricted, lo, hi);
  if (!qv) return {Errc::parameter, {}};

  FullRank out;
  for (const Series& s : collection) {
    auto sv = vectorize(s.points, spec, restricted, lo, hi);
    if (!sv) continue;
    out.all.push_back({s.id, naive_distance(*qv, *sv, spec.metric), 0});
  }
  if (out.all.empty()) return {Errc::empty_collection, {}};
  std::sort(out.all.begin(), out.all.end(), [](const RankedMatch& a, const RankedMatch& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.series_id < b.series_id);
  });
  for (std::size_t i = 0; i < out.all.size(); ++i) out.all[i].rank = static_cast<int>(i + 1);
  return out;
}

bool near(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

}  // namespace

std::optional<std::vector<RankedMatch>> brute_force_rank(const PatternQuery& query,
                                                         const std::vector<Series>& collection,
                                                         const MatchSpec& spec, std::size_t top_k) {
  auto r = full_rank(query, collection, spec);
  if (r.error) return std::nullopt;
  if (r.all.size() > top_k) r.all.resize(top_k);
  return r.all;
}

std::optional<Errc> expected_rank_error(const PatternQuery& query, const std::vector<Series>& collection,
                                        const MatchSpec& spec) {
  return full_rank(query, collection, spec).error;
}

std::string compare_ranking(const std::vector<RankedMatch>& got, const std::vector<RankedMatch>& full,
                            std::size_t top_k, double tol) {
  std::size_t want_n = std::min(top_k, full.size());
  if (got.size() != want_n) {
    return "size " + std::to_string(got.size()) + " vs " + std::to_string(want_n);
  }
  std::vector<std::string> seen;
  for (std::size_t j = 0; j < got.size(); ++j) {
    if (got[j].rank != static_cast<int>(j + 1)) return "rank field wrong at " + std::to_string(j);
    if (!near(got[j].distance, full[j].distance, tol)) {
      return "distance at " + std::to_string(j) + ": " + std::to_string(got[j].distance) + " vs " +
             std::to_string(full[j].distance);
    }
    // The id must come from the run of oracle entries tied with position j.
    std::size_t lo = j, hi = j;
    while (lo > 0 && near(full[lo - 1].distance, full[j].distance, tol)) --lo;
    while (hi + 1 < full.size() && near(full[hi + 1].distance, full[j].distance, tol)) ++hi;
    bool found = false;
    for (std::size_t t = lo; t <= hi && !found; ++t) found = full[t].series_id == got[j].series_id;
    if (!found) return "id " + got[j].series_id + " at " + std::to_string(j) + ", expected " + full[j].series_id;
    if (std::find(seen.begin(), seen.end(), got[j].series_id) != seen.end()) {
      return "duplicate id " + got[j].series_id;
    }
    seen.push_back(got[j].series_id);
  }
  return {};
}

std::array<double, 3> stationary_by_solve(const std::array<std::array<double, 3>, 3>& transition,
                                          double damping) {
  Eigen::Matrix3d g;
  for (int r = 0; r < 3; ++r) {
    double row_sum = transition[r][0] + transition[r][1] + transition[r][2];
    for (int c = 0; c < 3; ++c) {
      double p = row_sum == 0.0 ? 1.0 / 3.0 : transition[r][c];
      g(r, c) = damping * p + (1.0 - damping) / 3.0;
    }
  }
  // pi (G - I) = 0 with sum(pi) = 1: replace one equation by the normalization.
  Eigen::Matrix3d a = (g - Eigen::Matrix3d::Identity()).transpose();
  a.row(2).setOnes();
  Eigen::Vector3d rhs(0.0, 0.0, 1.0);
  Eigen::Vector3d pi = a.fullPivLu().solve(rhs);
  return {pi(0), pi(1), pi(2)};
}

std::optional<double> eval_tree(const expr::Node& node, double x) {
  using namespace expr;
  auto finite = [](double v) -> std::optional<double> {
    if (std::isfinite(v)) return v;
    return std::nullopt;
  };
  if (const auto* n = std::get_if<Number>(&node.value)) return n->value;
  if (std::holds_alternative<Variable>(node.value)) return x;
  if (const auto* c = std::get_if<Named>(&node.value)) {
    return c->constant == Constant::pi ? std::numbers::pi : std::numbers::e;
  }
  if (const auto* neg = std::get_if<Negate>(&node.value)) {
    auto v = eval_tree(*neg->operand, x);
    if (!v) return std::nullopt;
    return -*v;
  }
  if (const auto* b = std::get_if<Binary>(&node.value)) {
    auto l = eval_tree(*b->lhs, x);
    auto r = eval_tree(*b->rhs, x);
    if (!l || !r) return std::nullopt;
    switch (b->op) {
      case BinaryOp::add: return finite(*l + *r);
      case BinaryOp::sub: return finite(*l - *r);
      case BinaryOp::mul: return finite(*l * *r);
      case BinaryOp::div:
        if (*r == 0.0) return std::nullopt;
        return finite(*l / *r);
      case BinaryOp::pow: return finite(std::pow(*l, *r));
    }
  }
  const auto& call = std::get<Call>(node.value);
  auto v = eval_tree(*call.argument, x);
  if (!v) return std::nullopt;
  switch (call.function) {
    case Function::sin: return std::sin(*v);
    case Function::cos: return std::cos(*v);
    case Function::exp: return finite(std::exp(*v));
    case Function::log:
      if (*v <= 0.0) return std::nullopt;
      return std::log(*v);
    case Function::sqrt:
      if (*v < 0.0) return std::nullopt;
      return std::sqrt(*v);
    case Function::abs: return std::fabs(*v);
  }
  throw std::logic_error("unreachable");
}

bool eval_filter_tree(const filter::Node& node, const std::vector<Column>& schema, const Row& row) {
  using namespace filter;
  if (const auto* a = std::get_if<And>(&node.value)) {
    return eval_filter_tree(*a->lhs, schema, row) && eval_filter_tree(*a->rhs, schema, row);
  }
  if (const auto* o = std::get_if<Or>(&node.value)) {
    return eval_filter_tree(*o->lhs, schema, row) || eval_filter_tree(*o->rhs, schema, row);
  }
  if (const auto* n = std::get_if<Not>(&node.value)) return !eval_filter_tree(*n->operand, schema, row);
  const auto& cmp = std::get<Comparison>(node.value);
  std::size_t col = 0;
  while (schema[col].name != cmp.attr) ++col;
  const Cell& cell = row[col];
  int order = 0;
  if (const double* v = std::get_if<double>(&cell)) {
    double lit = std::stod(cmp.literal.text);
    order = *v < lit ? -1 : (*v > lit ? 1 : 0);
  } else if (const std::string* s = std::get_if<std::string>(&cell)) {
    order = s->compare(cmp.literal.text);
    order = order < 0 ? -1 : (order > 0 ? 1 : 0);
  } else {
    return false;
  }
  switch (cmp.op) {
    case CompareOp::eq: return order == 0;
    case CompareOp::ne: return order != 0;
    case CompareOp::lt: return order < 0;
    case CompareOp::le: return order <= 0;
    case CompareOp::gt: return order > 0;
    case CompareOp::ge: return order >= 0;
  }
  return false;
}

}  // namespace shapeq::oracle
