#include "shapeq/export.hpp"

#include "shapeq/csv.hpp"

namespace shapeq {

std::string export_matches_csv(std::span<const RankedMatch> matches) {
  std::string out = "rank,seriesId,distance\n";
  for (const RankedMatch& m : matches) {
    out += csv::join_row({std::to_string(m.rank), m.series_id, csv::format_number(m.distance)});
  }
  return out;
}

namespace {

void append_vector(std::string& out, std::string_view kind, std::size_t index,
                   const std::vector<double>& values, const std::string& id) {
  const double last = values.size() > 1 ? static_cast<double>(values.size() - 1) : 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += csv::join_row({std::string(kind), std::to_string(index),
                          csv::format_number(static_cast<double>(i) / last),
                          csv::format_number(values[i]), id});
  }
}

}  // namespace

std::string export_recommendation_csv(const Recommendation& rec) {
  std::string out = "kind,index,x,y,seriesId\n";
  for (std::size_t c = 0; c < rec.representatives.size(); ++c) {
    const auto& r = rec.representatives[c];
    append_vector(out, "representative", c, r.centroid, r.nearest_member_id);
  }
  for (std::size_t o = 0; o < rec.outliers.size(); ++o) {
    append_vector(out, "outlier", o, rec.outliers[o].vector, rec.outliers[o].series_id);
  }
  return out;
}

std::string export_points_csv(std::span<const Point> points) {
  std::string out = "x,y\n";
  for (const Point& p : points) out += csv::format_number(p.x) + "," + csv::format_number(p.y) + "\n";
  return out;
}

}  // namespace shapeq
