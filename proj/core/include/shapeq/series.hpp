#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace shapeq {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// One visualization: points strictly ascending in x.
struct Series {
  std::string id;
  std::vector<Point> points;
  std::size_t source_count = 0;  ///< rows that contributed
  bool operator==(const Series&) const = default;
};

}  // namespace shapeq
