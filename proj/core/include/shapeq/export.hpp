#pragma once

#include <span>
#include <string>

#include "shapeq/pattern.hpp"
#include "shapeq/recommender.hpp"

namespace shapeq {

/// "rank,seriesId,distance" followed by one row per match in rank order.
std::string export_matches_csv(std::span<const RankedMatch> matches);

/// Long form "kind,index,x,y,seriesId": every representative centroid
/// (kind=representative, index = cluster, seriesId = nearest member), then
/// every outlier vector (kind=outlier, index = outlier rank from 0). x is the
/// resampled position i/(n-1).
std::string export_recommendation_csv(const Recommendation& rec);

/// Two-column "x,y" file, the same format query_from_upload reads back.
std::string export_points_csv(std::span<const Point> points);

}  // namespace shapeq
