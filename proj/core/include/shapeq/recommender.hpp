#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shapeq/pattern.hpp"
#include "shapeq/series.hpp"

namespace shapeq {

inline constexpr std::uint64_t kDefaultSeed = 20190501;

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<std::vector<double>> centroids;
  std::vector<double> sse_history;  ///< within-cluster SSE after each Lloyd iteration
  std::size_t iterations = 0;
  std::size_t reseeded = 0;  ///< empty clusters refilled
  bool converged = false;
};

/// Lloyd's algorithm with k-means++ seeding. Assignment ties go to the lower
/// cluster index. An empty cluster takes the point farthest from its own
/// centroid among clusters with at least two members, so SSE never rises.
/// Throws Error(Errc::parameter) if k is 0 or exceeds the vector count, or
/// the vectors differ in length.
KMeansResult kmeans(std::span<const std::vector<double>> vectors, std::size_t k,
                    std::uint64_t seed, std::size_t max_iter = 100);

struct RepresentativeTrend {
  std::vector<double> centroid;
  std::vector<std::string> member_ids;
  std::string nearest_member_id;
};

struct OutlierRef {
  std::string series_id;
  double distance_to_centroid = 0.0;
  std::vector<double> vector;  ///< the pipelined series that was clustered
};

struct Recommendation {
  std::vector<RepresentativeTrend> representatives;
  std::vector<OutlierRef> outliers;  ///< descending by distance_to_centroid
  std::size_t k = 0;
  std::size_t m = 0;
  std::uint64_t seed = kDefaultSeed;
  std::size_t iterations = 0;
};

/// Clusters the collection's pipelined vectors (resample, smooth, normalize
/// per spec; x_range is not applied) and reports centroids plus the m
/// series farthest from their own centroid.
Recommendation recommend(std::span<const Series> collection, const MatchSpec& spec, std::size_t k,
                         std::size_t m, std::uint64_t seed = kDefaultSeed,
                         std::size_t max_iter = 100);

}  // namespace shapeq
