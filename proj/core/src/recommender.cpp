#include "shapeq/recommender.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "shapeq/error.hpp"

namespace shapeq {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    ss += d * d;
  }
  return ss;
}

// Uniform double in [0, 1) from the top 53 bits, identical on every platform.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::vector<std::vector<double>> seed_plus_plus(std::span<const std::vector<double>> vectors,
                                                std::size_t k, std::mt19937_64& rng) {
  const std::size_t n = vectors.size();
  std::vector<std::vector<double>> centroids;
  std::vector<bool> chosen(n, false);
  std::size_t first = static_cast<std::size_t>(unit(rng) * static_cast<double>(n));
  centroids.push_back(vectors[first]);
  chosen[first] = true;

  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(vectors[i], centroids[0]);

  while (centroids.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += chosen[i] ? 0.0 : d2[i];
    std::size_t pick = n;
    if (total > 0.0) {
      double target = unit(rng) * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (chosen[i] || d2[i] == 0.0) continue;
        acc += d2[i];
        pick = i;
        if (acc > target) break;
      }
    } else {
      // Every remaining point coincides with a centroid; take the first unused one.
      for (std::size_t i = 0; i < n && pick == n; ++i) {
        if (!chosen[i]) pick = i;
      }
    }
    chosen[pick] = true;
    centroids.push_back(vectors[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(vectors[i], centroids.back()));
    }
  }
  return centroids;
}

}  // namespace

KMeansResult kmeans(std::span<const std::vector<double>> vectors, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter) {
  const std::size_t n = vectors.size();
  if (k == 0) throw Error(Errc::parameter, "k must be at least 1");
  if (k > n) {
    throw Error(Errc::parameter, "k=" + std::to_string(k) + " exceeds the number of series (" +
                                     std::to_string(n) + ")");
  }
  if (max_iter == 0) throw Error(Errc::parameter, "maxIter must be at least 1");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw Error(Errc::parameter, "k-means vectors must share one length");
  }

  std::mt19937_64 rng(seed);
  KMeansResult result;
  result.centroids = seed_plus_plus(vectors, k, rng);
  result.assignments.assign(n, k);  // k marks "unassigned" so the first pass always changes

  std::vector<std::size_t> sizes(k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        double d = squared_distance(vectors[i], result.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (result.assignments[i] != best) {
        result.assignments[i] = best;
        changed = true;
      }
    }

    std::fill(sizes.begin(), sizes.end(), 0);
    for (std::size_t a : result.assignments) ++sizes[a];
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] != 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t a = result.assignments[i];
        if (sizes[a] < 2) continue;
        double d = squared_distance(vectors[i], result.centroids[a]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[result.assignments[far]];
      result.assignments[far] = c;
      sizes[c] = 1;
      ++result.reseeded;
      changed = true;
    }

    for (auto& centroid : result.centroids) std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& centroid = result.centroids[result.assignments[i]];
      for (std::size_t d = 0; d < dim; ++d) centroid[d] += vectors[i][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (double& v : result.centroids[c]) v /= static_cast<double>(sizes[c]);
    }

    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sse += squared_distance(vectors[i], result.centroids[result.assignments[i]]);
    }
    result.sse_history.push_back(sse);
    result.iterations = iter + 1;
    if (!changed) {
      result.converged = true;
      break;
    }
  }
  return result;
}

Recommendation recommend(std::span<const Series> collection, const MatchSpec& spec, std::size_t k,
                         std::size_t m, std::uint64_t seed, std::size_t max_iter) {
  spec.validate();
  if (k == 0) throw Error(Errc::parameter, "k must be at least 1");
  if (k > collection.size()) {
    throw Error(Errc::parameter, "k=" + std::to_string(k) + " exceeds the collection size (" +
                                     std::to_string(collection.size()) + ")");
  }
  std::vector<std::vector<double>> vectors;
  vectors.reserve(collection.size());
  for (const Series& s : collection) vectors.push_back(*pipeline(s.points, spec, std::nullopt));

  KMeansResult km = kmeans(vectors, k, seed, max_iter);

  Recommendation rec;
  rec.k = k;
  rec.seed = seed;
  rec.iterations = km.iterations;
  std::vector<double> dist(collection.size());
  for (std::size_t i = 0; i < collection.size(); ++i) {
    dist[i] = std::sqrt(squared_distance(vectors[i], km.centroids[km.assignments[i]]));
  }
  rec.representatives.resize(k);
  std::vector<std::size_t> nearest(k, collection.size());
  for (std::size_t i = 0; i < collection.size(); ++i) {
    std::size_t c = km.assignments[i];
    rec.representatives[c].member_ids.push_back(collection[i].id);
    std::size_t& best = nearest[c];
    if (best == collection.size() || dist[i] < dist[best] ||
        (dist[i] == dist[best] && collection[i].id < collection[best].id)) {
      best = i;
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    rec.representatives[c].centroid = km.centroids[c];
    rec.representatives[c].nearest_member_id = collection[nearest[c]].id;
  }

  std::vector<std::size_t> order(collection.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] > dist[b];
    return collection[a].id < collection[b].id;
  });
  rec.m = std::min(m, collection.size());
  for (std::size_t r = 0; r < rec.m; ++r) {
    rec.outliers.push_back({collection[order[r]].id, dist[order[r]], vectors[order[r]]});
  }
  return rec;
}

}  // namespace shapeq
