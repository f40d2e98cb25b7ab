#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "shapeq/pattern.hpp"
#include "shapeq/recommender.hpp"

namespace {

std::vector<shapeq::Series> walks(std::size_t count, std::size_t length) {
  std::mt19937_64 rng(424242);
  std::normal_distribution<double> step(0.0, 1.0);
  std::vector<shapeq::Series> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    shapeq::Series s{"w" + std::to_string(i), {}, length};
    double y = 0;
    for (std::size_t t = 0; t < length; ++t) {
      y += step(rng);
      s.points.push_back({static_cast<double>(t), y});
    }
    out.push_back(std::move(s));
  }
  return out;
}

void BM_Rank(benchmark::State& state) {
  auto coll = walks(static_cast<std::size_t>(state.range(0)), 50);
  auto query = shapeq::query_from_series("w7", coll);
  shapeq::MatchSpec spec;
  for (auto _ : state) {
    auto r = shapeq::rank(query, coll, spec, 10);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Rank)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

void BM_RankSmoothed(benchmark::State& state) {
  auto coll = walks(10000, 50);
  auto query = shapeq::query_from_series("w7", coll);
  shapeq::MatchSpec spec;
  spec.smooth = shapeq::SmoothMethod::moving_average;
  spec.smooth_param = 7;
  spec.metric = shapeq::Metric::slope;
  for (auto _ : state) {
    auto r = shapeq::rank(query, coll, spec, 10);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_RankSmoothed)->Unit(benchmark::kMillisecond);

void BM_Recommend(benchmark::State& state) {
  auto coll = walks(static_cast<std::size_t>(state.range(0)), 50);
  shapeq::MatchSpec spec;
  for (auto _ : state) {
    auto r = shapeq::recommend(coll, spec, 5, 5);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK(BM_Recommend)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
