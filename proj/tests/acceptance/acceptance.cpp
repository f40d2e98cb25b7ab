// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "client.hpp"
#include "corpus.hpp"
#include "oracle.hpp"
#include "server.hpp"
#include "shapeq/analytics.hpp"
#include "shapeq/dataset.hpp"
#include "shapeq/error.hpp"
#include "shapeq/expr.hpp"
#include "shapeq/filter.hpp"
#include "shapeq/pattern.hpp"
#include "shapeq/recommender.hpp"

using namespace shapeq;
using Clock = std::chrono::steady_clock;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Collects the first few failure messages for a criterion.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 5) notes_ += (notes_.empty() ? "" : "; ") + what;
  }
  Outcome done(std::string summary) const {
    if (failures_ == 0) return {true, std::move(summary)};
    return {false, std::to_string(failures_) + " failure(s): " + notes_};
  }

 private:
  int failures_ = 0;
  std::string notes_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome ranking_oracle() {
  Checker c;
  corpus::Rng rng(1001);
  auto t0 = Clock::now();
  int empty = 0;
  for (int i = 0; i < 1000; ++i) {
    auto coll = corpus::random_collection(rng, corpus::uniform_index(rng, 1, 100), 2, 20);
    PatternQuery q;
    q.points = corpus::random_points(rng, 2, 20);
    auto spec = corpus::random_spec(rng, q.points.front().x, q.points.back().x);
    std::size_t k = corpus::uniform_index(rng, 1, 100);
    auto err = oracle::expected_rank_error(q, coll, spec);
    std::vector<RankedMatch> got;
    try {
      got = rank(q, coll, spec, k).matches;
    } catch (const Error& e) {
      c.expect(err && e.code() == *err, "instance " + std::to_string(i) + " threw " + e.what());
      ++empty;
      continue;
    }
    if (err) {
      c.expect(false, "instance " + std::to_string(i) + " ranked but oracle expected " + std::string(to_string(*err)));
      continue;
    }
    auto full = oracle::brute_force_rank(q, coll, spec, coll.size());
    auto why = oracle::compare_ranking(got, *full, k);
    c.expect(why.empty(), "instance " + std::to_string(i) + ": " + why);
  }
  double secs = seconds_since(t0);
  c.expect(secs < 60, "took " + fmt("%.1f", secs) + " s");
  return c.done("1000 instances (" + std::to_string(empty) + " rejected after xRange) in " +
                fmt("%.2f", secs) + " s");
}

Outcome self_match() {
  Checker c;
  corpus::Rng rng(1002);
  auto coll = corpus::random_collection(rng, 50, 3, 20);
  int runs = 0;
  for (Metric m : {Metric::euclidean, Metric::slope}) {
    for (Normalization n : {Normalization::zscore, Normalization::minmax, Normalization::none}) {
      MatchSpec spec;
      spec.metric = m;
      spec.normalize = n;
      for (const auto& s : coll) {
        auto r = rank(query_from_series(s.id, coll), coll, spec, 1);
        const auto& top = r.matches.at(0);
        c.expect(top.series_id == s.id, s.id + " not at rank 1 (got " + top.series_id + ")");
        c.expect(top.distance <= 1e-9, s.id + " self distance " + fmt("%g", top.distance));
        ++runs;
      }
    }
  }
  return c.done(std::to_string(runs) + " drag-and-drop queries, all self distances <= 1e-9");
}

Outcome affine_invariance() {
  Checker c;
  corpus::Rng rng(1003);
  for (int t = 0; t < 100; ++t) {
    auto coll = corpus::random_collection(rng, corpus::uniform_index(rng, 2, 60), 3, 20);
    PatternQuery q;
    q.points = corpus::random_points(rng, 3, 20);
    MatchSpec spec = corpus::random_spec(rng, q.points.front().x, q.points.back().x);
    spec.normalize = Normalization::zscore;
    spec.x_range.reset();
    double a = corpus::uniform(rng, 0.01, 100);
    double b = corpus::uniform(rng, -1000, 1000);
    auto moved = coll;
    for (auto& s : moved) {
      for (auto& p : s.points) p.y = a * p.y + b;
    }
    auto r1 = rank(q, coll, spec, coll.size()).matches;
    auto r2 = rank(q, moved, spec, coll.size()).matches;
    bool same = r1.size() == r2.size();
    for (std::size_t j = 0; same && j < r1.size(); ++j) {
      // Near-ties may swap under rounding; only a real distance gap must keep order.
      same = r1[j].series_id == r2[j].series_id ||
             std::fabs(r1[j].distance - r2[j].distance) <= 1e-9 * std::max(1.0, r1[j].distance);
    }
    c.expect(same, "trial " + std::to_string(t) + " order changed");
  }
  return c.done("100 trials, ranked order identical under y -> a*y + b");
}

Outcome smoothing() {
  Checker c;
  corpus::Rng rng(1004);
  auto tv = [](const std::vector<double>& v) {
    double s = 0;
    for (std::size_t i = 1; i < v.size(); ++i) s += std::fabs(v[i] - v[i - 1]);
    return s;
  };
  for (int i = 0; i < 1000; ++i) {
    std::vector<double> v(corpus::uniform_index(rng, 1, 100));
    for (double& x : v) x = corpus::uniform(rng, -100, 100) * (rng() % 2 ? 1.0 : 1e-3);
    c.expect(smooth(v, SmoothMethod::moving_average, 1) == v, "window=1 changed vector " + std::to_string(i));
    c.expect(smooth(v, SmoothMethod::exponential, 1) == v, "alpha=1 changed vector " + std::to_string(i));
    std::size_t w = 2 * corpus::uniform_index(rng, 0, (v.size() - 1) / 2) + 1;
    auto s = smooth(v, SmoothMethod::moving_average, static_cast<double>(w));
    double before = tv(v), after = tv(s);
    c.expect(after <= before * (1 + 1e-12) + 1e-12,
             "vector " + std::to_string(i) + " TV rose " + fmt("%g", before) + " -> " + fmt("%g", after));
  }
  return c.done("1000 vectors: identities exact, moving-average total variation never increased");
}

Outcome planted_clusters() {
  Checker c;
  int good = 0;
  double worst = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    corpus::Rng rng(5000 + seed);
    auto labeled = corpus::three_families(rng, 20);
    std::vector<Series> coll;
    for (auto& l : labeled) coll.push_back(l.series);
    MatchSpec spec;
    std::vector<std::vector<double>> vectors;
    for (auto& s : coll) vectors.push_back(*pipeline(s.points, spec, std::nullopt));
    auto km = kmeans(vectors, 3, seed);
    for (std::size_t i = 1; i < km.sse_history.size(); ++i) {
      c.expect(km.sse_history[i] <= km.sse_history[i - 1],
               "seed " + std::to_string(seed) + " SSE rose at iteration " + std::to_string(i));
    }
    // Purity: each cluster votes for its majority family.
    std::map<std::size_t, std::map<int, int>> votes;
    for (std::size_t i = 0; i < coll.size(); ++i) ++votes[km.assignments[i]][static_cast<int>(labeled[i].family)];
    int majority = 0;
    for (auto& [_, fam] : votes) {
      int best = 0;
      for (auto& [__, n] : fam) best = std::max(best, n);
      majority += best;
    }
    double purity = static_cast<double>(majority) / static_cast<double>(coll.size());
    worst = std::min(worst, purity);
    // Also require the recommender's representatives to land in distinct families.
    auto rec = recommend(coll, spec, 3, 0, seed);
    std::set<int> fams;
    for (auto& r : rec.representatives) {
      for (std::size_t i = 0; i < coll.size(); ++i) {
        if (coll[i].id == r.nearest_member_id) fams.insert(static_cast<int>(labeled[i].family));
      }
    }
    if (purity >= 0.95 && fams.size() == 3) ++good;
  }
  c.expect(good >= 18, "only " + std::to_string(good) + " of 20 seeds reached purity 0.95");
  return c.done(std::to_string(good) + " of 20 seeds with purity >= 0.95 (worst " + fmt("%.3f", worst) +
                "); SSE nonincreasing on every iteration");
}

Outcome parsers() {
  Checker c;
  corpus::Rng rng(1006);
  for (int i = 0; i < 500; ++i) {
    expr::ExprAst ast(corpus::random_expr(rng, 6));
    std::string text = expr::to_string(ast);
    expr::ExprAst back;
    try {
      back = expr::parse_equation(text);
    } catch (const Error& e) {
      c.expect(false, "reparse failed for " + text + ": " + e.what());
      continue;
    }
    c.expect(expr::structurally_equal(ast.root(), back.root()), "tree changed for " + text);
    c.expect(expr::to_string(back) == text, "print not stable for " + text);
    for (double x : {-2.0, -0.5, 0.0, 0.75, 3.0}) {
      auto want = oracle::eval_tree(ast.root(), x);
      try {
        double got = expr::eval(back, x);
        c.expect(want && got == *want, "value differs for " + text);
      } catch (const Error&) {
        c.expect(!want, "unexpected domain error for " + text);
      }
    }
  }

  auto ds = load_dataset(corpus::star_table_csv(rng, 1000), "stars");
  std::vector<Column> schema(ds.columns().begin(), ds.columns().end());
  std::size_t sizes[2] = {0, 0};
  int idx = 0;
  for (const char* text : {"flux>10 AND CLASS_STAR=1", "gene=9687"}) {
    auto ast = filter::parse_filter(text);
    filter::BoundFilter bound(ast, ds.columns());
    std::vector<std::size_t> engine, brute;
    for (std::size_t r = 0; r < ds.row_count(); ++r) {
      const Row& row = ds.rows()[r];
      if (bound.matches(row)) engine.push_back(r);
      // Brute force straight from the column values.
      bool keep = false;
      if (idx == 0) {
        const double* flux = std::get_if<double>(&row[1]);
        const double* star = std::get_if<double>(&row[2]);
        keep = flux && star && *flux > 10 && *star == 1;
      } else {
        const double* gene = std::get_if<double>(&row[3]);
        keep = gene && *gene == 9687;
      }
      if (keep) brute.push_back(r);
    }
    c.expect(engine == brute, std::string("row set differs for ") + text);
    c.expect(!engine.empty(), std::string("no rows selected for ") + text);
    sizes[idx++] = engine.size();
  }
  return c.done("500 expression trees round-trip; filters select " + std::to_string(sizes[0]) + " and " +
                std::to_string(sizes[1]) + " of 1000 rows, identical to brute force");
}

Outcome markov() {
  using namespace analytics;
  Checker c;
  auto seq = [](std::initializer_list<Feature> fs, const std::string& sid, std::int64_t t0) {
    std::vector<Event> out;
    for (Feature f : fs) out.push_back({t0++, sid, f, std::string("materials"), -1});
    return out;
  };
  const auto TD = Feature::sketch, CC = Feature::data_selection, BU = Feature::recommendations,
             BR = Feature::break_marker;

  // Hand-counted fixture.
  auto fixture = seq({TD, TD, CC, BR, CC, BU, BU, TD, BR, BU}, "f", 0);
  auto m = build_model(fixture);
  Counts3 want{};
  want[0][0] = 1;
  want[0][1] = 1;
  want[1][2] = 1;
  want[2][2] = 1;
  want[2][0] = 1;
  c.expect(m.counts == want, "fixture counts differ");
  c.expect(m.transition[2][2] == 0.5 && m.transition[2][0] == 0.5 && m.transition[1][2] == 1.0,
           "fixture probabilities differ");
  c.expect(m.total_transitions == 5, "fixture total differs");
  auto pair = build_model(seq({TD, TD, CC}, "g", 0));
  c.expect(pair.transition[0][0] == 0.5 && pair.transition[0][1] == 0.5, "[TD,TD,CC] probabilities differ");
  auto split = build_model(seq({TD, BR, CC}, "h", 0));
  c.expect(split.total_transitions == 0, "transition counted across a break");

  // Centrality against the linear-solve oracle.
  corpus::Rng rng(1007);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    MarkovModel r;
    for (std::size_t i = 0; i < 3; ++i) {
      bool empty = rng() % 10 == 0;
      std::uint64_t total = 0;
      for (std::size_t j = 0; j < 3; ++j) {
        r.counts[i][j] = empty ? 0 : rng() % 20;
        total += r.counts[i][j];
      }
      if (total == 0 && !empty) r.counts[i][i] = total = 1;
      r.empty_row[i] = total == 0;
      for (std::size_t j = 0; j < 3; ++j) {
        r.transition[i][j] = total ? static_cast<double>(r.counts[i][j]) / static_cast<double>(total) : 0.0;
      }
      r.total_transitions += total;
    }
    if (r.total_transitions == 0) {
      r.counts[0][1] = 1;
      r.transition[0] = {0, 1, 0};
      r.empty_row[0] = false;
      r.total_transitions = 1;
    }
    double damping = t % 2 ? kDefaultDamping : corpus::uniform(rng, 0.5, 1.0);
    auto got = eigenvector_centrality(r, damping);
    auto ref = oracle::stationary_by_solve(r.transition, damping);
    for (int i = 0; i < 3; ++i) worst = std::max(worst, std::fabs(got[i] - ref[i]));
  }
  c.expect(worst <= 1e-9, "centrality off by " + fmt("%g", worst));

  // Synthetic domain log: 3 of 5 bottom-up exits go to context creation.
  std::vector<Event> log;
  for (auto part : {seq({BU, CC, BR, BU, CC}, "p1", 0), seq({BU, CC, TD}, "p2", 100),
                    seq({BU, TD, BR, BU, TD}, "p3", 200)}) {
    log.insert(log.end(), part.begin(), part.end());
  }
  log.push_back({999, "q", TD, std::string("astronomy"), -1});
  log.push_back({1000, "q", BU, std::string("astronomy"), -1});
  auto domain = build_model(log, std::string("materials"));
  double edge = domain.transition[2][1];
  c.expect(std::fabs(edge - 0.6) <= 1e-12, "BottomUp -> ContextCreation = " + fmt("%g", edge));
  auto dot = to_dot(domain);
  c.expect(dot.find("BottomUp -> ContextCreation [label=\"0.60\"]") != std::string::npos, "dot edge label missing");
  return c.done("fixtures exact; centrality max error " + fmt("%.2e", worst) +
                " over 100 matrices; BottomUp -> ContextCreation = " + fmt("%.2f", edge));
}

Outcome service_contract() {
  Checker c;
  testing::TestServer server;
  testing::Client http(server.port());
  auto status = [&](const testing::Reply& r, int want, const std::string& what) {
    c.expect(r.status == want, what + " returned " + std::to_string(r.status) + " (want " + std::to_string(want) + ")");
    return r;
  };
  auto code_is = [&](const testing::Reply& r, int want, const std::string& code, const std::string& what) {
    status(r, want, what);
    try {
      c.expect(r.json().value("code", "") == code, what + " code " + r.json().value("code", "?"));
    } catch (const std::exception&) {
      c.expect(false, what + " body is not JSON");
    }
  };
  int calls = 0;
  auto count = [&](auto&& r) -> decltype(auto) {
    ++calls;
    return std::forward<decltype(r)>(r);
  };

  corpus::Rng rng(1008);
  std::string demo = corpus::light_curve_csv(rng, 60, 30);
  status(count(http.get("/healthz")), 200, "healthz");
  status(count(http.post_raw("/datasets?name=demo", demo, "text/csv")), 201, "register dataset");
  code_is(count(http.post_raw("/datasets?name=demo2", demo, "text/plain")), 415, "unsupported_media_type", "wrong type");
  code_is(count(http.post_raw("/datasets?name=bad", "a,a\n1,2\n", "text/csv")), 422, "schema_error", "dup header");
  code_is(count(http.post_raw("/datasets?name=bad", "", "text/csv")), 422, "parse_error", "empty csv");
  status(count(http.get("/datasets")), 200, "list datasets");
  code_is(count(http.get("/datasets/none/schema")), 404, "not_found", "unknown dataset");
  status(count(http.post("/sessions", {{"sessionId", "main"}})), 201, "create session");
  code_is(count(http.post("/sessions", {{"sessionId", "main"}})), 409, "conflict", "duplicate session");
  code_is(count(http.get("/session/ghost")), 404, "not_found", "unknown session");
  code_is(count(http.post("/session/main/query", {{"source", "series"}, {"payload", {{"id", "SN-0"}}}})), 422,
          "validation_error", "query before view");
  json view{{"dataset", "demo"}, {"x", "time"}, {"y", "flux"}, {"group", "objectId"}};
  status(count(http.put("/session/main/view", view)), 200, "set view");
  code_is(count(http.put_raw("/session/main/view", "{", "application/json")), 400, "bad_json", "malformed JSON");
  code_is(count(http.put("/session/main/view", {{"dataset", "demo"}})), 422, "validation_error", "incomplete view");

  auto peak = corpus::peak_decay_stroke(500, 250);
  json pts = json::array();
  for (auto& p : peak) pts.push_back({p.x, p.y});
  auto sk = status(count(http.post("/session/main/query",
                                  {{"source", "sketch"}, {"payload", {{"points", pts}, {"width", 500}, {"height", 250}}}})),
                   200, "sketch query");
  if (sk.status == 200) {
    auto body = sk.json();
    c.expect(body["matches"][0].contains("distance"), "rank-1 distance missing");
    c.expect(body["matches"][0]["seriesId"] == "SN-0", "planted peak+decay not at rank 1");
  }
  code_is(count(http.post("/session/main/query",
                          {{"source", "sketch"}, {"payload", {{"points", {{1, 1}}}, {"width", 9}, {"height", 9}}}})),
          422, "degenerate_sketch", "one-point sketch");
  auto eq = count(http.post("/session/main/query", {{"source", "equation"}, {"payload", {{"text", "y=x^"}}}}));
  code_is(eq, 422, "parse_error", "bad equation");
  c.expect(eq.status == 422 && eq.json().contains("position"), "parse error without position");
  code_is(count(http.post("/session/main/query", {{"source", "equation"}, {"payload", {{"text", "log(x)"}, {"xmin", -1}}}})),
          422, "domain_error", "log domain");
  code_is(count(http.post("/session/main/query", {{"source", "upload"}, {"payload", {{"csv", "1,a\n2,3\n"}}}})), 422,
          "format_error", "bad upload");
  code_is(count(http.post("/session/main/query", {{"source", "series"}, {"payload", {{"id", "nope"}}}})), 404,
          "not_found", "unknown series");
  status(count(http.post("/session/main/query", {{"source", "series"}, {"payload", {{"id", "OBJ-010"}}}})), 200,
         "drag series");
  code_is(count(http.put("/session/main/matchspec", {{"smoothMethod", "movingAverage"}, {"smoothParam", 2}})), 422,
          "parameter_error", "even window");
  status(count(http.put("/session/main/matchspec", {{"smoothMethod", "movingAverage"}, {"smoothParam", 3}})), 200,
         "set window");
  code_is(count(http.put("/session/main/filter", {{"filter", "flux >> 1"}})), 422, "parse_error", "bad filter");
  code_is(count(http.put("/session/main/filter", {{"filter", "mass = 1"}})), 422, "validation_error", "unknown attr");
  status(count(http.put("/session/main/filter", {{"filter", "flux>10 AND CLASS_STAR=1"}})), 200, "set filter");
  auto filtered = status(count(http.post("/session/main/query", {{"source", "equation"}, {"payload", {{"text", "x"}}}})),
                         200, "filtered query");
  auto debug = status(count(http.get("/session/main/debug/collection")), 200, "debug collection");
  if (filtered.status == 200 && debug.status == 200) {
    for (const auto& s : debug.json()["series"]) {
      for (const auto& p : s["points"]) c.expect(p[1].get<double>() > 10, "filtered series has flux <= 10");
    }
  }
  auto rec = status(count(http.get("/session/main/recommendations?k=3&m=2")), 200, "recommendations");
  code_is(count(http.get("/session/main/recommendations?k=100000")), 422, "parameter_error", "k too large");
  if (rec.status == 200) {
    status(count(http.post("/session/main/query", {{"source", "series"}, {"payload", {{"representative", 0}}}})), 200,
           "drag centroid");
  }
  status(count(http.post("/session/main/classes", {{"name", "bright"}, {"constraints", {{{"attr", "flux"}, {"min", 10}}}}})),
         201, "create class");
  code_is(count(http.post("/session/main/classes", {{"name", "x"}, {"constraints", {{{"attr", "zzz"}}}}})), 422,
          "validation_error", "bad class");
  status(count(http.get("/session/main/classes/aggregates")), 200, "aggregates");
  auto exp = status(count(http.get("/session/main/export?what=matches")), 200, "export matches");
  c.expect(exp.content_type.rfind("text/csv", 0) == 0, "export is not text/csv");
  status(count(http.get("/session/main/export?what=recommendations")), 200, "export recommendations");
  code_is(count(http.get("/session/main/export?what=bogus")), 422, "validation_error", "bad export kind");
  for (const char* f : {"sketch", "filter", "recommendations", "dragAndDrop", "smoothing"}) {
    status(count(http.post("/events", {{"sessionId", "main"}, {"timestamp", calls}, {"feature", f}})), 204, "event");
  }
  code_is(count(http.post("/events", {{"sessionId", "main"}, {"timestamp", 1}, {"feature", "nap"}})), 422,
          "vocabulary_error", "unknown feature");
  auto mk = status(count(http.get("/analytics/main/markov")), 200, "markov");
  if (mk.status == 200) {
    auto model = mk.json();
    for (int r = 0; r < 3; ++r) {
      double sum = 0;
      for (const auto& v : model["transition"][r]) sum += v.get<double>();
      c.expect(sum == 0 || std::fabs(sum - 1) < 1e-9, "transition row not stochastic");
    }
  }
  code_is(count(http.get("/analytics/nobody/markov")), 404, "not_found", "no events");
  code_is(count(http.get("/nowhere")), 404, "not_found", "unknown route");
  status(count(http.del("/session/main")), 204, "delete session");

  // 32 concurrent queries, spread across 8 sessions.
  for (int i = 0; i < 8; ++i) {
    std::string id = "c" + std::to_string(i);
    http.post("/sessions", {{"sessionId", id}});
    http.put("/session/" + id + "/view", view);
  }
  auto ds = load_dataset(demo, "demo");
  auto coll = build_collection(ds, ViewSpec{"time", "flux", "objectId"});
  std::vector<std::future<bool>> jobs;
  auto t0 = Clock::now();
  for (int i = 0; i < 32; ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      const Series& target = coll.series[static_cast<std::size_t>(i) % coll.series.size()];
      auto want = rank(query_from_series(target.id, coll.series), coll.series, MatchSpec{}, 5).matches;
      testing::Client local(server.port());
      auto r = local.post("/session/c" + std::to_string(i % 8) + "/query",
                          {{"source", "series"}, {"payload", {{"id", target.id}}}, {"topK", 5}});
      if (r.status != 200) return false;
      auto got = r.json()["matches"];
      if (got.size() != want.size()) return false;
      for (std::size_t j = 0; j < want.size(); ++j) {
        if (got[j]["seriesId"] != want[j].series_id) return false;
        if (std::fabs(got[j]["distance"].get<double>() - want[j].distance) > 1e-9) return false;
      }
      return true;
    }));
  }
  int ok = 0;
  for (auto& j : jobs) ok += j.get() ? 1 : 0;
  c.expect(ok == 32, std::to_string(32 - ok) + " concurrent queries failed");
  return c.done(std::to_string(calls) + " contract calls as expected; 32/32 concurrent queries correct in " +
                fmt("%.2f", seconds_since(t0)) + " s");
}

Outcome performance() {
  Checker c;
  corpus::Rng rng(1009);
  std::vector<Series> coll;
  coll.reserve(10000);
  for (std::size_t i = 0; i < 10000; ++i) {
    Series s{"p" + std::to_string(i), {}, 50};
    double y = 0;
    for (int t = 0; t < 50; ++t) {
      y += corpus::uniform(rng, -1, 1);
      s.points.push_back({static_cast<double>(t), y});
    }
    coll.push_back(std::move(s));
  }
  PatternQuery q = query_from_series("p42", coll);
  MatchSpec spec;
  rank(q, coll, spec, 10);  // warm-up
  double best = 1e9;
  for (int rep = 0; rep < 5; ++rep) {
    auto t0 = Clock::now();
    auto r = rank(q, coll, spec, 10);
    best = std::min(best, seconds_since(t0));
    c.expect(r.matches.at(0).series_id == "p42", "wrong top match");
  }
  c.expect(best < 0.5, "best of 5 took " + fmt("%.3f", best) + " s");
  return c.done("10000 x 50 ranked in " + fmt("%.1f", best * 1000) + " ms (best of 5)");
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"ranking-oracle-equivalence", ranking_oracle},
      {"self-match", self_match},
      {"affine-y-invariance", affine_invariance},
      {"smoothing-identities-and-contraction", smoothing},
      {"planted-cluster-recovery", planted_clusters},
      {"parser-suites", parsers},
      {"markov-fixtures", markov},
      {"service-contract", service_contract},
      {"performance-10k-x-50", performance},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("uncaught exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s  %-38s %s\n", o.pass ? "PASS" : "FAIL", cr.name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
