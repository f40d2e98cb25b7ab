#include "shapeq/service.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>

// The default backlog of 5 drops bursts of concurrent connects.
#define CPPHTTPLIB_LISTEN_BACKLOG 128
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "shapeq/analytics.hpp"
#include "shapeq/csv.hpp"
#include "shapeq/dataset.hpp"
#include "shapeq/error.hpp"
#include "shapeq/export.hpp"
#include "shapeq/filter.hpp"
#include "shapeq/pattern.hpp"
#include "shapeq/recommender.hpp"

namespace shapeq {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kDisplayPoints = 200;
constexpr std::size_t kDefaultTopK = 10;

/// Transport-level failures that have no library error code.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

int status_for(Errc code) {
  switch (code) {
    case Errc::not_found: return 404;
    case Errc::too_large: return 413;
    default: return 422;
  }
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message,
                const std::optional<SourcePos>& pos = std::nullopt) {
  json body{{"code", code}, {"message", message}};
  if (pos) body["position"] = {{"line", pos->line}, {"col", pos->col}};
  send_json(res, status, body);
}

bool valid_name(std::string_view s) {
  if (s.empty() || s.size() > 128) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  }
  return s.front() != '.';
}

void require_name(std::string_view s, std::string_view what) {
  if (!valid_name(s)) {
    throw Error(Errc::validation, std::string(what) + " must be 1-128 characters of [A-Za-z0-9._-]");
  }
}

void require_content_type(const httplib::Request& req, std::initializer_list<std::string_view> allowed) {
  std::string type = req.get_header_value("Content-Type");
  auto semi = type.find(';');
  if (semi != std::string::npos) type.resize(semi);
  while (!type.empty() && type.back() == ' ') type.pop_back();
  for (auto a : allowed) {
    if (type == a) return;
  }
  throw HttpError{415, "unsupported_media_type",
                  "expected Content-Type " + std::string(*allowed.begin()) + ", got '" + type + "'"};
}

json parse_body(const httplib::Request& req) {
  require_content_type(req, {"application/json"});
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded()) throw HttpError{400, "bad_json", "request body is not valid JSON"};
  if (!body.is_object()) throw HttpError{400, "bad_json", "request body must be a JSON object"};
  return body;
}

// Typed field access that reports schema problems as validation errors.
template <typename T>
T field(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) {
    throw Error(Errc::validation, std::string("missing field '") + key + "'");
  }
  try {
    return obj[key].get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::validation, std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  return field<T>(obj, key);
}

json points_json(std::span<const Point> points) {
  json out = json::array();
  for (const Point& p : points) out.push_back({p.x, p.y});
  return out;
}

json display_points(std::span<const Point> points) {
  if (points.size() <= kDisplayPoints) return points_json(points);
  std::vector<Point> picked;
  picked.reserve(kDisplayPoints);
  const double step = static_cast<double>(points.size() - 1) / static_cast<double>(kDisplayPoints - 1);
  for (std::size_t i = 0; i < kDisplayPoints; ++i) {
    picked.push_back(points[static_cast<std::size_t>(std::llround(step * static_cast<double>(i)))]);
  }
  return points_json(picked);
}

std::vector<Point> read_points(const json& arr, const char* key) {
  if (!arr.is_array()) throw Error(Errc::validation, std::string("field '") + key + "' must be an array");
  std::vector<Point> out;
  for (const auto& p : arr) {
    if (p.is_array() && p.size() == 2 && p[0].is_number() && p[1].is_number()) {
      out.push_back({p[0].get<double>(), p[1].get<double>()});
    } else if (p.is_object() && p.contains("x") && p.contains("y") && p["x"].is_number() &&
               p["y"].is_number()) {
      out.push_back({p["x"].get<double>(), p["y"].get<double>()});
    } else {
      throw Error(Errc::validation, std::string("field '") + key + "' must hold [x, y] pairs");
    }
  }
  return out;
}

json schema_json(const Dataset& ds) {
  json cols = json::array();
  for (const Column& c : ds.columns()) {
    cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}, {"inferred", c.inferred}});
  }
  return {{"name", ds.name()}, {"rows", ds.row_count()}, {"columns", cols}};
}

template <typename E, std::size_t N>
E parse_enum(const std::string& text, const std::array<E, N>& values, const char* what) {
  for (E v : values) {
    if (to_string(v) == text) return v;
  }
  throw Error(Errc::validation, std::string("unknown ") + what + " '" + text + "'");
}

json query_json(const PatternQuery& q) {
  json out{{"source", to_string(q.source)}, {"points", display_points(q.points)}};
  out["originId"] = q.origin_id ? json(*q.origin_id) : json(nullptr);
  out["originText"] = q.origin_text ? json(*q.origin_text) : json(nullptr);
  return out;
}

json diagnostics_json(const CollectionDiagnostics& d) {
  return {{"rowsTotal", d.rows_total},
          {"rowsFiltered", d.rows_filtered},
          {"rowsMissing", d.rows_missing},
          {"shortSeries", d.short_series},
          {"outOfYRange", d.out_of_y_range}};
}

json recommendation_json(const Recommendation& rec) {
  json reps = json::array();
  for (const auto& r : rec.representatives) {
    reps.push_back({{"centroid", r.centroid},
                    {"memberIds", r.member_ids},
                    {"nearestMemberId", r.nearest_member_id}});
  }
  json outs = json::array();
  for (const auto& o : rec.outliers) {
    outs.push_back({{"seriesId", o.series_id}, {"distanceToCentroid", o.distance_to_centroid}});
  }
  return {{"k", rec.k},         {"m", rec.m},          {"seed", rec.seed},
          {"iterations", rec.iterations}, {"representatives", reps}, {"outliers", outs}};
}

json class_json(const DynamicClass& cls) {
  json cons = json::array();
  for (const auto& c : cls.constraints) {
    json one{{"attr", c.attr}};
    one["min"] = std::isfinite(c.min) ? json(c.min) : json(nullptr);
    one["max"] = std::isfinite(c.max) ? json(c.max) : json(nullptr);
    cons.push_back(one);
  }
  return {{"name", cls.name}, {"aggregate", to_string(cls.aggregate)}, {"constraints", cons}};
}

struct SessionState {
  std::string id;
  std::optional<std::string> dataset;
  std::optional<ViewSpec> view;
  std::optional<ValueRange> y_range;
  std::optional<std::string> filter_text;
  filter::FilterAst filter;
  MatchSpec spec;
  std::size_t top_k = kDefaultTopK;
  std::vector<DynamicClass> classes;

  std::optional<PatternQuery> last_query;
  std::vector<RankedMatch> last_matches;
  std::optional<Recommendation> last_recommendation;

  // Rebuilt lazily whenever the dataset, view, filter or y range changes.
  std::shared_ptr<const Dataset> collection_source;
  std::shared_ptr<const Collection> collection;
};

struct SessionSlot {
  std::mutex mutex;
  SessionState state;
  std::chrono::steady_clock::time_point last_used;
};

json spec_json(const MatchSpec& s, std::size_t top_k) {
  json out{{"metric", to_string(s.metric)},
           {"normalize", to_string(s.normalize)},
           {"smoothMethod", to_string(s.smooth)},
           {"smoothParam", s.smooth_param},
           {"resampleN", s.resample_n},
           {"xNormalize", s.x_normalize},
           {"topK", top_k}};
  out["xRange"] = s.x_range ? json::array({s.x_range->min, s.x_range->max}) : json(nullptr);
  return out;
}

json view_json(const SessionState& s) {
  if (!s.view) return nullptr;
  json out{{"dataset", *s.dataset},
           {"x", s.view->x_attr},
           {"y", s.view->y_attr},
           {"group", s.view->group_attr},
           {"display", to_string(s.view->display)},
           {"aggregate", to_string(s.view->aggregate)}};
  out["yRange"] = s.y_range ? json::array({s.y_range->min, s.y_range->max}) : json(nullptr);
  return out;
}

std::optional<std::pair<double, double>> read_range(const json& obj, const char* key) {
  if (!obj.contains(key) || obj[key].is_null()) return std::nullopt;
  const json& r = obj[key];
  if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
    throw Error(Errc::validation, std::string("field '") + key + "' must be [min, max] or null");
  }
  return std::pair{r[0].get<double>(), r[1].get<double>()};
}

}  // namespace

struct Service::Impl {
  explicit Impl(ServiceConfig cfg) : config(std::move(cfg)) {
    spdlog::set_level(spdlog::level::from_str(config.log_level));
    load_persisted();
    routes();
  }

  ServiceConfig config;
  httplib::Server server;
  DatasetRegistry registry;

  std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<SessionSlot>> sessions;
  std::atomic<std::uint64_t> next_session{1};

  std::mutex events_mutex;
  std::map<std::string, std::vector<analytics::Event>> events;

  // ---- persistence -------------------------------------------------------

  fs::path datasets_dir() const { return config.data_dir / "datasets"; }
  fs::path events_dir() const { return config.data_dir / "events"; }

  static std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  void load_persisted() {
    if (config.data_dir.empty()) return;
    fs::create_directories(datasets_dir());
    fs::create_directories(events_dir());
    for (const auto& entry : fs::directory_iterator(datasets_dir())) {
      if (entry.path().extension() != ".csv") continue;
      try {
        auto ds = std::make_shared<const Dataset>(load_dataset(read_file(entry.path()), entry.path().stem().string()));
        registry.put(ds);
        spdlog::info("loaded dataset '{}' ({} rows)", ds->name(), ds->row_count());
      } catch (const std::exception& e) {
        spdlog::warn("skipping {}: {}", entry.path().string(), e.what());
      }
    }
    for (const auto& entry : fs::directory_iterator(events_dir())) {
      if (entry.path().extension() != ".ndjson") continue;
      try {
        auto log = analytics::read_events(read_file(entry.path()));
        for (auto& e : log) events[e.session_id].push_back(std::move(e));
      } catch (const std::exception& e) {
        spdlog::warn("skipping {}: {}", entry.path().string(), e.what());
      }
    }
  }

  void append_event(const analytics::Event& e) {
    std::lock_guard lock(events_mutex);
    if (!config.data_dir.empty()) {
      std::ofstream out(events_dir() / (e.session_id + ".ndjson"), std::ios::app | std::ios::binary);
      out << analytics::to_ndjson(e);
      out.flush();
      if (!out) throw std::runtime_error("failed to append event log");
    }
    events[e.session_id].push_back(e);
  }

  // ---- sessions ----------------------------------------------------------

  std::shared_ptr<SessionSlot> session(const std::string& id) {
    std::lock_guard lock(sessions_mutex);
    sweep_locked(std::chrono::steady_clock::now());
    auto it = sessions.find(id);
    if (it == sessions.end()) throw Error(Errc::not_found, "unknown session '" + id + "'");
    it->second->last_used = std::chrono::steady_clock::now();
    return it->second;
  }

  std::size_t sweep_locked(std::chrono::steady_clock::time_point now) {
    std::size_t dropped = 0;
    for (auto it = sessions.begin(); it != sessions.end();) {
      if (now - it->second->last_used > config.session_ttl) {
        it = sessions.erase(it);
        ++dropped;
      } else {
        ++it;
      }
    }
    return dropped;
  }

  std::shared_ptr<const Collection> collection(SessionState& s) {
    if (!s.view || !s.dataset) throw Error(Errc::validation, "session has no view; PUT /session/{id}/view first");
    auto ds = registry.get(*s.dataset);
    if (s.collection && s.collection_source == ds) return s.collection;
    auto built = std::make_shared<const Collection>(
        build_collection(*ds, *s.view, s.filter.empty() ? nullptr : &s.filter, s.y_range));
    s.collection_source = ds;
    s.collection = built;
    return built;
  }

  static void invalidate(SessionState& s) {
    s.collection.reset();
    s.collection_source.reset();
  }

  // ---- handlers ----------------------------------------------------------

  template <typename Fn>
  httplib::Server::Handler wrap(Fn fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), to_string(e.code()), e.detail(), e.position());
      } catch (const HttpError& e) {
        send_error(res, e.status, e.code, e.message);
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, 500, "internal_error", e.what());
      }
    };
  }

  void routes() {
    server.new_task_queue = [n = config.worker_threads] { return new httplib::ThreadPool(n); };
    server.set_payload_max_length(config.max_upload_mb * 1024 * 1024);
    server.set_logger([](const httplib::Request& req, const httplib::Response& res) {
      spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
    server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
      if (!res.body.empty()) return;
      if (res.status == 404) {
        send_error(res, 404, "not_found", "no such endpoint");
      } else if (res.status == 413) {
        send_error(res, 413, "too_large", "request body exceeds --max-upload-mb");
      } else {
        send_error(res, res.status, "http_error", httplib::status_message(res.status));
      }
    });

    server.Get("/healthz", wrap([](const auto&, auto& res) { send_json(res, 200, {{"status", "ok"}}); }));

    server.Post("/datasets", wrap([this](const auto& req, auto& res) { post_dataset(req, res); }));
    server.Get("/datasets", wrap([this](const auto&, auto& res) {
      json list = json::array();
      for (const auto& ds : registry.list()) list.push_back(schema_json(*ds));
      send_json(res, 200, {{"datasets", list}});
    }));
    server.Get(R"(/datasets/([^/]+)/schema)", wrap([this](const auto& req, auto& res) {
      send_json(res, 200, schema_json(*registry.get(req.matches[1].str())));
    }));

    server.Post("/sessions", wrap([this](const auto& req, auto& res) { post_session(req, res); }));
    server.Delete(R"(/session/([^/]+))", wrap([this](const auto& req, auto& res) {
      std::lock_guard lock(sessions_mutex);
      if (sessions.erase(req.matches[1].str()) == 0) {
        throw Error(Errc::not_found, "unknown session '" + req.matches[1].str() + "'");
      }
      res.status = 204;
    }));
    server.Get(R"(/session/([^/]+))", wrap([this](const auto& req, auto& res) {
      auto slot = session(req.matches[1].str());
      std::lock_guard lock(slot->mutex);
      const auto& s = slot->state;
      json out{{"sessionId", s.id}, {"view", view_json(s)}, {"matchSpec", spec_json(s.spec, s.top_k)}};
      out["filter"] = s.filter_text ? json(*s.filter_text) : json(nullptr);
      json classes = json::array();
      for (const auto& c : s.classes) classes.push_back(class_json(c));
      out["classes"] = classes;
      send_json(res, 200, out);
    }));
    server.Put(R"(/session/([^/]+)/view)", wrap([this](const auto& req, auto& res) { put_view(req, res); }));
    server.Put(R"(/session/([^/]+)/filter)", wrap([this](const auto& req, auto& res) { put_filter(req, res); }));
    server.Put(R"(/session/([^/]+)/matchspec)",
               wrap([this](const auto& req, auto& res) { put_matchspec(req, res); }));
    server.Post(R"(/session/([^/]+)/query)", wrap([this](const auto& req, auto& res) { post_query(req, res); }));
    server.Get(R"(/session/([^/]+)/recommendations)",
               wrap([this](const auto& req, auto& res) { get_recommendations(req, res); }));
    server.Post(R"(/session/([^/]+)/classes)", wrap([this](const auto& req, auto& res) { post_class(req, res); }));
    server.Get(R"(/session/([^/]+)/classes)", wrap([this](const auto& req, auto& res) {
      auto slot = session(req.matches[1].str());
      std::lock_guard lock(slot->mutex);
      json classes = json::array();
      for (const auto& c : slot->state.classes) classes.push_back(class_json(c));
      send_json(res, 200, {{"classes", classes}});
    }));
    server.Get(R"(/session/([^/]+)/classes/aggregates)",
               wrap([this](const auto& req, auto& res) { get_aggregates(req, res); }));
    server.Get(R"(/session/([^/]+)/export)", wrap([this](const auto& req, auto& res) { get_export(req, res); }));
    server.Get(R"(/session/([^/]+)/debug/collection)", wrap([this](const auto& req, auto& res) {
      auto slot = session(req.matches[1].str());
      std::lock_guard lock(slot->mutex);
      auto coll = collection(slot->state);
      json series = json::array();
      for (const auto& s : coll->series) {
        series.push_back({{"id", s.id}, {"sourceCount", s.source_count}, {"points", points_json(s.points)}});
      }
      send_json(res, 200, {{"series", series}, {"diagnostics", diagnostics_json(coll->diagnostics)}});
    }));

    server.Post("/events", wrap([this](const auto& req, auto& res) { post_event(req, res); }));
    server.Get(R"(/analytics/([^/]+)/markov)", wrap([this](const auto& req, auto& res) {
      std::string id = req.matches[1].str();
      std::vector<analytics::Event> log;
      {
        std::lock_guard lock(events_mutex);
        auto it = events.find(id);
        if (it == events.end()) throw Error(Errc::not_found, "no events recorded for session '" + id + "'");
        log = it->second;
      }
      send_markov(req, res, log, std::nullopt);
    }));
    server.Get("/analytics/markov", wrap([this](const auto& req, auto& res) {
      std::optional<std::string> domain;
      if (req.has_param("domain")) domain = req.get_param_value("domain");
      std::vector<analytics::Event> log;
      {
        std::lock_guard lock(events_mutex);
        for (const auto& [_, session_log] : events) log.insert(log.end(), session_log.begin(), session_log.end());
      }
      send_markov(req, res, log, domain);
    }));
  }

  void post_dataset(const httplib::Request& req, httplib::Response& res) {
    require_content_type(req, {"text/csv", "application/csv"});
    if (!req.has_param("name")) throw Error(Errc::validation, "query parameter 'name' is required");
    std::string name = req.get_param_value("name");
    require_name(name, "dataset name");
    auto ds = std::make_shared<const Dataset>(load_dataset(req.body, name));
    if (!config.data_dir.empty()) {
      std::ofstream out(datasets_dir() / (name + ".csv"), std::ios::binary | std::ios::trunc);
      out << req.body;
      if (!out) throw std::runtime_error("failed to persist dataset");
    }
    registry.put(ds);
    spdlog::info("registered dataset '{}' ({} rows)", name, ds->row_count());
    send_json(res, 201, schema_json(*ds));
  }

  void post_session(const httplib::Request& req, httplib::Response& res) {
    std::string id;
    if (!req.body.empty()) {
      json body = parse_body(req);
      if (auto requested = optional_field<std::string>(body, "sessionId")) id = *requested;
    }
    std::lock_guard lock(sessions_mutex);
    if (id.empty()) {
      do {
        id = "session-" + std::to_string(next_session++);
      } while (sessions.count(id));
    }
    require_name(id, "sessionId");
    if (sessions.count(id)) throw HttpError{409, "conflict", "session '" + id + "' already exists"};
    auto slot = std::make_shared<SessionSlot>();
    slot->state.id = id;
    slot->last_used = std::chrono::steady_clock::now();
    sessions.emplace(id, slot);
    send_json(res, 201, {{"sessionId", id}});
  }

  void put_view(const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;

    std::string dataset = field<std::string>(body, "dataset");
    auto ds = registry.get(dataset);
    ViewSpec view;
    view.x_attr = field<std::string>(body, "x");
    view.y_attr = field<std::string>(body, "y");
    view.group_attr = field<std::string>(body, "group");
    if (auto d = optional_field<std::string>(body, "display")) {
      view.display = parse_enum(*d, std::array{Display::line, Display::scatter}, "display");
    }
    if (auto a = optional_field<std::string>(body, "aggregate")) {
      view.aggregate = parse_enum(*a, std::array{Aggregate::none, Aggregate::mean, Aggregate::median}, "aggregate");
    }
    std::optional<ValueRange> y_range;
    if (auto r = read_range(body, "yRange")) {
      if (!(r->first <= r->second)) throw Error(Errc::validation, "yRange requires min <= max");
      y_range = ValueRange{r->first, r->second};
    }
    view.validate(*ds);
    if (!s.filter.empty()) filter::BoundFilter(s.filter, ds->columns());

    auto built = std::make_shared<const Collection>(
        build_collection(*ds, view, s.filter.empty() ? nullptr : &s.filter, y_range));
    s.dataset = dataset;
    s.view = view;
    s.y_range = y_range;
    s.collection_source = ds;
    s.collection = built;
    s.last_matches.clear();
    s.last_recommendation.reset();
    send_json(res, 200, {{"view", view_json(s)},
                         {"collection", {{"series", built->series.size()},
                                         {"diagnostics", diagnostics_json(built->diagnostics)}}}});
  }

  void put_filter(const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;
    if (!body.contains("filter")) throw Error(Errc::validation, "missing field 'filter'");
    if (body["filter"].is_null() || (body["filter"].is_string() && body["filter"].get<std::string>().empty())) {
      s.filter = {};
      s.filter_text.reset();
    } else {
      std::string text = field<std::string>(body, "filter");
      filter::FilterAst ast = filter::parse_filter(text);
      if (s.dataset) filter::BoundFilter(ast, registry.get(*s.dataset)->columns());
      s.filter = ast;
      s.filter_text = text;
    }
    invalidate(s);
    s.last_matches.clear();
    s.last_recommendation.reset();
    json out;
    out["filter"] = s.filter_text ? json(*s.filter_text) : json(nullptr);
    out["canonical"] = s.filter.empty() ? json(nullptr) : json(filter::to_string(s.filter));
    send_json(res, 200, out);
  }

  void put_matchspec(const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;
    MatchSpec spec = s.spec;
    std::size_t top_k = s.top_k;
    if (auto v = optional_field<std::string>(body, "metric")) {
      spec.metric = parse_enum(*v, std::array{Metric::euclidean, Metric::slope}, "metric");
    }
    if (auto v = optional_field<std::string>(body, "normalize")) {
      spec.normalize = parse_enum(
          *v, std::array{Normalization::zscore, Normalization::minmax, Normalization::none}, "normalization");
    }
    if (auto v = optional_field<std::string>(body, "smoothMethod")) {
      spec.smooth = parse_enum(
          *v, std::array{SmoothMethod::none, SmoothMethod::moving_average, SmoothMethod::exponential},
          "smoothing method");
    }
    if (auto v = optional_field<double>(body, "smoothParam")) spec.smooth_param = *v;
    if (auto v = optional_field<long long>(body, "resampleN")) {
      if (*v < 2) throw Error(Errc::parameter, "resampleN must be at least 2");
      spec.resample_n = static_cast<std::size_t>(*v);
    }
    if (auto v = optional_field<bool>(body, "xNormalize")) spec.x_normalize = *v;
    if (body.contains("xRange")) {
      auto r = read_range(body, "xRange");
      spec.x_range = r ? std::optional<XRange>(XRange{r->first, r->second}) : std::nullopt;
    }
    if (auto v = optional_field<long long>(body, "topK")) {
      if (*v < 1) throw Error(Errc::parameter, "topK must be at least 1");
      top_k = static_cast<std::size_t>(*v);
    }
    spec.validate();
    s.spec = spec;
    s.top_k = top_k;
    send_json(res, 200, spec_json(s.spec, s.top_k));
  }

  PatternQuery build_query(SessionState& s, const json& body, const Collection& coll) {
    std::string source = field<std::string>(body, "source");
    json payload = body.contains("payload") ? body["payload"] : json::object();
    if (!payload.is_object()) throw Error(Errc::validation, "field 'payload' must be an object");

    if (source == "sketch") {
      auto points = read_points(payload.contains("points") ? payload["points"] : json(), "points");
      double w = field<double>(payload, "width");
      double h = field<double>(payload, "height");
      if (payload.value("modify", false)) {
        if (!s.last_query) throw Error(Errc::validation, "modify requires a previous query in this session");
        if (!(w > 0 && h > 0)) throw Error(Errc::parameter, "canvas dimensions must be positive");
        const auto& base = s.last_query->points;
        double x0 = base.front().x, x1 = base.back().x;
        auto [lo, hi] = std::minmax_element(base.begin(), base.end(),
                                            [](const Point& a, const Point& b) { return a.y < b.y; });
        double y0 = lo->y, y1 = hi->y == lo->y ? lo->y + 1.0 : hi->y;
        std::vector<Point> stroke;
        for (const Point& p : points) {
          stroke.push_back({x0 + p.x / w * (x1 - x0), y0 + (1.0 - p.y / h) * (y1 - y0)});
        }
        return overdraw(*s.last_query, stroke);
      }
      return query_from_sketch(points, w, h);
    }
    if (source == "equation") {
      std::string text = field<std::string>(payload, "text");
      double xmin = optional_field<double>(payload, "xmin").value_or(0.0);
      double xmax = optional_field<double>(payload, "xmax").value_or(1.0);
      auto n = optional_field<long long>(payload, "n").value_or(static_cast<long long>(s.spec.resample_n));
      if (n < 2) throw Error(Errc::parameter, "n must be at least 2");
      return query_from_equation(expr::parse_equation(text), xmin, xmax, static_cast<std::size_t>(n), text);
    }
    if (source == "upload") {
      return query_from_upload(field<std::string>(payload, "csv"),
                               optional_field<std::string>(payload, "fileName").value_or(""));
    }
    if (source == "series") {
      if (payload.contains("representative")) {
        auto index = field<long long>(payload, "representative");
        if (!s.last_recommendation) throw Error(Errc::validation, "no recommendations computed in this session");
        const auto& reps = s.last_recommendation->representatives;
        if (index < 0 || static_cast<std::size_t>(index) >= reps.size()) {
          throw Error(Errc::not_found, "representative index " + std::to_string(index) + " out of range");
        }
        return query_from_vector(reps[static_cast<std::size_t>(index)].centroid,
                                 "representative:" + std::to_string(index));
      }
      return query_from_series(field<std::string>(payload, "id"), coll.series);
    }
    throw Error(Errc::validation, "unknown query source '" + source + "'");
  }

  void post_query(const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;
    auto coll = collection(s);
    PatternQuery query = build_query(s, body, *coll);
    std::size_t top_k = s.top_k;
    if (auto v = optional_field<long long>(body, "topK")) {
      if (*v < 1) throw Error(Errc::parameter, "topK must be at least 1");
      top_k = static_cast<std::size_t>(*v);
    }
    RankResult ranked = rank(query, coll->series, s.spec, top_k);

    std::map<std::string_view, const Series*> by_id;
    for (const auto& series : coll->series) by_id.emplace(series.id, &series);
    json matches = json::array();
    for (const auto& m : ranked.matches) {
      matches.push_back({{"rank", m.rank},
                         {"seriesId", m.series_id},
                         {"distance", m.distance},
                         {"points", display_points(by_id.at(m.series_id)->points)}});
    }
    json diagnostics{{"candidates", ranked.diagnostics.candidates},
                     {"skipped", ranked.diagnostics.skipped},
                     {"flat", ranked.diagnostics.flat},
                     {"queryFlat", ranked.diagnostics.query_flat},
                     {"collection", diagnostics_json(coll->diagnostics)}};
    s.last_query = query;
    s.last_matches = ranked.matches;
    send_json(res, 200, {{"query", query_json(query)}, {"matches", matches}, {"diagnostics", diagnostics}});
  }

  static std::size_t size_param(const httplib::Request& req, const char* key, std::size_t fallback) {
    if (!req.has_param(key)) return fallback;
    std::string text = req.get_param_value(key);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size() || v < 0) {
      throw Error(Errc::validation, std::string("query parameter '") + key + "' must be a nonnegative integer");
    }
    return static_cast<std::size_t>(v);
  }

  void get_recommendations(const httplib::Request& req, httplib::Response& res) {
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;
    auto coll = collection(s);
    std::size_t k = size_param(req, "k", 3);
    std::size_t m = size_param(req, "m", 3);
    std::uint64_t seed = size_param(req, "seed", kDefaultSeed);
    Recommendation rec = recommend(coll->series, s.spec, k, m, seed);
    s.last_recommendation = rec;
    send_json(res, 200, recommendation_json(rec));
  }

  void post_class(const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;
    DynamicClass cls;
    cls.name = field<std::string>(body, "name");
    if (auto a = optional_field<std::string>(body, "aggregate")) {
      cls.aggregate = parse_enum(*a, std::array{Aggregate::mean, Aggregate::median}, "class aggregate");
    }
    if (!body.contains("constraints") || !body["constraints"].is_array()) {
      throw Error(Errc::validation, "field 'constraints' must be an array");
    }
    for (const auto& c : body["constraints"]) {
      if (!c.is_object()) throw Error(Errc::validation, "each constraint must be an object");
      RangeConstraint rc;
      rc.attr = field<std::string>(c, "attr");
      if (auto v = optional_field<double>(c, "min")) rc.min = *v;
      if (auto v = optional_field<double>(c, "max")) rc.max = *v;
      cls.constraints.push_back(rc);
    }
    if (!s.dataset) throw Error(Errc::validation, "session has no view; PUT /session/{id}/view first");
    cls.validate(*registry.get(*s.dataset));
    auto existing = std::find_if(s.classes.begin(), s.classes.end(),
                                 [&](const DynamicClass& c) { return c.name == cls.name; });
    if (existing != s.classes.end()) {
      *existing = cls;
    } else {
      s.classes.push_back(cls);
    }
    send_json(res, 201, class_json(cls));
  }

  void get_aggregates(const httplib::Request& req, httplib::Response& res) {
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;
    if (!s.view || !s.dataset) throw Error(Errc::validation, "session has no view; PUT /session/{id}/view first");
    auto ds = registry.get(*s.dataset);
    json out = json::array();
    for (const auto& cls : s.classes) {
      json entry = class_json(cls);
      try {
        Series agg = aggregate_class(*ds, cls, *s.view, s.spec.resample_n);
        entry["points"] = points_json(agg.points);
        entry["sourceCount"] = agg.source_count;
      } catch (const Error& e) {
        entry["error"] = {{"code", to_string(e.code())}, {"message", e.detail()}};
      }
      out.push_back(entry);
    }
    send_json(res, 200, {{"aggregates", out}});
  }

  void get_export(const httplib::Request& req, httplib::Response& res) {
    auto slot = session(req.matches[1].str());
    std::lock_guard lock(slot->mutex);
    auto& s = slot->state;
    std::string what = req.has_param("what") ? req.get_param_value("what") : "";
    std::string csv_text;
    if (what == "matches") {
      if (s.last_matches.empty()) throw Error(Errc::no_data, "no query results to export yet");
      csv_text = export_matches_csv(s.last_matches);
    } else if (what == "recommendations") {
      if (!s.last_recommendation) throw Error(Errc::no_data, "no recommendations to export yet");
      csv_text = export_recommendation_csv(*s.last_recommendation);
    } else if (what == "query") {
      if (!s.last_query) throw Error(Errc::no_data, "no query to export yet");
      csv_text = export_points_csv(s.last_query->points);
    } else {
      throw Error(Errc::validation, "query parameter 'what' must be matches, recommendations or query");
    }
    res.status = 200;
    res.set_header("Content-Disposition", "attachment; filename=\"" + what + ".csv\"");
    res.set_content(csv_text, "text/csv");
  }

  void post_event(const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    analytics::Event e;
    e.session_id = field<std::string>(body, "sessionId");
    require_name(e.session_id, "sessionId");
    e.timestamp = field<std::int64_t>(body, "timestamp");
    if (optional_field<bool>(body, "breakMarker").value_or(false)) {
      e.feature = analytics::Feature::break_marker;
    } else {
      e.feature = analytics::parse_feature(field<std::string>(body, "feature"));
    }
    e.domain = optional_field<std::string>(body, "domain");
    append_event(e);
    res.status = 204;
  }

  void send_markov(const httplib::Request& req, httplib::Response& res, const std::vector<analytics::Event>& log,
                   const std::optional<std::string>& domain) {
    double damping = analytics::kDefaultDamping;
    if (req.has_param("damping")) {
      auto v = csv::parse_number(req.get_param_value("damping"));
      if (!v) throw Error(Errc::validation, "query parameter 'damping' must be a number");
      damping = *v;
    }
    analytics::MarkovModel model = analytics::build_model(log, domain, damping);
    if (model.total_transitions == 0) {
      throw Error(Errc::no_data, "no transitions recorded; centrality is undefined");
    }
    if (req.has_param("format") && req.get_param_value("format") == "dot") {
      res.status = 200;
      res.set_content(analytics::to_dot(model), "text/vnd.graphviz");
      return;
    }
    res.status = 200;
    res.set_content(analytics::to_json(model), "application/json");
  }
};

Service::Service(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}
Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) {
  spdlog::info("listening on {}:{}", host, port);
  return impl_->server.listen(host, port);
}

int Service::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }
void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }
void Service::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

std::size_t Service::evict_idle(std::chrono::steady_clock::time_point now) {
  std::lock_guard lock(impl_->sessions_mutex);
  return impl_->sweep_locked(now);
}

}  // namespace shapeq
