#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "shapeq/analytics.hpp"
#include "shapeq/dataset.hpp"
#include "shapeq/error.hpp"
#include "shapeq/export.hpp"
#include "shapeq/filter.hpp"
#include "shapeq/pattern.hpp"
#include "shapeq/service.hpp"

namespace {

shapeq::Service* g_service = nullptr;

extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// CLI11 reads the environment only when the flag is absent.
struct ServeOptions {
  std::string host = "0.0.0.0";
  int port = 8080;
  std::string data_dir = "./data";
  std::size_t max_upload_mb = 64;
  std::string log_level = "info";
  long ttl_seconds = 3600;
  std::size_t threads = 16;
};

int serve(const ServeOptions& o) {
  spdlog::set_level(spdlog::level::from_str(o.log_level));
  shapeq::ServiceConfig cfg;
  cfg.data_dir = o.data_dir;
  cfg.max_upload_mb = o.max_upload_mb;
  cfg.log_level = o.log_level;
  cfg.session_ttl = std::chrono::seconds(o.ttl_seconds);
  cfg.worker_threads = o.threads;
  shapeq::Service service(cfg);
  g_service = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  if (!service.listen(o.host, o.port)) {
    spdlog::error("could not listen on {}:{}", o.host, o.port);
    return 1;
  }
  return 0;
}

struct AnalyzeOptions {
  std::vector<std::string> files;
  std::string domain;
  std::string format = "json";
  double damping = shapeq::analytics::kDefaultDamping;
};

int analyze(const AnalyzeOptions& o) {
  std::vector<shapeq::analytics::Event> log;
  for (const auto& f : o.files) {
    auto part = shapeq::analytics::read_events(slurp(f));
    log.insert(log.end(), part.begin(), part.end());
  }
  std::optional<std::string> domain;
  if (!o.domain.empty()) domain = o.domain;
  auto model = shapeq::analytics::build_model(log, domain, o.damping);
  if (model.total_transitions == 0) {
    std::cerr << "no transitions in the selected events\n";
    return 2;
  }
  std::cout << (o.format == "dot" ? shapeq::analytics::to_dot(model) : shapeq::analytics::to_json(model) + "\n");
  return 0;
}

struct RankOptions {
  std::string dataset;
  std::string x, y, group;
  std::string filter;
  std::string equation;
  std::string series;
  std::string upload;
  double xmin = 0, xmax = 1;
  std::size_t top_k = 10;
  std::string metric = "euclidean";
  std::string normalize = "zscore";
  std::size_t resample_n = 50;
};

int rank_cmd(const RankOptions& o) {
  using namespace shapeq;
  auto ds = load_dataset(slurp(o.dataset), "cli");
  ViewSpec view;
  view.x_attr = o.x;
  view.y_attr = o.y;
  view.group_attr = o.group;
  filter::FilterAst f;
  if (!o.filter.empty()) f = filter::parse_filter(o.filter);
  auto coll = build_collection(ds, view, o.filter.empty() ? nullptr : &f);

  MatchSpec spec;
  spec.metric = o.metric == "slope" ? Metric::slope : Metric::euclidean;
  spec.normalize = o.normalize == "minmax" ? Normalization::minmax
                   : o.normalize == "none" ? Normalization::none
                                           : Normalization::zscore;
  spec.resample_n = o.resample_n;
  spec.validate();

  PatternQuery q;
  if (!o.equation.empty()) {
    q = query_from_equation(expr::parse_equation(o.equation), o.xmin, o.xmax, o.resample_n, o.equation);
  } else if (!o.series.empty()) {
    q = query_from_series(o.series, coll.series);
  } else if (!o.upload.empty()) {
    q = query_from_upload(slurp(o.upload), o.upload);
  } else {
    std::cerr << "one of --equation, --series or --upload is required\n";
    return 2;
  }
  auto result = rank(q, coll.series, spec, o.top_k);
  std::cout << export_matches_csv(result.matches);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"shapeq: shape search over collections of series"};
  app.require_subcommand(1);

  ServeOptions serve_opts;
  auto* s = app.add_subcommand("serve", "run the HTTP/JSON service");
  s->add_option("--host", serve_opts.host, "bind address")->capture_default_str();
  s->add_option("--port", serve_opts.port, "listen port")->envname("SHAPEQ_PORT")->capture_default_str();
  s->add_option("--data-dir", serve_opts.data_dir, "dataset and event log directory")
      ->envname("SHAPEQ_DATA_DIR")
      ->capture_default_str();
  s->add_option("--max-upload-mb", serve_opts.max_upload_mb, "largest accepted request body")
      ->envname("SHAPEQ_MAX_UPLOAD_MB")
      ->capture_default_str();
  s->add_option("--log-level", serve_opts.log_level, "trace, debug, info, warn, error")
      ->envname("SHAPEQ_LOG_LEVEL")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();
  s->add_option("--session-ttl", serve_opts.ttl_seconds, "idle seconds before a session is dropped")
      ->envname("SHAPEQ_SESSION_TTL")
      ->capture_default_str();
  s->add_option("--threads", serve_opts.threads, "worker threads")->envname("SHAPEQ_THREADS")->capture_default_str();

  AnalyzeOptions an;
  auto* a = app.add_subcommand("analyze", "Markov model of logged interaction events");
  a->add_option("events", an.files, "NDJSON event files")->required()->check(CLI::ExistingFile);
  a->add_option("--domain", an.domain, "only events tagged with this domain");
  a->add_option("--format", an.format, "json or dot")->check(CLI::IsMember({"json", "dot"}))->capture_default_str();
  a->add_option("--damping", an.damping, "damping for centrality, in (0, 1]")->capture_default_str();

  RankOptions rk;
  auto* r = app.add_subcommand("rank", "rank a dataset's series against one query, print CSV");
  r->add_option("--dataset", rk.dataset, "CSV file")->required()->check(CLI::ExistingFile);
  r->add_option("-x", rk.x, "x attribute")->required();
  r->add_option("-y", rk.y, "y attribute")->required();
  r->add_option("--group", rk.group, "grouping attribute")->required();
  r->add_option("--filter", rk.filter, "row filter, e.g. \"flux>10 AND CLASS_STAR=1\"");
  auto* qs = r->add_option_group("query");
  qs->add_option("--equation", rk.equation, "y = f(x)");
  qs->add_option("--series", rk.series, "series id from the collection");
  qs->add_option("--upload", rk.upload, "two-column x,y CSV file");
  qs->require_option(1);
  r->add_option("--xmin", rk.xmin, "equation domain start")->capture_default_str();
  r->add_option("--xmax", rk.xmax, "equation domain end")->capture_default_str();
  r->add_option("-k,--top-k", rk.top_k, "number of matches")->capture_default_str();
  r->add_option("--metric", rk.metric)->check(CLI::IsMember({"euclidean", "slope"}))->capture_default_str();
  r->add_option("--normalize", rk.normalize)->check(CLI::IsMember({"zscore", "minmax", "none"}))->capture_default_str();
  r->add_option("-n,--resample", rk.resample_n, "points per compared vector")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (s->parsed()) return serve(serve_opts);
    if (a->parsed()) return analyze(an);
    if (r->parsed()) return rank_cmd(rk);
  } catch (const shapeq::Error& e) {
    std::cerr << shapeq::to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
