#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

namespace shapeq {

struct ServiceConfig {
  std::filesystem::path data_dir;  ///< empty disables persistence
  std::size_t max_upload_mb = 64;
  std::chrono::seconds session_ttl{3600};
  std::size_t worker_threads = 16;
  std::string log_level = "info";
};

/// HTTP/JSON front end over datasets, sessions, queries, recommendations,
/// dynamic classes, export and interaction analytics. Endpoint reference:
/// docs/api.md.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Blocks serving until stop().
  bool listen(const std::string& host, int port);
  /// Binds an ephemeral port and returns it; follow with listen_after_bind().
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

  /// Drops sessions idle since before now - session_ttl. Returns the count.
  std::size_t evict_idle(std::chrono::steady_clock::time_point now);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace shapeq
