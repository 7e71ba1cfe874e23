#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "packlab/engine.hpp"
#include "packlab/store.hpp"

namespace packlab {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct ServiceOptions {
  int jobs = 0;  // worker threads per experiment run; 0 = hardware concurrency
  PackOptions pack;
  std::filesystem::path static_dir;  // UI bundle; empty disables static serving
};

/// Transport-independent request handler. Routes:
///
///   GET  /api/recipes                          GET  /api/experiments
///   POST /api/recipes                          POST /api/experiments
///   GET  /api/experiments/{id}                 POST /api/experiments/{id}/run
///   GET  /api/experiments/{id}/status          GET  /api/experiments/{id}/dimensions
///   GET  /api/experiments/{id}/histogram?dim=&bins=&filters=
///   GET  /api/experiments/{id}/runs?filters=
///   GET  /api/experiments/{id}/runs/{n}/heatmap?axis=x|y|z&mode=combined|<ingredient>
///   GET  /api/experiments/{id}/runs/{n}/outputs/{r}?proxy=1
///
/// `filters` is URL-encoded JSON in the xfilter wire form. Errors are
/// {"error": {"code", "message"}} with status 400, 404, 405, 409 or 500.
/// Runs execute on a background thread; handle() never blocks on them.
class Service {
 public:
  explicit Service(std::filesystem::path data_root, ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(std::string_view method, std::string_view path,
                      const std::map<std::string, std::string>& query, std::string_view body);

  /// Blocks until the background run of `id` (if any) has finished.
  void wait(const std::string& id);

  Store& store() noexcept { return store_; }

 private:
  struct ActiveRun;
  struct Results;

  HttpResponse route(std::string_view method, std::string_view path,
                     const std::map<std::string, std::string>& query, std::string_view body);
  HttpResponse experiment_route(std::string_view method, const std::string& id, std::string_view rest,
                                const std::map<std::string, std::string>& query);
  HttpResponse start_run(const std::string& id);
  HttpResponse status(const std::string& id);
  HttpResponse serve_static(std::string_view path) const;
  std::shared_ptr<const Results> results(const std::string& id);

  Store store_;
  ServiceOptions options_;

  std::mutex runs_mutex_;
  std::map<std::string, std::shared_ptr<ActiveRun>> runs_;
  std::mutex results_mutex_;
  std::map<std::string, std::shared_ptr<const Results>> results_;
};

/// HTTP front end over a Service.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Binds host:port (port 0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace packlab
