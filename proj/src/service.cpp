#include "packlab/service.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <future>
#include <thread>
#include <vector>

#include <httplib.h>

#include "packlab/density.hpp"
#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"
#include "packlab/metrics.hpp"
#include "packlab/params.hpp"
#include "packlab/runner.hpp"
#include "packlab/xfilter.hpp"

namespace packlab {

using json_util::json;

namespace {

// Not an Error subclass: raised only by the router.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

HttpResponse json_response(const json& j, int status = 200) {
  return {status, "application/json", json_util::dump(j)};
}

HttpResponse error_response(int status, std::string_view code, std::string_view message) {
  return json_response({{"error", {{"code", code}, {"message", message}}}}, status);
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> parts;
  while (!path.empty()) {
    const auto slash = path.find('/');
    const auto part = path.substr(0, slash);
    if (!part.empty()) parts.push_back(part);
    if (slash == std::string_view::npos) break;
    path.remove_prefix(slash + 1);
  }
  return parts;
}

std::int64_t parse_index(std::string_view s) {
  std::int64_t v = -1;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || v < 0) throw HttpError{404, "not_found", "no such resource"};
  return v;
}

std::string query_or(const std::map<std::string, std::string>& q, const std::string& key, std::string fallback) {
  const auto it = q.find(key);
  return it == q.end() || it->second.empty() ? fallback : it->second;
}

RowGroup filters_from_query(const std::map<std::string, std::string>& q) {
  const std::string text = query_or(q, "filters", "");
  if (text.empty()) return {};
  return row_from_json(json_util::parse(text));
}

json record_json(const ExperimentRecord& rec) {
  json j{{"id", rec.id},
         {"status", to_string(rec.status)},
         {"completed_jobs", rec.completed_jobs},
         {"total_jobs", rec.total_jobs},
         {"progress", rec.progress()},
         {"n_configs", rec.config.n_configs},
         {"r_seeds", rec.config.r_seeds},
         {"recipe", rec.config.recipe.name}};
  if (!rec.message.empty()) j["message"] = rec.message;
  return j;
}

std::string content_type_for(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

}  // namespace

struct Service::ActiveRun {
  std::thread thread;
  std::atomic<std::int64_t> completed{0};
  std::atomic<bool> finished{false};
  std::atomic<bool> cancel{false};
  std::int64_t total = 0;
  std::shared_future<void> done;
};

struct Service::Results {
  std::vector<RunSummary> summaries;
  std::unique_ptr<RunTable> table;
  std::map<std::int64_t, std::size_t> by_run;
};

Service::Service(std::filesystem::path data_root, ServiceOptions options)
    : store_(std::move(data_root)), options_(std::move(options)) {}

Service::~Service() {
  std::lock_guard lock(runs_mutex_);
  for (auto& [_, run] : runs_) run->cancel = true;
  for (auto& [_, run] : runs_) {
    if (run->thread.joinable()) run->thread.join();
  }
}

void Service::wait(const std::string& id) {
  std::shared_ptr<ActiveRun> run;
  {
    std::lock_guard lock(runs_mutex_);
    const auto it = runs_.find(id);
    if (it == runs_.end()) return;
    run = it->second;
  }
  run->done.wait();
}

HttpResponse Service::handle(std::string_view method, std::string_view path,
                             const std::map<std::string, std::string>& query, std::string_view body) {
  try {
    return route(method, path, query, body);
  } catch (const HttpError& e) {
    return error_response(e.status, e.code, e.message);
  } catch (const NotFound& e) {
    return error_response(404, "not_found", e.what());
  } catch (const ConflictError& e) {
    return error_response(409, "conflict", e.what());
  } catch (const ValidationError& e) {
    return error_response(400, "validation_error", e.what());
  } catch (const MalformedDocument& e) {
    return error_response(400, "malformed_document", e.what());
  } catch (const SchemaViolation& e) {
    return error_response(400, "schema_violation", e.what());
  } catch (const UnknownDimension& e) {
    return error_response(400, "unknown_dimension", e.what());
  } catch (const ComboExplosion& e) {
    return error_response(400, "combo_explosion", e.what());
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what());
  }
}

HttpResponse Service::route(std::string_view method, std::string_view path,
                            const std::map<std::string, std::string>& query, std::string_view body) {
  const auto parts = split_path(path);
  if (parts.empty() || parts[0] != "api") {
    if (method != "GET") throw HttpError{405, "method_not_allowed", "method not allowed"};
    return serve_static(path);
  }

  if (parts.size() == 2 && parts[1] == "recipes") {
    if (method == "GET") {
      json list = json::array();
      for (const auto& name : store_.list_recipes()) list.push_back(to_json(store_.load_recipe(name)));
      return json_response(list);
    }
    if (method == "POST") {
      const Recipe r = parse_recipe(body);
      return json_response({{"name", store_.save_recipe(r)}}, 201);
    }
    throw HttpError{405, "method_not_allowed", "method not allowed"};
  }

  if (parts.size() >= 2 && parts[1] == "experiments") {
    if (parts.size() == 2) {
      if (method == "GET") {
        json list = json::array();
        for (const auto& id : store_.list_experiments()) list.push_back(json_util::parse(status(id).body));
        return json_response(list);
      }
      if (method == "POST") {
        json doc = json_util::parse(body);
        // A recipe may be referenced by the name it was stored under.
        if (doc.is_object() && doc.contains("recipe") && doc["recipe"].is_string()) {
          doc["recipe"] = to_json(store_.load_recipe(doc["recipe"].get<std::string>()));
        }
        const ExperimentRecord rec = store_.save_experiment(experiment_from_json(doc));
        return json_response(json_util::parse(status(rec.id).body), 201);
      }
      throw HttpError{405, "method_not_allowed", "method not allowed"};
    }
    const std::string id(parts[2]);
    if (!store_.has_experiment(id)) throw NotFound("unknown experiment '" + id + "'");
    std::string rest;
    for (std::size_t i = 3; i < parts.size(); ++i) {
      rest += "/";
      rest += parts[i];
    }
    return experiment_route(method, id, rest, query);
  }
  throw HttpError{404, "not_found", "no route for " + std::string(path)};
}

HttpResponse Service::experiment_route(std::string_view method, const std::string& id, std::string_view rest,
                                       const std::map<std::string, std::string>& query) {
  if (rest == "/run") {
    if (method != "POST") throw HttpError{405, "method_not_allowed", "method not allowed"};
    return start_run(id);
  }
  if (method != "GET") throw HttpError{405, "method_not_allowed", "method not allowed"};

  if (rest.empty()) {
    json j = json_util::parse(status(id).body);
    j["experiment"] = json_util::parse(store_.experiment_document(id));
    return json_response(j);
  }
  if (rest == "/status") return status(id);

  if (rest == "/dimensions") {
    const auto res = results(id);
    const RunTable& t = *res->table;
    json dims = json::array();
    for (std::size_t d = 0; d < t.dimensions().size(); ++d) {
      const Dimension& dim = t.dimensions()[d];
      json j{{"name", dim.name}, {"kind", to_string(dim.kind)}, {"is_metric", dim.is_metric}};
      if (dim.kind == ParamKind::categorical) {
        j["categories"] = t.categories(d);
      } else {
        double lo = INFINITY, hi = -INFINITY;
        for (std::size_t row = 0; row < t.size(); ++row) {
          const double v = t.value(d, row);
          if (std::isnan(v)) continue;
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
        if (lo <= hi) j["extent"] = {lo, hi};
      }
      dims.push_back(std::move(j));
    }
    return json_response({{"runs", t.size()}, {"dimensions", std::move(dims)}});
  }

  if (rest == "/histogram") {
    const std::string dim = query_or(query, "dim", "");
    if (dim.empty()) throw HttpError{400, "invalid_request", "missing 'dim'"};
    const std::string bins_text = query_or(query, "bins", std::to_string(kDefaultBins));
    int bins = 0;
    const auto [ptr, ec] = std::from_chars(bins_text.data(), bins_text.data() + bins_text.size(), bins);
    if (ec != std::errc() || ptr != bins_text.data() + bins_text.size() || bins < 1 || bins > 1000) {
      throw HttpError{400, "invalid_request", "'bins' must be an integer in [1, 1000]"};
    }
    const auto res = results(id);
    const RowGroup row = filters_from_query(query);
    return json_response(to_json(histogram(*res->table, row, dim, bins)));
  }

  if (rest == "/runs") {
    const auto res = results(id);
    const RowGroup row = filters_from_query(query);
    json runs = json::array();
    for (const auto& m : list_matching_runs(*res->table, row)) {
      const RunSummary& s = res->summaries[res->by_run.at(m.run_index)];
      runs.push_back({{"run_index", s.run_index},
                      {"seeds", s.seeds},
                      {"assignment", to_json(s.assignment)},
                      {"metrics", s.metrics}});
    }
    return json_response({{"count", runs.size()}, {"total", res->table->size()}, {"runs", std::move(runs)}});
  }

  const auto parts = split_path(rest);
  if (parts.size() >= 3 && parts[0] == "runs") {
    const std::int64_t n = parse_index(parts[1]);
    if (parts.size() == 3 && parts[2] == "heatmap") {
      const auto axis = axis_from_string(query_or(query, "axis", "z"));
      if (!axis) throw HttpError{400, "invalid_request", "'axis' must be x, y or z"};
      const std::string mode = query_or(query, "mode", "combined");
      return {200, "image/x-portable-graymap", store_.load_heatmap(id, n, *axis, mode)};
    }
    if (parts.size() == 4 && parts[2] == "outputs") {
      const std::int64_t r = parse_index(parts[3]);
      const ExperimentConfig cfg = store_.load_experiment(id);
      const PackingOutput out = store_.load_output(id, n, r);
      const std::string proxy_text = query_or(query, "proxy", "0");
      const bool proxy = proxy_text == "1" || proxy_text == "true";
      json j = to_json(out);
      // Ingredients are spheres already, so the bounding-sphere proxy is the geometry itself.
      j["proxy"] = proxy;
      j["run_index"] = n;
      j["replicate"] = r;
      j["assignment"] = to_json(out.config_ref.assignment);
      j["recipe"] = to_json(apply_assignment(cfg.recipe, out.config_ref.assignment));
      j["usage"] = usage(out);
      return json_response(j);
    }
  }
  throw HttpError{404, "not_found", "no route for experiment path '" + std::string(rest) + "'"};
}

HttpResponse Service::status(const std::string& id) {
  std::shared_ptr<ActiveRun> run;
  {
    std::lock_guard lock(runs_mutex_);
    const auto it = runs_.find(id);
    if (it != runs_.end() && !it->second->finished) run = it->second;
  }
  ExperimentRecord rec = store_.record(id);
  if (run) {
    rec.status = ExperimentStatus::running;
    rec.completed_jobs = std::max(rec.completed_jobs, run->completed.load());
  }
  return json_response(record_json(rec));
}

HttpResponse Service::start_run(const std::string& id) {
  std::lock_guard lock(runs_mutex_);
  auto& slot = runs_[id];
  if (slot && !slot->finished) throw HttpError{409, "already_running", "experiment " + id + " is already running"};
  if (slot && slot->thread.joinable()) slot->thread.join();

  const ExperimentRecord rec = store_.record(id);
  if (rec.status == ExperimentStatus::done) {
    slot.reset();
    runs_.erase(id);
    return json_response(record_json(rec), 200);
  }

  auto run = std::make_shared<ActiveRun>();
  run->total = rec.total_jobs;
  auto promise = std::make_shared<std::promise<void>>();
  run->done = promise->get_future().share();
  store_.mark_running(id);
  ActiveRun* raw = run.get();
  run->thread = std::thread([this, id, raw, promise] {
    RunnerOptions opts;
    opts.jobs = options_.jobs;
    opts.pack = options_.pack;
    opts.cancel = &raw->cancel;
    opts.on_progress = [raw](std::int64_t d, std::int64_t) { raw->completed = d; };
    try {
      run_experiment(store_, id, opts);
    } catch (...) {
      // run_experiment recorded the failure in the store.
    }
    {
      std::lock_guard lock(results_mutex_);
      results_.erase(id);
    }
    raw->finished = true;
    promise->set_value();
  });
  slot = run;

  ExperimentRecord now = rec;
  now.status = ExperimentStatus::running;
  return json_response(record_json(now), 202);
}

std::shared_ptr<const Service::Results> Service::results(const std::string& id) {
  {
    std::lock_guard lock(results_mutex_);
    const auto it = results_.find(id);
    if (it != results_.end()) return it->second;
  }
  const ExperimentRecord rec = store_.record(id);
  const auto text = store_.load_runs_jsonl(id);
  if (rec.status != ExperimentStatus::done || !text) {
    throw HttpError{409, "not_ready", "experiment " + id + " has no results yet (status " +
                                          std::string(to_string(rec.status)) + ")"};
  }
  auto res = std::make_shared<Results>();
  res->summaries = parse_runs_jsonl(*text);
  res->table = std::make_unique<RunTable>(res->summaries);
  for (std::size_t i = 0; i < res->summaries.size(); ++i) res->by_run[res->summaries[i].run_index] = i;

  std::lock_guard lock(results_mutex_);
  return results_.try_emplace(id, std::move(res)).first->second;
}

HttpResponse Service::serve_static(std::string_view path) const {
  if (options_.static_dir.empty()) throw HttpError{404, "not_found", "no route for " + std::string(path)};
  std::filesystem::path rel;
  for (const auto part : split_path(path)) {
    if (part == ".." || part == ".") throw HttpError{404, "not_found", "no such file"};
    rel /= std::string(part);
  }
  if (rel.empty()) rel = "index.html";
  std::filesystem::path p = options_.static_dir / rel;
  if (std::filesystem::is_directory(p)) p /= "index.html";
  if (!std::filesystem::is_regular_file(p)) throw HttpError{404, "not_found", "no such file"};
  return {200, content_type_for(p), read_file(p)};
}

// ---------------------------------------------------------------- HTTP

struct HttpServer::Impl {
  Service& service;
  httplib::Server server;

  explicit Impl(Service& s) : service(s) {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      std::map<std::string, std::string> query;
      for (const auto& [k, v] : req.params) query.emplace(k, v);
      const HttpResponse out = service.handle(req.method, req.path, query, req.body);
      res.status = out.status;
      res.set_content(out.body, out.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
    server.Put(".*", handler);
    server.Delete(".*", handler);
  }
};

HttpServer::HttpServer(Service& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace packlab
