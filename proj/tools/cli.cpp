#include "cli.hpp"

#include <cmath>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <thread>

#include <CLI11.hpp>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"
#include "packlab/metrics.hpp"
#include "packlab/runner.hpp"
#include "packlab/service.hpp"
#include "packlab/store.hpp"
#include "packlab/xfilter.hpp"

namespace packlab {

namespace fs = std::filesystem;

namespace {

constexpr const char* kFilterHelp = R"(Filters (analyze --filter, repeatable, AND-combined):
  name=[lo,hi]   closed interval on a numeric or integer dimension
  name={a,b}     value set on a categorical dimension
Dimensions are assignment paths (ingredient.<name>.<param>, global.<param>)
and metrics (usage, space_occupancy, placed, runtime, and their
per-ingredient forms such as usage.<ingredient>).
Example: pack analyze --experiment <id> --filter 'usage=[1,1]' --list)";

std::string default_data_dir() {
  const char* env = std::getenv("PACKLAB_DATA");
  return env && *env ? env : "packlab-data";
}

ExperimentConfig read_experiment_file(const std::string& path, const std::string& recipe_path) {
  ExperimentConfig cfg = import_experiment(read_file(path), fs::path(path).parent_path());
  if (!recipe_path.empty()) cfg.recipe = parse_recipe(read_file(recipe_path));
  return cfg;
}

// An experiment argument is a stored id or a path to an experiment document;
// documents are saved (idempotently) and their id returned.
std::string resolve_experiment(Store& store, const std::string& arg, const std::string& recipe_path = {}) {
  if (recipe_path.empty() && store.has_experiment(arg)) return arg;
  if (!fs::exists(arg)) throw NotFound("'" + arg + "' is neither a stored experiment id nor a file");
  return store.save_experiment(read_experiment_file(arg, recipe_path)).id;
}

std::string format_cell(const RunTable& t, std::size_t d, std::size_t row) {
  const double v = t.value(d, row);
  if (std::isnan(v)) return "-";
  if (t.dimensions()[d].kind == ParamKind::categorical) return t.categories(d)[static_cast<std::size_t>(v)];
  if (t.dimensions()[d].kind == ParamKind::integer) return std::to_string(static_cast<std::int64_t>(v));
  return json_util::dump(v);
}

void print_record(std::ostream& out, const ExperimentRecord& rec) {
  out << "experiment " << rec.id << ": " << to_string(rec.status) << ", " << rec.completed_jobs << "/"
      << rec.total_jobs << " jobs (" << rec.config.n_configs << " runs x " << rec.config.r_seeds << " seeds)\n";
}

int serve(Store& store, const std::string& host, int port, int jobs, const std::string& static_dir,
          std::ostream& out, std::ostream& err) {
  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  ServiceOptions opts;
  opts.jobs = jobs;
  opts.static_dir = static_dir;
  Service service(store.root(), opts);
  HttpServer server(service);
  const int bound = server.bind(host, port);
  if (bound < 0) {
    err << "error: cannot bind " << host << ":" << port << "\n";
    return 1;
  }
  out << "serving " << store.root().string() << " on http://" << host << ":" << bound << "\n" << std::flush;
  std::thread listener([&] { server.listen(); });
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  listener.join();
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Parameter-space exploration for stochastic packings", "pack"};
  app.require_subcommand(1);
  app.footer(kFilterHelp);

  std::string data_dir = default_data_dir();
  int jobs = 0;
  app.add_option("--data", data_dir, "Data directory (default: $PACKLAB_DATA or ./packlab-data)");

  std::string experiment, recipe_path, output_path, host = "127.0.0.1", static_dir, hist_dim;
  std::vector<std::string> filters;
  bool list_only = false, as_json = false, wall_clock = false;
  int port = 8080, bins = kDefaultBins;

  auto* setup = app.add_subcommand("setup", "Validate and save a recipe or an experiment");
  setup->add_option("--experiment", experiment, "Experiment document");
  setup->add_option("--recipe", recipe_path, "Recipe document (replaces the experiment's recipe if both are given)");

  auto* run = app.add_subcommand("run", "Execute every job of an experiment, then write metrics and densities");
  run->add_option("--experiment", experiment, "Experiment id or document")->required();
  run->add_option("--recipe", recipe_path, "Recipe document replacing the experiment's recipe");
  run->add_option("--jobs", jobs, "Worker threads (default: logical cores)")->check(CLI::NonNegativeNumber);
  run->add_flag("--wall-clock", wall_clock, "Record measured instead of modeled runtime");

  auto* analyze = app.add_subcommand("analyze", "Print the metrics table or answer a filter query");
  analyze->add_option("--experiment", experiment, "Experiment id or document")->required();
  analyze->add_option("--filter", filters, "Filter expression, see below");
  analyze->add_flag("--list", list_only, "Print matching run indices only");
  analyze->add_option("--histogram", hist_dim, "Print a histogram of this dimension");
  analyze->add_option("--bins", bins, "Histogram bins")->check(CLI::Range(1, 1000));
  analyze->add_flag("--json", as_json, "JSON output");

  auto* exp = app.add_subcommand("export", "Print the canonical experiment document");
  exp->add_option("--experiment", experiment, "Experiment id or document")->required();
  exp->add_option("-o,--output", output_path, "Write to a file instead of stdout");

  auto* srv = app.add_subcommand("serve", "Start the HTTP service");
  srv->add_option("--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  srv->add_option("--host", host, "Bind address");
  srv->add_option("--jobs", jobs, "Worker threads per run")->check(CLI::NonNegativeNumber);
  srv->add_option("--static", static_dir, "UI bundle directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    Store store(data_dir);

    if (setup->parsed()) {
      if (experiment.empty() && recipe_path.empty()) {
        err << "error: setup needs --experiment and/or --recipe\n";
        return 2;
      }
      if (experiment.empty()) {
        const std::string name = store.save_recipe(parse_recipe(read_file(recipe_path)));
        out << "recipe " << name << " saved\n";
        return 0;
      }
      const ExperimentRecord rec = store.save_experiment(read_experiment_file(experiment, recipe_path));
      print_record(out, rec);
      return 0;
    }

    if (run->parsed()) {
      const std::string id = resolve_experiment(store, experiment, recipe_path);
      RunnerOptions opts;
      opts.jobs = jobs;
      if (wall_clock) opts.pack.clock = RuntimeClock::wall;
      const RunnerReport report = run_experiment(store, id, opts);
      print_record(out, store.record(id));
      out << "executed " << report.executed << ", reused " << report.skipped << "\n";
      return 0;
    }

    if (analyze->parsed()) {
      const std::string id = resolve_experiment(store, experiment);
      const auto text = store.load_runs_jsonl(id);
      if (!text) {
        err << "error: experiment " << id << " has no results yet; run it first\n";
        return 1;
      }
      const auto summaries = parse_runs_jsonl(*text);
      const RunTable table(summaries);
      RowGroup row;
      for (const auto& f : filters) {
        auto [name, pred] = parse_filter_expression(f);
        row.filters[name] = std::move(pred);
      }

      if (!hist_dim.empty()) {
        const Histogram h = histogram(table, row, hist_dim, bins);
        if (as_json) {
          out << to_json(h).dump(2) << "\n";
          return 0;
        }
        for (std::size_t b = 0; b < h.full_counts.size(); ++b) {
          if (h.kind == ParamKind::categorical) {
            out << h.categories[b];
          } else {
            out << "[" << json_util::dump(h.edges[b]) << ", " << json_util::dump(h.edges[b + 1])
                << (b + 1 == h.full_counts.size() ? "]" : ")");
          }
          out << "\t" << h.filtered_counts[b] << "/" << h.full_counts[b] << "\n";
        }
        return 0;
      }

      const auto matching = apply_filters(table, row);
      if (list_only) {
        if (as_json) {
          out << nlohmann::json(matching).dump() << "\n";
        } else {
          for (auto n : matching) out << n << "\n";
        }
        return 0;
      }
      if (as_json) {
        auto arr = nlohmann::json::array();
        for (auto n : matching) {
          for (const auto& s : summaries) {
            if (s.run_index == n) arr.push_back(to_json(s));
          }
        }
        out << arr.dump(2) << "\n";
        return 0;
      }
      std::map<std::int64_t, std::size_t> row_of;
      for (std::size_t r = 0; r < table.size(); ++r) row_of[table.run_index(r)] = r;
      out << "run";
      for (const auto& d : table.dimensions()) out << "\t" << d.name;
      out << "\n";
      for (auto n : matching) {
        const std::size_t r = row_of.at(n);
        out << n;
        for (std::size_t d = 0; d < table.dimensions().size(); ++d) out << "\t" << format_cell(table, d, r);
        out << "\n";
      }
      return 0;
    }

    if (exp->parsed()) {
      const std::string doc = store.has_experiment(experiment) ? store.experiment_document(experiment)
                                                               : export_experiment(read_experiment_file(experiment, {}));
      if (output_path.empty()) {
        out << doc;
      } else {
        replace_file_atomic(output_path, doc);
      }
      return 0;
    }

    if (srv->parsed()) return serve(store, host, port, jobs, static_dir, out, err);
  } catch (const ValidationError& e) {
    err << "error: invalid configuration\n";
    for (const auto& v : e.violations()) err << "  - " << v << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace packlab
