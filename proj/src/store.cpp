#include "packlab/store.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"

namespace packlab {

namespace fs = std::filesystem;
using json_util::json;

std::string_view to_string(ExperimentStatus s) noexcept {
  switch (s) {
    case ExperimentStatus::created: return "created";
    case ExperimentStatus::running: return "running";
    case ExperimentStatus::done: return "done";
    case ExperimentStatus::failed: return "failed";
  }
  return "?";
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

namespace {

std::atomic<std::uint64_t> g_temp_counter{0};

fs::path temp_name(const fs::path& path) {
  return path.string() + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(g_temp_counter.fetch_add(1));
}

void write_temp(const fs::path& tmp, std::string_view bytes) {
  std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + tmp.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("error writing " + tmp.string());
}

void ensure_parent(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
}

bool is_experiment_id(std::string_view id) {
  return id.size() == 16 && std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

void replace_file_atomic(const fs::path& path, std::string_view bytes) {
  ensure_parent(path);
  const fs::path tmp = temp_name(path);
  write_temp(tmp, bytes);
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move " + tmp.string() + " into place");
  }
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (fs::exists(path)) {
    if (read_file(path) == bytes) return;
    throw ConflictError(path.string() + " already exists with different content");
  }
  ensure_parent(path);
  const fs::path tmp = temp_name(path);
  write_temp(tmp, bytes);
  // A hard link fails if the target appeared meanwhile, so a racing writer
  // with different bytes is detected instead of silently overwritten.
  std::error_code ec;
  fs::create_hard_link(tmp, path, ec);
  std::error_code ignore;
  if (!ec) {
    fs::remove(tmp, ignore);
    return;
  }
  fs::remove(tmp, ignore);
  if (fs::exists(path)) {
    if (read_file(path) == bytes) return;
    throw ConflictError(path.string() + " already exists with different content");
  }
  throw IoError("cannot create " + path.string() + ": " + ec.message());
}

Store::Store(fs::path root) : root_(std::move(root)) {}

fs::path Store::experiment_dir(std::string_view id) const {
  if (!is_experiment_id(id)) throw NotFound("unknown experiment '" + std::string(id) + "'");
  return root_ / "experiments" / std::string(id);
}

// ---------------------------------------------------------------- recipes

std::string Store::save_recipe(const Recipe& r) {
  if (const auto v = validate_recipe(r); !v.empty()) throw ValidationError(v);
  write_file_atomic(root_ / "recipes" / (r.name + ".json"), pretty(to_json(r)));
  return r.name;
}

std::vector<std::string> Store::list_recipes() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root_ / "recipes", ec)) {
    if (e.path().extension() == ".json") out.push_back(e.path().stem().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

Recipe Store::load_recipe(std::string_view name) const {
  if (!is_valid_identifier(name)) throw NotFound("unknown recipe '" + std::string(name) + "'");
  const fs::path p = root_ / "recipes" / (std::string(name) + ".json");
  if (!fs::exists(p)) throw NotFound("unknown recipe '" + std::string(name) + "'");
  return parse_recipe(read_file(p));
}

// ---------------------------------------------------------------- experiments

ExperimentRecord Store::save_experiment(const ExperimentConfig& cfg) {
  const std::string doc = export_experiment(cfg);  // validates
  const std::string id = experiment_id(cfg);
  const fs::path dir = experiment_dir(id);
  write_file_atomic(dir / "recipe.json", pretty(to_json(cfg.recipe)));
  write_file_atomic(dir / "experiment.json", doc);
  return record(id);
}

std::vector<std::string> Store::list_experiments() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root_ / "experiments", ec)) {
    const std::string name = e.path().filename().string();
    if (is_experiment_id(name) && fs::exists(e.path() / "experiment.json")) out.push_back(name);
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool Store::has_experiment(std::string_view id) const {
  return is_experiment_id(id) && fs::exists(experiment_dir(id) / "experiment.json");
}

std::string Store::experiment_document(std::string_view id) const {
  if (!has_experiment(id)) throw NotFound("unknown experiment '" + std::string(id) + "'");
  return read_file(experiment_dir(id) / "experiment.json");
}

ExperimentConfig Store::load_experiment(std::string_view id) const {
  const fs::path dir = experiment_dir(id);
  return import_experiment(experiment_document(id), dir);
}

ExperimentRecord Store::record(std::string_view id) const {
  ExperimentRecord rec;
  rec.id = std::string(id);
  rec.config = load_experiment(id);
  rec.total_jobs = rec.config.total_jobs();
  rec.completed_jobs = count_outputs(id);
  const fs::path dir = experiment_dir(id);
  if (fs::exists(dir / ".failed")) {
    rec.status = ExperimentStatus::failed;
    rec.message = read_file(dir / ".failed");
  } else if (fs::exists(dir / "runs.jsonl") && rec.completed_jobs == rec.total_jobs) {
    rec.status = ExperimentStatus::done;
  } else if (fs::exists(dir / ".running") || rec.completed_jobs > 0) {
    rec.status = ExperimentStatus::running;
  }
  return rec;
}

// ---------------------------------------------------------------- outputs

fs::path Store::output_path(std::string_view id, std::int64_t run, std::int64_t replicate) const {
  return experiment_dir(id) / "runs" / ("run_" + std::to_string(run)) / ("output_" + std::to_string(replicate) + ".json");
}

void Store::save_output(std::string_view id, std::int64_t run, std::int64_t replicate, const PackingOutput& out) {
  if (!has_experiment(id)) throw NotFound("unknown experiment '" + std::string(id) + "'");
  write_file_atomic(output_path(id, run, replicate), json_util::dump(to_json(out)) + "\n");
}

bool Store::has_output(std::string_view id, std::int64_t run, std::int64_t replicate) const {
  return fs::exists(output_path(id, run, replicate));
}

PackingOutput Store::load_output(std::string_view id, std::int64_t run, std::int64_t replicate) const {
  if (run < 0 || replicate < 0) throw NotFound("no such output");
  const fs::path p = output_path(id, run, replicate);
  if (!fs::exists(p)) {
    throw NotFound("no output for run " + std::to_string(run) + ", seed " + std::to_string(replicate));
  }
  return packing_output_from_json(json_util::parse(read_file(p)));
}

std::int64_t Store::count_outputs(std::string_view id) const {
  std::int64_t n = 0;
  std::error_code ec;
  for (const auto& run : fs::directory_iterator(experiment_dir(id) / "runs", ec)) {
    std::error_code ec2;
    for (const auto& f : fs::directory_iterator(run.path(), ec2)) {
      const std::string name = f.path().filename().string();
      if (name.rfind("output_", 0) == 0 && f.path().extension() == ".json") ++n;
    }
  }
  return n;
}

void Store::save_runs_jsonl(std::string_view id, const std::string& text) {
  write_file_atomic(experiment_dir(id) / "runs.jsonl", text);
}

std::optional<std::string> Store::load_runs_jsonl(std::string_view id) const {
  const fs::path p = experiment_dir(id) / "runs.jsonl";
  if (!fs::exists(p)) return std::nullopt;
  return read_file(p);
}

// ---------------------------------------------------------------- density

fs::path Store::density_dir(std::string_view id, std::int64_t run) const {
  return experiment_dir(id) / "density" / ("run_" + std::to_string(run));
}

void Store::save_density(std::string_view id, std::int64_t run, const DensityVolume& vol) {
  const fs::path dir = density_dir(id, run);
  write_file_atomic(dir / "volume.bin", volume_payload(vol));
  write_file_atomic(dir / "volume.json", pretty(volume_header(vol)));
  std::vector<std::string> channels{"combined"};
  for (const auto& [name, _] : vol.channels) channels.push_back(name);
  for (Axis axis : {Axis::x, Axis::y, Axis::z}) {
    for (const auto& ch : channels) {
      const ProjectionImage img = project(vol, axis, ch);
      std::string stem = "proj_" + std::string(to_string(axis));
      if (ch != "combined") stem += "." + ch;
      write_file_atomic(dir / (stem + ".pgm"), to_pgm(img));
      write_file_atomic(dir / (stem + ".json"), pretty(pgm_sidecar(img, ch)));
    }
  }
}

bool Store::has_density(std::string_view id, std::int64_t run) const {
  return fs::exists(density_dir(id, run) / "volume.json");
}

std::string Store::load_heatmap(std::string_view id, std::int64_t run, Axis axis, std::string_view channel) const {
  if (channel != "combined" && !is_valid_identifier(channel)) throw NotFound("unknown channel");
  std::string stem = "proj_" + std::string(to_string(axis));
  if (channel != "combined") stem += "." + std::string(channel);
  const fs::path p = density_dir(id, run) / (stem + ".pgm");
  if (!fs::exists(p)) throw NotFound("no heatmap for run " + std::to_string(run) + " channel '" + std::string(channel) + "'");
  return read_file(p);
}

DensityVolume Store::load_density(std::string_view id, std::int64_t run) const {
  const fs::path dir = density_dir(id, run);
  if (!fs::exists(dir / "volume.json")) throw NotFound("no density for run " + std::to_string(run));
  return volume_from_files(json_util::parse(read_file(dir / "volume.json")), read_file(dir / "volume.bin"));
}

// ---------------------------------------------------------------- markers

void Store::mark_running(std::string_view id) {
  const fs::path dir = experiment_dir(id);
  std::error_code ec;
  fs::remove(dir / ".failed", ec);
  replace_file_atomic(dir / ".running", "");
}

void Store::mark_failed(std::string_view id, const std::string& message) {
  const fs::path dir = experiment_dir(id);
  std::error_code ec;
  fs::remove(dir / ".running", ec);
  replace_file_atomic(dir / ".failed", message);
}

void Store::clear_markers(std::string_view id) {
  const fs::path dir = experiment_dir(id);
  std::error_code ec;
  fs::remove(dir / ".running", ec);
  fs::remove(dir / ".failed", ec);
}

}  // namespace packlab
