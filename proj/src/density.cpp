#include "packlab/density.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

#include "packlab/errors.hpp"
#include "packlab/json_util.hpp"

namespace packlab {

using json_util::json;

const std::vector<double>& DensityVolume::channel(const std::string& name) const {
  if (name == "combined") return combined;
  const auto it = channels.find(name);
  if (it == channels.end()) throw NotFound("no density channel '" + name + "'");
  return it->second;
}

std::array<int, 3> default_dims(const PackingVolume& volume, int n) {
  if (volume.is_surface()) return {n, n, 1};
  if (volume.is_planar()) return {n, n, 1};
  return {n, n, n};
}

namespace {

// Sub-sample coverage bitmaps: one for the union of all instances and one
// per channel, then reduced to per-voxel fractions.
struct Coverage {
  std::array<int, 3> n{};
  std::vector<std::uint8_t> combined;
  std::vector<std::vector<std::uint8_t>> channels;

  std::size_t flat(int i, int j, int k) const noexcept {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(n[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(n[1]) * static_cast<std::size_t>(k));
  }
  void mark(std::size_t idx, std::size_t channel) {
    combined[idx] = 1;
    if (channel < channels.size()) channels[channel][idx] = 1;
  }
};

std::vector<double> reduce(const Coverage& cov, const std::vector<std::uint8_t>& bits, std::array<int, 3> dims,
                           std::array<int, 3> s) {
  std::vector<double> out(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], 0.0);
  const double per_voxel = static_cast<double>(s[0]) * s[1] * s[2];
  for (int k = 0; k < cov.n[2]; ++k) {
    for (int j = 0; j < cov.n[1]; ++j) {
      for (int i = 0; i < cov.n[0]; ++i) {
        if (bits[cov.flat(i, j, k)]) {
          out[static_cast<std::size_t>(i / s[0]) +
              static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j / s[1]) +
                                                   static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k / s[2]))] += 1.0;
        }
      }
    }
  }
  for (double& v : out) v /= per_voxel;
  return out;
}

// Sub-sample index range whose centers (k + 0.5) h fall in [lo, hi].
std::pair<int, int> index_range(double lo, double hi, double h, int n) {
  const int a = std::max(0, static_cast<int>(std::ceil(lo / h - 0.5)));
  const int b = std::min(n - 1, static_cast<int>(std::floor(hi / h - 0.5)));
  return {a, b};
}

void cover_box(Coverage& cov, const PackingOutput& out, const PackingVolume& v, const std::vector<std::string>& names) {
  const int axes = v.active_axes();
  std::array<double, 3> h{};
  for (int a = 0; a < 3; ++a) h[static_cast<std::size_t>(a)] = a < axes ? v.extents[static_cast<std::size_t>(a)] / cov.n[static_cast<std::size_t>(a)] : 0.0;
  auto coord = [&](int a, int k) { return a < axes ? (k + 0.5) * h[static_cast<std::size_t>(a)] : 0.0; };

  for (const auto& inst : out.instances) {
    const auto ch = static_cast<std::size_t>(std::find(names.begin(), names.end(), inst.ingredient) - names.begin());
    const double r = inst.radius;
    const int span = v.periodic ? 1 : 0;
    for (int ox = -span; ox <= span; ++ox) {
      for (int oy = -span; oy <= span; ++oy) {
        for (int oz = (axes == 3 ? -span : 0); oz <= (axes == 3 ? span : 0); ++oz) {
          const Vec3 c{inst.position.x + ox * v.extents[0], inst.position.y + oy * v.extents[1],
                       inst.position.z + oz * v.extents[2]};
          std::array<std::pair<int, int>, 3> range{};
          bool empty = false;
          for (int a = 0; a < 3; ++a) {
            auto& rg = range[static_cast<std::size_t>(a)];
            rg = a < axes ? index_range(c[a] - r, c[a] + r, h[static_cast<std::size_t>(a)], cov.n[static_cast<std::size_t>(a)])
                          : std::pair<int, int>{0, 0};
            empty = empty || rg.first > rg.second;
          }
          if (empty) continue;
          for (int k = range[2].first; k <= range[2].second; ++k) {
            const double dz = coord(2, k) - c.z;
            for (int j = range[1].first; j <= range[1].second; ++j) {
              const double dy = coord(1, j) - c.y;
              for (int i = range[0].first; i <= range[0].second; ++i) {
                const double dx = coord(0, i) - c.x;
                if (dx * dx + dy * dy + dz * dz <= r * r) cov.mark(cov.flat(i, j, k), ch);
              }
            }
          }
        }
      }
    }
  }
}

void cover_surface(Coverage& cov, const PackingOutput& out, const PackingVolume& v, const std::vector<std::string>& names) {
  const double R = v.surface_radius();
  const int nphi = cov.n[0], nz = cov.n[1];
  std::vector<double> cos_phi(static_cast<std::size_t>(nphi)), sin_phi(static_cast<std::size_t>(nphi));
  for (int i = 0; i < nphi; ++i) {
    const double phi = 2.0 * std::numbers::pi * (i + 0.5) / nphi;
    cos_phi[static_cast<std::size_t>(i)] = std::cos(phi);
    sin_phi[static_cast<std::size_t>(i)] = std::sin(phi);
  }
  const double hz = 2.0 * R / nz;
  for (const auto& inst : out.instances) {
    const auto ch = static_cast<std::size_t>(std::find(names.begin(), names.end(), inst.ingredient) - names.begin());
    const double r = inst.radius;
    // Chord distance <= r bounds |dz| by r.
    const auto [j0, j1] = index_range(inst.position.z + R - r, inst.position.z + R + r, hz, nz);
    for (int j = j0; j <= j1; ++j) {
      const double z = -R + (j + 0.5) * hz;
      const double rho = std::sqrt(std::max(0.0, R * R - z * z));
      const double dz = z - inst.position.z;
      for (int i = 0; i < nphi; ++i) {
        const double dx = rho * cos_phi[static_cast<std::size_t>(i)] - inst.position.x;
        const double dy = rho * sin_phi[static_cast<std::size_t>(i)] - inst.position.y;
        if (dx * dx + dy * dy + dz * dz <= r * r) cov.mark(cov.flat(i, j, 0), ch);
      }
    }
  }
}

}  // namespace

DensityVolume voxelize(const PackingOutput& out, const PackingVolume& volume, std::array<int, 3> dims, int subsamples) {
  if (subsamples < 1) throw ValidationError({"density: subsamples must be >= 1"});
  for (int d : dims) {
    if (d < 1) throw ValidationError({"density: voxel dims must be >= 1"});
  }
  DensityVolume vol;
  vol.surface_map = volume.is_surface();
  const bool flat2d = volume.is_planar() || vol.surface_map;
  if (flat2d) dims[2] = 1;
  vol.dims = dims;
  vol.n_outputs_averaged = 1;

  std::array<int, 3> s{subsamples, subsamples, flat2d ? 1 : subsamples};
  Coverage cov;
  for (int a = 0; a < 3; ++a) cov.n[static_cast<std::size_t>(a)] = dims[static_cast<std::size_t>(a)] * s[static_cast<std::size_t>(a)];
  const std::size_t total = static_cast<std::size_t>(cov.n[0]) * cov.n[1] * cov.n[2];
  cov.combined.assign(total, 0);

  std::vector<std::string> names;
  for (const auto& [name, _] : out.requested_counts) names.push_back(name);
  cov.channels.assign(names.size(), std::vector<std::uint8_t>(total, 0));

  if (vol.surface_map) {
    const double R = volume.surface_radius();
    vol.voxel_size = {2.0 * std::numbers::pi / dims[0], 2.0 * R / dims[1], 0.0};
    cover_surface(cov, out, volume, names);
  } else {
    for (int a = 0; a < 3; ++a) {
      vol.voxel_size[static_cast<std::size_t>(a)] = volume.extents[static_cast<std::size_t>(a)] / dims[static_cast<std::size_t>(a)];
    }
    cover_box(cov, out, volume, names);
  }

  vol.combined = reduce(cov, cov.combined, dims, s);
  for (std::size_t c = 0; c < names.size(); ++c) vol.channels[names[c]] = reduce(cov, cov.channels[c], dims, s);
  return vol;
}

DensityVolume average_volumes(std::span<const DensityVolume> vols) {
  if (vols.empty()) throw ShapeMismatch("no volumes to average");
  const DensityVolume& first = vols.front();
  for (const auto& v : vols) {
    bool same = v.dims == first.dims && v.voxel_size == first.voxel_size && v.surface_map == first.surface_map &&
                v.channels.size() == first.channels.size();
    for (auto a = v.channels.begin(), b = first.channels.begin(); same && a != v.channels.end(); ++a, ++b) {
      same = a->first == b->first;
    }
    if (!same) throw ShapeMismatch("density volumes differ in shape or channels");
  }

  // Summing each voxel's values in sorted order makes the mean independent
  // of the order of the inputs.
  std::vector<double> scratch(vols.size());
  auto mean_of = [&](auto&& pick) {
    std::vector<double> out(first.voxel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (std::size_t k = 0; k < vols.size(); ++k) scratch[k] = pick(vols[k])[i];
      std::sort(scratch.begin(), scratch.end());
      double sum = 0.0;
      for (double x : scratch) sum += x;
      out[i] = sum / static_cast<double>(vols.size());
    }
    return out;
  };

  DensityVolume avg;
  avg.dims = first.dims;
  avg.voxel_size = first.voxel_size;
  avg.surface_map = first.surface_map;
  avg.combined = mean_of([](const DensityVolume& v) -> const std::vector<double>& { return v.combined; });
  for (const auto& [name, _] : first.channels) {
    avg.channels[name] = mean_of([&](const DensityVolume& v) -> const std::vector<double>& { return v.channels.at(name); });
  }
  for (const auto& v : vols) avg.n_outputs_averaged += v.n_outputs_averaged;
  return avg;
}

std::string_view to_string(Axis a) noexcept {
  switch (a) {
    case Axis::x: return "x";
    case Axis::y: return "y";
    case Axis::z: return "z";
  }
  return "?";
}

std::optional<Axis> axis_from_string(std::string_view s) noexcept {
  if (s == "x") return Axis::x;
  if (s == "y") return Axis::y;
  if (s == "z") return Axis::z;
  return std::nullopt;
}

double ProjectionImage::max() const noexcept {
  double m = 0.0;
  for (double p : pixels) m = std::max(m, p);
  return m;
}

std::vector<std::uint8_t> ProjectionImage::gray() const {
  const double m = max();
  std::vector<std::uint8_t> g(pixels.size(), 0);
  if (m <= 0.0) return g;
  for (std::size_t i = 0; i < pixels.size(); ++i) g[i] = static_cast<std::uint8_t>(std::lround(255.0 * pixels[i] / m));
  return g;
}

ProjectionImage project(const DensityVolume& vol, Axis axis, const std::string& channel) {
  const auto& values = vol.channel(channel);
  const int along = static_cast<int>(axis);
  const int u = along == 0 ? 1 : 0;
  const int w = along == 2 ? 1 : 2;
  ProjectionImage img;
  img.axis = axis;
  img.width = vol.dims[static_cast<std::size_t>(u)];
  img.height = vol.dims[static_cast<std::size_t>(w)];
  img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0.0);
  const int depth = vol.dims[static_cast<std::size_t>(along)];
  std::array<int, 3> idx{};
  for (int row = 0; row < img.height; ++row) {
    for (int col = 0; col < img.width; ++col) {
      idx[static_cast<std::size_t>(u)] = col;
      idx[static_cast<std::size_t>(w)] = row;
      double sum = 0.0;
      for (int d = 0; d < depth; ++d) {
        idx[static_cast<std::size_t>(along)] = d;
        sum += values[vol.index(idx[0], idx[1], idx[2])];
      }
      img.pixels[static_cast<std::size_t>(row) * img.width + col] = sum / depth;
    }
  }
  return img;
}

std::string to_pgm(const ProjectionImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  const auto g = img.gray();
  for (int row = img.height - 1; row >= 0; --row) {
    const auto* begin = g.data() + static_cast<std::size_t>(row) * img.width;
    out.append(reinterpret_cast<const char*>(begin), static_cast<std::size_t>(img.width));
  }
  return out;
}

json pgm_sidecar(const ProjectionImage& img, const std::string& channel) {
  return {{"axis", to_string(img.axis)},
          {"channel", channel},
          {"width", img.width},
          {"height", img.height},
          {"normalization_max", img.max()}};
}

namespace {

void append_f32le(std::string& out, double v) {
  const auto f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

double read_f32le(const char* p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[b])) << (8 * b);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

}  // namespace

std::string volume_payload(const DensityVolume& vol) {
  std::string out;
  out.reserve(4 * vol.voxel_count() * (1 + vol.channels.size()));
  for (double v : vol.combined) append_f32le(out, v);
  for (const auto& [_, values] : vol.channels) {
    for (double v : values) append_f32le(out, v);
  }
  return out;
}

json volume_header(const DensityVolume& vol) {
  std::vector<std::string> channels{"combined"};
  for (const auto& [name, _] : vol.channels) channels.push_back(name);
  return {{"dims", vol.dims},
          {"voxel_size", vol.voxel_size},
          {"surface_map", vol.surface_map},
          {"channels", channels},
          {"n_outputs_averaged", vol.n_outputs_averaged},
          {"dtype", "float32le"},
          {"order", "x-fastest"}};
}

DensityVolume volume_from_files(const json& header, std::string_view payload) {
  json_util::Reader r(header, "volume");
  r.allow_only({"dims", "voxel_size", "surface_map", "channels", "n_outputs_averaged", "dtype", "order"});
  if (r.string("dtype") != "float32le" || r.string("order") != "x-fastest") {
    throw SchemaViolation("volume: unsupported dtype or order");
  }
  DensityVolume vol;
  const json& dims = r.array("dims");
  const json& size = r.array("voxel_size");
  if (dims.size() != 3 || size.size() != 3) throw SchemaViolation("volume: dims and voxel_size need 3 entries");
  for (std::size_t a = 0; a < 3; ++a) {
    vol.dims[a] = static_cast<int>(json_util::as_integer(dims[a], "volume.dims"));
    if (vol.dims[a] < 1) throw SchemaViolation("volume.dims: entries must be >= 1");
    vol.voxel_size[a] = json_util::as_number(size[a], "volume.voxel_size");
  }
  vol.surface_map = r.boolean_or("surface_map", false);
  vol.n_outputs_averaged = r.integer("n_outputs_averaged");
  const json& channels = r.array("channels");
  const std::size_t n = vol.voxel_count();
  if (payload.size() != 4 * n * channels.size()) throw SchemaViolation("volume: payload size does not match header");
  for (std::size_t c = 0; c < channels.size(); ++c) {
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = read_f32le(payload.data() + 4 * (c * n + i));
    const std::string name = channels[c].get<std::string>();
    if (c == 0) {
      vol.combined = std::move(values);
    } else {
      vol.channels[name] = std::move(values);
    }
  }
  return vol;
}

}  // namespace packlab
