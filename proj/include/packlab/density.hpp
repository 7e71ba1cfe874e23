#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "packlab/engine.hpp"
#include "packlab/recipe.hpp"

namespace packlab {

/// Per-voxel covered fraction. Values are stored x-fastest:
/// index = x + dims[0] * (y + dims[1] * z).
///
/// Box and plane volumes are voxelized directly (plane: dims[2] = 1). For
/// sphere surfaces the grid is an equal-area map instead: dims[0] longitude
/// sectors by dims[1] bands of equal height in z, dims[2] = 1.
struct DensityVolume {
  std::array<int, 3> dims{1, 1, 1};
  std::array<double, 3> voxel_size{1, 1, 1};
  bool surface_map = false;
  std::vector<double> combined;
  std::map<std::string, std::vector<double>> channels;  // per ingredient
  std::int64_t n_outputs_averaged = 0;

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(dims[2]);
  }
  std::size_t index(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(y) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(z));
  }
  // "combined" or an ingredient name; throws NotFound otherwise.
  const std::vector<double>& channel(const std::string& name) const;

  friend bool operator==(const DensityVolume&, const DensityVolume&) = default;
};

inline constexpr int kDefaultSubsamples = 4;
inline constexpr int kDefaultVoxels = 32;

/// Default grid for a volume: n per active axis (plane: z = 1), or an
/// n x n equal-area map for sphere surfaces.
std::array<int, 3> default_dims(const PackingVolume& volume, int n = kDefaultVoxels);

/// Covered fraction of each voxel, estimated on an s^3 (plane and surface:
/// s^2) regular sub-sample lattice. Periodic volumes also test boundary
/// images so protruding mass reappears on the opposite side. One channel
/// per requested ingredient, plus the combined union.
DensityVolume voxelize(const PackingOutput& out, const PackingVolume& volume, std::array<int, 3> dims,
                       int subsamples = kDefaultSubsamples);

/// Per-voxel mean. Throws ShapeMismatch unless dims, voxel sizes and
/// channels agree. The result does not depend on input order.
DensityVolume average_volumes(std::span<const DensityVolume> vols);

enum class Axis { x, y, z };
std::string_view to_string(Axis a) noexcept;
std::optional<Axis> axis_from_string(std::string_view s) noexcept;

/// Mean along an axis. Pixels are stored row-major, `width` = first
/// remaining axis, `height` = second; row 0 is the low end of the second axis.
struct ProjectionImage {
  Axis axis = Axis::z;
  int width = 0;
  int height = 0;
  std::vector<double> pixels;  // before normalization

  double max() const noexcept;
  // Linear gray: 0 -> 0, max pixel -> 255.
  std::vector<std::uint8_t> gray() const;
};

ProjectionImage project(const DensityVolume& vol, Axis axis, const std::string& channel = "combined");

/// Binary PGM (P5); rows written top-down with the high end of the second axis first.
std::string to_pgm(const ProjectionImage& img);
nlohmann::json pgm_sidecar(const ProjectionImage& img, const std::string& channel);

/// Little-endian float32 payload (combined, then channels in name order)
/// and its JSON header.
std::string volume_payload(const DensityVolume& vol);
nlohmann::json volume_header(const DensityVolume& vol);
DensityVolume volume_from_files(const nlohmann::json& header, std::string_view payload);

}  // namespace packlab
