#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "packlab/recipe.hpp"
#include "packlab/vec3.hpp"

namespace packlab {

/// Distance and wrapping rules of a packing volume. Periodic volumes use the
/// minimum-image convention on every active axis.
class Geometry {
 public:
  explicit Geometry(const PackingVolume& volume) noexcept;

  const PackingVolume& volume() const noexcept { return volume_; }
  bool periodic_axis(int axis) const noexcept { return periodic_[static_cast<std::size_t>(axis)]; }

  // b - a, folded to the nearest periodic image.
  Vec3 delta(Vec3 a, Vec3 b) const noexcept {
    Vec3 d = b - a;
    for (int i = 0; i < 3; ++i) {
      if (periodic_[static_cast<std::size_t>(i)]) {
        const double L = volume_.extents[static_cast<std::size_t>(i)];
        d[i] -= L * std::nearbyint(d[i] / L);
      }
    }
    return d;
  }

  double distance(Vec3 a, Vec3 b) const noexcept { return norm(delta(a, b)); }

  // Maps a position into [0, L) on periodic axes; identity otherwise.
  Vec3 wrap(Vec3 p) const noexcept;

  // True iff a sphere at p with radius r lies inside the volume. Periodic
  // volumes waive the check; surface volumes require |p| = R.
  bool contains(Vec3 p, double r) const noexcept;

  // Axis-aligned bounds used by spatial indices.
  std::array<double, 3> lower() const noexcept;
  std::array<double, 3> extent() const noexcept;

 private:
  PackingVolume volume_;
  std::array<bool, 3> periodic_{};
};

/// Uniform bucket grid over a bounded region, periodic per axis as the
/// geometry dictates. Items are opaque ids.
class CellIndex {
 public:
  CellIndex(const Geometry& geometry, double cell_size);

  void insert(std::uint32_t id, Vec3 p);

  // Calls f(id) for every id whose cell intersects the axis-aligned box of
  // half-width r around p. Each id is visited at most once.
  template <typename F>
  void for_each_near(Vec3 p, double r, F&& f) const {
    std::array<std::vector<int>, 3> ranges;
    for (int a = 0; a < 3; ++a) axis_range(a, p[a], r, ranges[static_cast<std::size_t>(a)]);
    for (int i : ranges[0]) {
      for (int j : ranges[1]) {
        for (int k : ranges[2]) {
          for (std::uint32_t id : cells_[flat(i, j, k)]) f(id);
        }
      }
    }
  }

 private:
  void axis_range(int axis, double x, double r, std::vector<int>& out) const;
  int cell_of(int axis, double x) const noexcept;
  std::size_t flat(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(n_[1]) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(n_[2]) +
           static_cast<std::size_t>(k);
  }

  std::array<double, 3> lo_{};
  std::array<double, 3> width_{};
  std::array<int, 3> n_{};
  std::array<bool, 3> periodic_{};
  std::vector<std::vector<std::uint32_t>> cells_;
};

}  // namespace packlab
