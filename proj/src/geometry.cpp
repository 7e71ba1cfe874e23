#include "packlab/geometry.hpp"

#include <algorithm>

namespace packlab {

namespace {
// Keeps the bucket array bounded for very fine cells.
constexpr double kMaxCells = 1 << 21;
}  // namespace

Geometry::Geometry(const PackingVolume& volume) noexcept : volume_(volume) {
  if (volume.periodic && !volume.is_surface()) {
    for (int i = 0; i < volume.active_axes(); ++i) periodic_[static_cast<std::size_t>(i)] = true;
  }
}

Vec3 Geometry::wrap(Vec3 p) const noexcept {
  for (int i = 0; i < 3; ++i) {
    if (!periodic_[static_cast<std::size_t>(i)]) continue;
    const double L = volume_.extents[static_cast<std::size_t>(i)];
    double x = p[i] - L * std::floor(p[i] / L);
    if (x >= L) x -= L;  // floor rounding at the upper edge
    p[i] = x;
  }
  return p;
}

bool Geometry::contains(Vec3 p, double r) const noexcept {
  if (volume_.is_surface()) {
    const double R = volume_.surface_radius();
    return std::abs(norm(p) - R) <= 1e-9 * R;
  }
  for (int i = 0; i < volume_.active_axes(); ++i) {
    if (periodic_[static_cast<std::size_t>(i)]) continue;
    const double L = volume_.extents[static_cast<std::size_t>(i)];
    if (p[i] - r < 0.0 || p[i] + r > L) return false;
  }
  if (volume_.is_planar() && p.z != 0.0) return false;
  return true;
}

std::array<double, 3> Geometry::lower() const noexcept {
  if (volume_.is_surface()) {
    const double R = volume_.surface_radius();
    return {-R, -R, -R};
  }
  return {0.0, 0.0, 0.0};
}

std::array<double, 3> Geometry::extent() const noexcept {
  if (volume_.is_surface()) {
    const double D = 2.0 * volume_.surface_radius();
    return {D, D, D};
  }
  return volume_.extents;
}

CellIndex::CellIndex(const Geometry& geometry, double cell_size) {
  lo_ = geometry.lower();
  const auto ext = geometry.extent();
  double cell = cell_size;
  // Coarsen until the bucket count is bounded.
  for (;;) {
    double total = 1.0;
    for (std::size_t a = 0; a < 3; ++a) total *= std::max(1.0, std::floor(ext[a] / cell));
    if (total <= kMaxCells) break;
    cell *= 1.5;
  }
  for (std::size_t a = 0; a < 3; ++a) {
    periodic_[a] = geometry.periodic_axis(static_cast<int>(a));
    n_[a] = ext[a] > 0.0 ? std::max(1, static_cast<int>(std::floor(ext[a] / cell))) : 1;
    width_[a] = ext[a] > 0.0 ? ext[a] / n_[a] : 1.0;
  }
  cells_.resize(static_cast<std::size_t>(n_[0]) * static_cast<std::size_t>(n_[1]) * static_cast<std::size_t>(n_[2]));
}

int CellIndex::cell_of(int axis, double x) const noexcept {
  const auto a = static_cast<std::size_t>(axis);
  const double c = std::floor((x - lo_[a]) / width_[a]);
  if (periodic_[a]) {
    const auto n = static_cast<long long>(n_[a]);
    long long i = static_cast<long long>(c) % n;
    if (i < 0) i += n;
    return static_cast<int>(i);
  }
  return static_cast<int>(std::clamp(c, 0.0, static_cast<double>(n_[a] - 1)));
}

void CellIndex::insert(std::uint32_t id, Vec3 p) {
  cells_[flat(cell_of(0, p.x), cell_of(1, p.y), cell_of(2, p.z))].push_back(id);
}

void CellIndex::axis_range(int axis, double x, double r, std::vector<int>& out) const {
  const auto a = static_cast<std::size_t>(axis);
  const int n = n_[a];
  out.clear();
  const double first = std::floor((x - r - lo_[a]) / width_[a]);
  const double last = std::floor((x + r - lo_[a]) / width_[a]);
  if (periodic_[a]) {
    if (last - first + 1 >= n) {
      for (int i = 0; i < n; ++i) out.push_back(i);
      return;
    }
    for (double c = first; c <= last; c += 1.0) {
      long long i = static_cast<long long>(c) % n;
      if (i < 0) i += n;
      out.push_back(static_cast<int>(i));
    }
    return;
  }
  const int lo = static_cast<int>(std::clamp(first, 0.0, static_cast<double>(n - 1)));
  const int hi = static_cast<int>(std::clamp(last, 0.0, static_cast<double>(n - 1)));
  for (int i = lo; i <= hi; ++i) out.push_back(i);
}

}  // namespace packlab
