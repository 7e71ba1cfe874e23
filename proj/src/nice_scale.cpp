#include "packlab/nice_scale.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace packlab {

namespace {

constexpr std::array<double, 6> kQ{1, 5, 2, 2.5, 4, 3};
constexpr std::array<double, 4> kW{0.25, 0.2, 0.5, 0.05};
constexpr double kEps = std::numeric_limits<double>::epsilon() * 100;

// Modulo with the sign of the divisor.
double fmod_floor(double a, double b) { return a - std::floor(a / b) * b; }

double simplicity(std::size_t i, int j, double lmin, double lmax, double lstep) {
  const double n = static_cast<double>(kQ.size());
  const double r = fmod_floor(lmin, lstep);
  const double v = ((r < kEps || lstep - r < kEps) && lmin <= 0 && lmax >= 0) ? 1.0 : 0.0;
  return 1.0 - static_cast<double>(i) / (n - 1.0) - j + v;
}

double simplicity_max(std::size_t i, int j) {
  const double n = static_cast<double>(kQ.size());
  return 1.0 - static_cast<double>(i) / (n - 1.0) - j + 1.0;
}

double coverage(double dmin, double dmax, double lmin, double lmax) {
  const double range = dmax - dmin;
  return 1.0 - 0.5 * ((dmax - lmax) * (dmax - lmax) + (dmin - lmin) * (dmin - lmin)) / ((0.1 * range) * (0.1 * range));
}

double coverage_max(double dmin, double dmax, double span) {
  const double range = dmax - dmin;
  if (span <= range) return 1.0;
  const double half = (span - range) / 2.0;
  return 1.0 - 0.5 * (2.0 * half * half) / ((0.1 * range) * (0.1 * range));
}

double density(int k, int m, double dmin, double dmax, double lmin, double lmax) {
  const double r = (k - 1) / (lmax - lmin);
  const double rt = (m - 1) / (std::max(lmax, dmax) - std::min(dmin, lmin));
  return 2.0 - std::max(r / rt, rt / r);
}

double density_max(int k, int m) { return k >= m ? 2.0 - static_cast<double>(k - 1) / (m - 1) : 1.0; }

// Exact decimal label: n * q * 10^z, dividing for negative z so that e.g.
// 3 * 1 / 10 is the double nearest 0.3.
double label(double n, double q, int z) {
  const double nq = n * q;
  return z >= 0 ? nq * std::pow(10.0, z) : nq / std::pow(10.0, -z);
}

}  // namespace

NiceScale extended_wilkinson(double dmin, double dmax, int m, bool only_loose) {
  if (dmin > dmax) std::swap(dmin, dmax);
  m = std::max(m, 2);
  NiceScale out;
  if (!std::isfinite(dmin) || !std::isfinite(dmax)) {
    out.labels = {0.0, 1.0};
    return out;
  }
  if (dmax - dmin < kEps * std::max(1.0, std::abs(dmax))) {
    // Degenerate range: one unit-wide interval around the value.
    const double w = dmin == 0.0 ? 1.0 : std::pow(10.0, std::floor(std::log10(std::abs(dmin))));
    out.lmin = dmin - w / 2;
    out.lmax = dmin + w / 2;
    out.step = w;
    out.labels = {out.lmin, out.lmax};
    return out;
  }

  double best_score = -2.0;
  bool found = false;
  double best_q = 1, best_start = 0;
  int best_j = 1, best_z = 0, best_k = 2;

  for (int j = 1;; ++j) {
    bool stop = false;
    for (std::size_t qi = 0; qi < kQ.size(); ++qi) {
      const double q = kQ[qi];
      const double sm = simplicity_max(qi, j);
      if (kW[0] * sm + kW[1] + kW[2] + kW[3] < best_score) {
        stop = true;
        break;
      }
      for (int k = 2;; ++k) {
        const double dm = density_max(k, m);
        if (kW[0] * sm + kW[1] + kW[2] * dm + kW[3] < best_score) break;
        const double delta = (dmax - dmin) / (k + 1) / j / q;
        for (int z = static_cast<int>(std::ceil(std::log10(delta)));; ++z) {
          const double step = j * q * std::pow(10.0, z);
          const double cm = coverage_max(dmin, dmax, step * (k - 1));
          if (kW[0] * sm + kW[1] * cm + kW[2] * dm + kW[3] < best_score) break;
          const double min_start = std::floor(dmax / step) * j - (k - 1) * j;
          const double max_start = std::ceil(dmin / step) * j;
          for (double start = min_start; start <= max_start; ++start) {
            const double lmin = start * (step / j);
            const double lmax = lmin + step * (k - 1);
            const double s = simplicity(qi, j, lmin, lmax, step);
            const double c = coverage(dmin, dmax, lmin, lmax);
            const double g = density(k, m, dmin, dmax, lmin, lmax);
            const double score = kW[0] * s + kW[1] * c + kW[2] * g + kW[3] * 1.0;
            if (score > best_score && (!only_loose || (lmin <= dmin && lmax >= dmax))) {
              best_score = score;
              found = true;
              best_q = q;
              best_j = j;
              best_z = z;
              best_k = k;
              best_start = start;
            }
          }
        }
      }
    }
    if (stop) break;
  }

  if (!found) {
    out.lmin = dmin;
    out.lmax = dmax;
    out.step = dmax - dmin;
    out.labels = {dmin, dmax};
    return out;
  }
  // Label i is (start + i j) units of q 10^z.
  for (int i = 0; i < best_k; ++i) out.labels.push_back(label(best_start + static_cast<double>(i) * best_j, best_q, best_z));
  out.lmin = out.labels.front();
  out.lmax = out.labels.back();
  out.step = best_j * best_q * std::pow(10.0, best_z);
  return out;
}

std::vector<double> nice_bin_edges(double dmin, double dmax, int bins) {
  return extended_wilkinson(dmin, dmax, std::max(bins, 1) + 1, true).labels;
}

}  // namespace packlab
