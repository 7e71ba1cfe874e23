#pragma once

#include <vector>

namespace packlab {

/// Axis labels from the extended Wilkinson search (Talbot, Lin & Hanrahan):
/// scores simplicity, coverage, density and legibility over steps
/// j * q * 10^z with q from the nice-number list {1, 5, 2, 2.5, 4, 3}.
struct NiceScale {
  double lmin = 0.0;
  double lmax = 1.0;
  double step = 1.0;
  std::vector<double> labels;
};

/// `m` is the target label count. With `only_loose` the labels always
/// cover [dmin, dmax]. A degenerate range yields labels around the value.
NiceScale extended_wilkinson(double dmin, double dmax, int m, bool only_loose = true);

/// Histogram bin edges for about `bins` bins covering [dmin, dmax].
std::vector<double> nice_bin_edges(double dmin, double dmax, int bins);

}  // namespace packlab
