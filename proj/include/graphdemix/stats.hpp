#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "graphdemix/core.hpp"

namespace graphdemix {

inline double median(std::vector<double> v) {
  if (v.empty()) throw parameter_error("median: empty sample");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Fractional ranks with ties averaged (1-based).
inline std::vector<double> ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> ord(n);
  for (std::size_t i = 0; i < n; ++i) ord[i] = i;
  std::sort(ord.begin(), ord.end(),
            [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[ord[j + 1]] == v[ord[i]]) ++j;
    const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[ord[k]] = avg;
    i = j + 1;
  }
  return r;
}

/// Spearman rank correlation (Pearson on tie-averaged ranks); NaN when either
/// sample is constant.
inline double spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw parameter_error("spearman: need two samples of equal size >= 2");
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace graphdemix
