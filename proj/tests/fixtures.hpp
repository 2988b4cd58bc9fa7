#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "lossnet/model.hpp"

namespace fixture {

inline lossnet::Rect rect(double xi, double u, double birth, double death, std::int64_t id = 0) {
  lossnet::Rect r;
  r.id = id;
  r.xi = xi;
  r.u = u;
  r.birth = birth;
  r.death = death;
  return r;
}

/// Brute-force pointwise coverage: counts open intervals over every midpoint of
/// the sorted endpoint arrangement.
inline int brute_max_coverage(const std::vector<lossnet::Interval>& calls) {
  std::vector<double> pts;
  for (const auto& c : calls) {
    pts.push_back(c.left);
    pts.push_back(c.right);
  }
  std::sort(pts.begin(), pts.end());
  int best = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    if (!(pts[i] < pts[i + 1])) continue;
    const double y = 0.5 * (pts[i] + pts[i + 1]);
    int n = 0;
    for (const auto& c : calls)
      if (c.left < y && y < c.right) ++n;
    best = std::max(best, n);
  }
  return best;
}

/// Coverage among cylinders alive at time t.
inline int brute_max_coverage_at(const std::vector<lossnet::Rect>& rects, double t) {
  std::vector<lossnet::Interval> calls;
  for (const auto& r : rects)
    if (r.birth <= t && t <= r.death) calls.push_back({r.xi, r.xi + r.u});
  return brute_max_coverage(calls);
}

}  // namespace fixture
