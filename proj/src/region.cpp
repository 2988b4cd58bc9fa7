#include "lossnet/region.hpp"

#include <algorithm>
#include <iterator>
#include <limits>

namespace lossnet {

double Region::area() const {
  double total = 0.0;
  for (const auto& b : boxes) total += b.area();
  return total;
}

namespace {

void subtract_box(const Box& a, const Box& b, std::vector<Box>& out) {
  const double xl = std::max(a.x_lo, b.x_lo);
  const double xh = std::min(a.x_hi, b.x_hi);
  const double tl = std::max(a.t_lo, b.t_lo);
  const double th = std::min(a.t_hi, b.t_hi);
  if (!(xl < xh) || !(tl < th)) {
    out.push_back(a);
    return;
  }
  // Time slabs below and above the overlap span the full width of a.
  if (a.t_lo < tl) out.push_back({a.x_lo, a.x_hi, a.t_lo, tl});
  if (th < a.t_hi) out.push_back({a.x_lo, a.x_hi, th, a.t_hi});
  // Remaining side pieces within the overlap's time band.
  if (a.x_lo < xl) out.push_back({a.x_lo, xl, tl, th});
  if (xh < a.x_hi) out.push_back({xh, a.x_hi, tl, th});
}

}  // namespace

Region region_subtract(const Region& a, const Region& b) {
  std::vector<Box> current;
  for (const auto& box : a.boxes)
    if (!box.empty()) current.push_back(box);
  std::vector<Box> next;
  for (const auto& cut : b.boxes) {
    if (cut.empty()) continue;
    next.clear();
    for (const auto& box : current) subtract_box(box, cut, next);
    current.swap(next);
  }
  return Region{std::move(current)};
}

double intersection_area(const Region& a, const Region& b) {
  double total = 0.0;
  for (const auto& p : a.boxes)
    for (const auto& q : b.boxes) {
      const double w = std::min(p.x_hi, q.x_hi) - std::max(p.x_lo, q.x_lo);
      const double h = std::min(p.t_hi, q.t_hi) - std::max(p.t_lo, q.t_lo);
      if (w > 0.0 && h > 0.0) total += w * h;
    }
  return total;
}

Skyline::Skyline() { steps_.emplace(-std::numeric_limits<double>::infinity(), 0.0); }

double Skyline::depth(double x) const {
  auto it = std::prev(steps_.upper_bound(x));
  return it->second;
}

Region Skyline::carve(double lo, double hi, double bottom) {
  Region fresh;
  if (!(lo < hi) || !(bottom < 0.0)) return fresh;

  // Split at lo and hi so that the range is a whole number of segments.
  auto split_at = [this](double x) {
    auto it = steps_.upper_bound(x);
    auto prev = std::prev(it);
    if (prev->first != x) steps_.emplace_hint(it, x, prev->second);
  };
  split_at(lo);
  split_at(hi);

  auto it = steps_.find(lo);
  const auto stop = steps_.find(hi);
  while (it != stop) {
    auto next = std::next(it);
    if (bottom < it->second) {
      fresh.boxes.push_back({it->first, next->first, bottom, it->second});
      it->second = bottom;
    }
    it = next;
  }

  // Coalesce equal neighbours around the touched range.
  auto cur = steps_.find(lo);
  if (cur != steps_.begin()) --cur;
  for (auto nxt = std::next(cur); nxt != steps_.end() && nxt->first <= hi; nxt = std::next(cur)) {
    if (nxt->second == cur->second) {
      steps_.erase(nxt);
    } else {
      cur = nxt;
    }
  }
  return fresh;
}

Region Skyline::to_region() const {
  Region r;
  for (auto it = steps_.begin(); it != steps_.end(); ++it) {
    auto next = std::next(it);
    if (next == steps_.end()) break;
    if (it->second < 0.0) r.boxes.push_back({it->first, next->first, it->second, 0.0});
  }
  return r;
}

std::vector<Interval> IntervalSet::add(double lo, double hi) {
  std::vector<Interval> fresh;
  if (!(lo < hi)) return fresh;
  // First piece that could overlap or touch (lo, hi).
  auto it = pieces_.upper_bound(lo);
  if (it != pieces_.begin() && std::prev(it)->second >= lo) --it;
  double cursor = lo;
  double new_lo = lo;
  double new_hi = hi;
  while (it != pieces_.end() && it->first <= hi) {
    if (it->first > cursor) fresh.push_back({cursor, std::min(it->first, hi)});
    cursor = std::max(cursor, it->second);
    new_lo = std::min(new_lo, it->first);
    new_hi = std::max(new_hi, it->second);
    it = pieces_.erase(it);
  }
  if (cursor < hi) fresh.push_back({cursor, hi});
  pieces_.emplace(new_lo, new_hi);
  return fresh;
}

double IntervalSet::length() const {
  double total = 0.0;
  for (const auto& [l, r] : pieces_) total += r - l;
  return total;
}

std::vector<Interval> IntervalSet::to_vector() const {
  std::vector<Interval> out;
  for (const auto& [l, r] : pieces_) out.push_back({l, r});
  return out;
}

}  // namespace lossnet
