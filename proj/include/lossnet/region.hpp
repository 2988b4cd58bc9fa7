#pragma once

#include <map>
#include <vector>

#include "lossnet/model.hpp"

namespace lossnet {

/// Axis-aligned space-time box (x_lo, x_hi) x (t_lo, t_hi).
struct Box {
  double x_lo;
  double x_hi;
  double t_lo;
  double t_hi;

  [[nodiscard]] double area() const { return (x_hi - x_lo) * (t_hi - t_lo); }
  [[nodiscard]] bool empty() const { return !(x_lo < x_hi) || !(t_lo < t_hi); }
};

/// Finite union of boxes that overlap at most on their boundaries.
struct Region {
  std::vector<Box> boxes;

  [[nodiscard]] double area() const;
  [[nodiscard]] bool empty() const { return boxes.empty(); }
};

/// Disjoint-box decomposition of a \ b. Each box of `a` is cut against each
/// box of `b`, first along time and then along space.
Region region_subtract(const Region& a, const Region& b);

/// Area of the intersection of two regions (no assumptions on b's boxes
/// beyond pairwise disjointness).
double intersection_area(const Region& a, const Region& b);

/// Explored part of the half-plane t <= 0 when every explored box reaches up
/// to t = 0. Such a union is the region above a piecewise-constant depth
/// profile, so it is stored as breakpoints x -> depth (depth 0 = unexplored).
class Skyline {
 public:
  Skyline();

  /// Marks (lo, hi) x [bottom, 0] as explored and returns the part of it that
  /// was not explored before, as disjoint boxes.
  Region carve(double lo, double hi, double bottom);

  /// Depth at x (0 if unexplored).
  [[nodiscard]] double depth(double x) const;
  [[nodiscard]] Region to_region() const;
  [[nodiscard]] double area() const { return to_region().area(); }

 private:
  std::map<double, double> steps_;  // key: left end of a segment, value: its depth
};

/// Union of disjoint open intervals on the line.
class IntervalSet {
 public:
  /// Adds (lo, hi) and returns the previously uncovered pieces.
  std::vector<Interval> add(double lo, double hi);
  [[nodiscard]] const std::map<double, double>& pieces() const { return pieces_; }
  [[nodiscard]] double length() const;
  [[nodiscard]] std::vector<Interval> to_vector() const;

 private:
  std::map<double, double> pieces_;  // left -> right
};

}  // namespace lossnet
