#pragma once

// Plane geometry of rectangles, slopes and diagonal cylinders.
//
// Cyl_r(Rect(a, b)) is the set of points p of the rectangle whose vertical
// deviation from the corner-to-corner diagonal, measured from corner a, is at
// most r times the rectangle's height. It is a convex hexagon of area
// (2 - r) r |R|.

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>

namespace hlpp::geometry {

struct Point {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Point&) const = default;
};

// Coordinate-wise strict order a < b.
constexpr bool strictly_before(Point a, Point b) noexcept { return a.x < b.x && a.y < b.y; }
constexpr bool weakly_before(Point a, Point b) noexcept { return a.x <= b.x && a.y <= b.y; }

class Rect {
 public:
  // Throws DomainError unless a < b coordinate-wise.
  Rect(Point a, Point b);

  Point lower() const noexcept { return a_; }
  Point upper() const noexcept { return b_; }
  double width() const noexcept { return b_.x - a_.x; }
  double height() const noexcept { return b_.y - a_.y; }
  double area() const noexcept { return width() * height(); }
  double slope() const noexcept { return height() / width(); }
  bool contains(Point p) const noexcept {
    return a_.x <= p.x && p.x <= b_.x && a_.y <= p.y && p.y <= b_.y;
  }

 private:
  Point a_;
  Point b_;
};

struct Cylinder {
  Rect rect;
  double r;  // width fraction in (0, 1)

  double area() const noexcept { return (2.0 - r) * r * rect.area(); }
};

// Slope of the segment from a to b; DomainError unless a < b.
double slope(Point a, Point b);

bool cyl_contains(const Cylinder& c, Point p) noexcept;

// Integer points of the cylinder that share the column x, as a closed range.
// Returns nullopt when the column misses the cylinder.
std::optional<std::pair<std::int64_t, std::int64_t>> cylinder_column(const Cylinder& c,
                                                                     std::int64_t x) noexcept;

// Exact number of lattice points in the cylinder. Refuses (SizeError) when the
// rectangle's larger side exceeds 1e5.
std::int64_t lattice_count_in_cyl(const Cylinder& c);

// Visits lattice points of the cylinder in lexicographic (x, then y) order
// until `visit` returns true. Returns the point that stopped the scan.
template <class Visit>
std::optional<std::pair<std::int64_t, std::int64_t>> scan_cylinder(const Cylinder& c,
                                                                   Visit&& visit) {
  const auto x_lo = static_cast<std::int64_t>(std::ceil(c.rect.lower().x));
  const auto x_hi = static_cast<std::int64_t>(std::floor(c.rect.upper().x));
  for (std::int64_t x = x_lo; x <= x_hi; ++x) {
    const auto column = cylinder_column(c, x);
    if (!column) continue;
    for (std::int64_t y = column->first; y <= column->second; ++y) {
      if (visit(x, y)) return std::make_pair(x, y);
    }
  }
  return std::nullopt;
}

// Worst-case slope bound for points in the cylinders of the outer rectangles of
// three similar, consecutive rectangles Rect(a,b), Rect(b,c), Rect(c,d) whose
// middle one is weakly largest. Returns whether
//   1/(1+2r) <= Slope(v,w)/Slope(b,c) <= 1+2r.
// Violated hypotheses throw DomainError, so a false return is a genuine failure.
bool check_slope_bound(Point a, Point b, Point c, Point d, double r, Point v, Point w);

struct CancellationGap {
  double lhs = 0.0;  // sum_j sqrt(x_j y_j)
  double rhs = 0.0;  // (1 - delta^2) sqrt(x y)
};

// Requires every ratio y_j/x_j within a factor (1 + delta) of y/x, where x and y
// are the totals; throws DomainError otherwise.
CancellationGap cancellation_gap(std::span<const double> xs, std::span<const double> ys,
                                 double delta);

}  // namespace hlpp::geometry
