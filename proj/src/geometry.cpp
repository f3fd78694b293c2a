#include "hlpp/geometry.hpp"

#include <algorithm>

#include "hlpp/error.hpp"

namespace hlpp::geometry {

namespace {
constexpr double kTol = 1e-9;
constexpr double kEnumerationGuard = 1e5;

bool close_relative(double a, double b) noexcept {
  return std::fabs(a - b) <= kTol * std::max({1.0, std::fabs(a), std::fabs(b)});
}
}  // namespace

Rect::Rect(Point a, Point b) : a_(a), b_(b) {
  if (!strictly_before(a, b)) throw DomainError("rectangle corners must satisfy a < b");
}

double slope(Point a, Point b) {
  if (!strictly_before(a, b)) throw DomainError("slope needs a < b");
  return (b.y - a.y) / (b.x - a.x);
}

bool cyl_contains(const Cylinder& c, Point p) noexcept {
  if (!c.rect.contains(p)) return false;
  const Point a = c.rect.lower();
  const double w = c.rect.width();
  const double h = c.rect.height();
  // |(p.y - a.y) - slope (p.x - a.x)| <= r h, scaled by the width.
  const double deviation = (p.y - a.y) * w - h * (p.x - a.x);
  return std::fabs(deviation) <= c.r * h * w;
}

std::optional<std::pair<std::int64_t, std::int64_t>> cylinder_column(const Cylinder& c,
                                                                     std::int64_t x) noexcept {
  const Point a = c.rect.lower();
  const Point b = c.rect.upper();
  const double xd = static_cast<double>(x);
  if (xd < a.x || xd > b.x) return std::nullopt;
  const double centre = a.y + c.rect.slope() * (xd - a.x);
  const double half = c.r * c.rect.height();
  auto lo = static_cast<std::int64_t>(std::ceil(std::max(a.y, centre - half))) - 1;
  auto hi = static_cast<std::int64_t>(std::floor(std::min(b.y, centre + half))) + 1;
  // The column section is an interval; trim the rounding guard cells exactly.
  while (lo <= hi && !cyl_contains(c, {xd, static_cast<double>(lo)})) ++lo;
  while (hi >= lo && !cyl_contains(c, {xd, static_cast<double>(hi)})) --hi;
  if (lo > hi) return std::nullopt;
  return std::make_pair(lo, hi);
}

std::int64_t lattice_count_in_cyl(const Cylinder& c) {
  if (std::max(c.rect.width(), c.rect.height()) > kEnumerationGuard) {
    throw SizeError("cylinder too large for exact enumeration");
  }
  std::int64_t count = 0;
  const auto x_lo = static_cast<std::int64_t>(std::ceil(c.rect.lower().x));
  const auto x_hi = static_cast<std::int64_t>(std::floor(c.rect.upper().x));
  for (std::int64_t x = x_lo; x <= x_hi; ++x) {
    if (const auto column = cylinder_column(c, x)) count += column->second - column->first + 1;
  }
  return count;
}

bool check_slope_bound(Point a, Point b, Point c, Point d, double r, Point v, Point w) {
  if (!(r > 0.0 && r < 1.0)) throw DomainError("r must lie in (0, 1)");
  if (!strictly_before(a, b) || !strictly_before(b, c) || !strictly_before(c, d)) {
    throw DomainError("corners must satisfy a < b < c < d");
  }
  const double s_ab = slope(a, b);
  const double s_bc = slope(b, c);
  const double s_cd = slope(c, d);
  if (!close_relative(s_ab, s_bc) || !close_relative(s_bc, s_cd)) {
    throw DomainError("the three rectangles must have equal slopes");
  }
  const double tol_x = kTol * std::max(1.0, c.x - b.x);
  const double tol_y = kTol * std::max(1.0, c.y - b.y);
  if (c.x - b.x + tol_x < std::max(b.x - a.x, d.x - c.x) ||
      c.y - b.y + tol_y < std::max(b.y - a.y, d.y - c.y)) {
    throw DomainError("the middle rectangle must be weakly largest");
  }
  if (!cyl_contains({Rect(a, b), r}, v) || !cyl_contains({Rect(c, d), r}, w)) {
    throw DomainError("v and w must lie in the outer cylinders");
  }
  const double ratio = slope(v, w) / s_bc;
  const double bound = 1.0 + 2.0 * r;
  return ratio * bound >= 1.0 - kTol && ratio <= bound * (1.0 + kTol);
}

CancellationGap cancellation_gap(std::span<const double> xs, std::span<const double> ys,
                                 double delta) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw DomainError("cancellation_gap needs two non-empty sequences of equal length");
  }
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  double x = 0.0;
  double y = 0.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    if (!(xs[j] > 0.0) || !(ys[j] > 0.0)) throw DomainError("entries must be positive");
    x += xs[j];
    y += ys[j];
  }
  const double ratio = y / x;
  const double slack = 1e-12;
  CancellationGap gap;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double rj = ys[j] / xs[j];
    if (rj * (1.0 + delta) < ratio * (1.0 - slack) || rj > (1.0 + delta) * ratio * (1.0 + slack)) {
      throw DomainError("ratio constraint violated");
    }
    gap.lhs += std::sqrt(xs[j] * ys[j]);
  }
  gap.rhs = (1.0 - delta * delta) * std::sqrt(x * y);
  return gap;
}

}  // namespace hlpp::geometry
