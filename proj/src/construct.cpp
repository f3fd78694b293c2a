#include "hlpp/construct.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "hlpp/error.hpp"
#include "hlpp/format.hpp"
#include "hlpp/geometry.hpp"

namespace hlpp {

namespace {

constexpr double kSlack = 1e-9;

bool strictly_before(const Site& a, const Site& b) { return a[0] < b[0] && a[1] < b[1]; }

}  // namespace

MultiScaleParams heavy_params(std::int64_t n, std::optional<ScaleOverride> override) {
  if (n < 4) throw DomainError("multi-scale parameters need n >= 4");
  const double log_n = std::log2(static_cast<double>(n));
  const double loglog_n = std::log2(log_n);
  MultiScaleParams p;
  p.lambda = std::pow(log_n, 0.25);
  p.rho = std::sqrt(loglog_n);
  if (override) {
    if (override->s < 1) throw DomainError("s must be at least 1");
    if (override->M < 0) throw DomainError("M must be non-negative");
    if (static_cast<double>(override->M) * override->s > log_n - 2.0) {
      throw InfeasibleError("M*s = " + std::to_string(override->M * override->s) +
                            " exceeds log2 n - 2 = " + format_double(log_n - 2.0));
    }
    p.s = override->s;
    p.M = override->M;
    p.source = ParamSource::DeskOverride;
  } else {
    p.s = static_cast<int>(std::lround(100.0 * loglog_n));
    p.M = static_cast<int>(std::floor(log_n / (10.0 * p.s)));
    p.source = ParamSource::PaperAsymptotic;
  }
  p.degenerate = p.M == 0;
  return p;
}

ScaleOverride desk_preset(std::int64_t n) {
  if (n < 4) throw DomainError("desk preset needs n >= 4");
  return {2, std::max(1, floor_log2(n) / 4)};
}

DirectedPath leftmost_completion(const std::vector<Site>& ordered, std::int64_t extent) {
  if (ordered.empty() || ordered.front()[0] != 0 || ordered.front()[1] != 0 ||
      ordered.back()[0] != extent - 1 || ordered.back()[1] != extent - 1) {
    throw DomainError("completion needs the origin and the far corner as endpoints");
  }
  DirectedPath path;
  path.dim = 2;
  path.vertices.reserve(static_cast<std::size_t>(2 * extent - 1));
  path.vertices.push_back({0, 0, 0});
  for (std::size_t t = 1; t < ordered.size(); ++t) {
    const Site& u = ordered[t - 1];
    const Site& v = ordered[t];
    if (v[0] < u[0] || v[1] < u[1]) throw DomainError("completion vertices are not ordered");
    for (std::int64_t y = u[1] + 1; y <= v[1]; ++y) path.vertices.push_back({u[0], y, 0});
    for (std::int64_t x = u[0] + 1; x <= v[0]; ++x) path.vertices.push_back({x, v[1], 0});
  }
  return path;
}

HeavyConstruction build_heavy_path(const WeightField& field, const MultiScaleParams& params) {
  const auto& spec = field.spec();
  if (spec.kind != EnvKind::IidPareto2 && spec.kind != EnvKind::IidLogCorrected) {
    throw UnsupportedError("the multi-scale construction needs an i.i.d. field");
  }
  if (spec.d != 1) throw UnsupportedError("the multi-scale construction is implemented for d = 1");
  if (spec.n < 4) throw DomainError("the multi-scale construction needs n >= 4");
  if (params.M < 1) {
    throw DegenerateError("degenerate: M=0, so no level is built; override s and M");
  }
  const double r = params.r();
  if (!(r > 0.0 && r < 1.0)) throw InfeasibleError("cylinder width rho/lambda^2 must lie in (0, 1)");

  const std::int64_t n = spec.n;
  const double nd = static_cast<double>(n);
  HeavyConstruction out;
  LevelSets& ls = out.levels;
  ls.n = n;
  ls.vertices.push_back({{0, 0, 0}, {n, n, 0}});
  ls.rects.push_back({LevelRect{{0, 0, 0}, {n, n, 0}, -1, 0}});

  for (int level = 0; level < params.M; ++level) {
    const int k = (level + 1) * params.s;
    const double lo = std::ldexp(nd, -k);
    const double hi = std::ldexp(nd, 1 - k);
    const double scale_factor = std::ldexp(1.0, k) / (params.lambda * nd);
    auto& rects = ls.rects.back();
    std::vector<Site> next;
    std::vector<LevelRect> next_rects;
    std::int64_t scanned = 0;
    std::int64_t hits = 0;
    bool any_positive = false;
    next.push_back(rects.front().lower);

    for (std::size_t i = 0; i < rects.size(); ++i) {
      LevelRect& rect = rects[i];
      const double w = static_cast<double>(rect.upper[0] - rect.lower[0]);
      const double h = static_cast<double>(rect.upper[1] - rect.lower[1]);
      const auto m = static_cast<std::int64_t>(std::floor(scale_factor * std::sqrt(w * h)));
      rect.m = m;
      if (m > 0) any_positive = true;
      const std::size_t first_child = next.size() - 1;
      for (std::int64_t j = 1; j <= m / 2 - 1; ++j) {
        const std::int64_t idx = 2 * j + 1;
        const double t0 = static_cast<double>(idx - 1) / static_cast<double>(m);
        const double t1 = static_cast<double>(idx) / static_cast<double>(m);
        const geometry::Point a{rect.lower[0] + t0 * w, rect.lower[1] + t0 * h};
        const geometry::Point b{rect.lower[0] + t1 * w, rect.lower[1] + t1 * h};
        const geometry::Cylinder cyl{geometry::Rect(a, b), r};
        ++scanned;
        const auto found = geometry::scan_cylinder(cyl, [&](std::int64_t x, std::int64_t y) {
          const double v = field(x, y);
          return lo < v && v <= hi;
        });
        if (!found) continue;
        ++hits;
        const Site v{found->first, found->second, 0};
        if (!strictly_before(next.back(), v)) {
          throw InternalError("selected vertices are not strictly ordered");
        }
        next.push_back(v);
      }
      if (!strictly_before(next.back(), rect.upper)) {
        throw InternalError("selected vertices are not strictly ordered");
      }
      next.push_back(rect.upper);
      for (std::size_t t = first_child; t + 1 < next.size(); ++t) {
        next_rects.push_back(LevelRect{next[t], next[t + 1], static_cast<std::int64_t>(i), 0});
      }
    }
    if (!any_positive) {
      throw DegenerateError("degenerate: m=0 for every rectangle at level " +
                            std::to_string(level));
    }
    ls.scanned.push_back(scanned);
    ls.hit.push_back(hits);
    ls.vertices.push_back(std::move(next));
    ls.rects.push_back(std::move(next_rects));
  }
  out.path = leftmost_completion(ls.vertices.back(), n + 1);
  return out;
}

bool AprioriReport::all_ok() const noexcept {
  return std::all_of(checks.begin(), checks.end(),
                     [](const AprioriCheck& c) { return c.area && c.slope_step && c.slope_iterated; });
}

AprioriReport verify_apriori(const LevelSets& levels, const MultiScaleParams& params) {
  AprioriReport report;
  const double n = static_cast<double>(levels.n);
  const double q = 1.0 + 2.0 * params.r();
  auto within = [](double value, double bound) {
    return value <= bound * (1.0 + kSlack) && value * bound >= 1.0 - kSlack;
  };
  for (std::size_t level = 0; level < levels.rects.size(); ++level) {
    const auto& rects = levels.rects[level];
    const int l = static_cast<int>(level);
    const double area_bound =
        level == 0 ? n * n
                   : params.lambda * params.lambda * n * n * std::ldexp(1.0, -2 * l * params.s);
    for (std::size_t i = 0; i < rects.size(); ++i) {
      const auto& rect = rects[i];
      const double w = static_cast<double>(rect.upper[0] - rect.lower[0]);
      const double h = static_cast<double>(rect.upper[1] - rect.lower[1]);
      AprioriCheck c;
      c.level = l;
      c.index = i;
      c.area = w * h >= area_bound * (1.0 - kSlack);
      const double slope = h / w;
      if (level == 0) {
        c.slope_step = within(slope, 1.0);
      } else {
        const auto& parent = levels.rects[level - 1][static_cast<std::size_t>(rect.parent)];
        const double ps = static_cast<double>(parent.upper[1] - parent.lower[1]) /
                          static_cast<double>(parent.upper[0] - parent.lower[0]);
        c.slope_step = within(slope / ps, q);
      }
      c.slope_iterated = within(slope, std::pow(q, l));
      report.checks.push_back(c);
    }
  }
  return report;
}

std::vector<LevelHitStats> cylinder_hit_stats(const LevelSets& levels) {
  std::vector<LevelHitStats> out;
  for (std::size_t t = 0; t < levels.scanned.size(); ++t) {
    LevelHitStats s;
    s.level = static_cast<int>(t) + 1;
    s.scanned = levels.scanned[t];
    s.hit = levels.hit[t];
    if (s.scanned > 0) s.fraction = static_cast<double>(s.hit) / static_cast<double>(s.scanned);
    out.push_back(s);
  }
  return out;
}

std::vector<LevelHitStats> cylinder_hit_stats(const WeightField& field,
                                              const MultiScaleParams& params) {
  return cylinder_hit_stats(build_heavy_path(field, params).levels);
}

double skeleton_sum_sd(std::int64_t box_side, int s) noexcept {
  return static_cast<double>(2 * box_side - 1) * std::sqrt(std::ldexp(1.0, s) - 1.0);
}

BrwConstruction build_brw_path(const WeightField& field, int s) {
  const auto& spec = field.spec();
  if (spec.kind != EnvKind::Brw || field.custom()) {
    throw UnsupportedError("the skeleton construction needs a generated brw field");
  }
  if (spec.d != 1) throw UnsupportedError("the skeleton construction is implemented for d = 1");
  if (s < 1) throw DomainError("s must be at least 1");
  const int log_n = floor_log2(spec.n);
  if (s > log_n) {
    throw DegenerateError("degenerate: s=" + std::to_string(s) + " exceeds log2 n=" +
                          std::to_string(log_n));
  }
  const std::int64_t n = spec.n;
  BrwConstruction out;
  out.s = s;
  out.M = log_n / s;
  const std::int64_t boxes = std::int64_t{1} << s;

  std::vector<Site> squares{{0, 0, 0}};
  std::vector<Site> points{{0, 0, 0}, {n - 1, n - 1, 0}};
  out.squares_per_level.push_back(1);
  for (int level = 0; level < out.M; ++level) {
    const std::int64_t side = n >> (level * s);
    const std::int64_t b = side >> s;
    const int box_level = (level + 1) * s;
    const double steps = static_cast<double>(2 * b - 1);
    std::vector<Site> next;
    next.reserve(squares.size() * static_cast<std::size_t>(boxes - 1));
    for (const Site& c : squares) {
      double up_sum = 0.0;
      double down_sum = 0.0;
      for (std::int64_t j = 1; j < boxes; ++j) {
        const std::array<std::int64_t, 2> up{c[0] + (j - 1) * b, c[1] + j * b};
        const std::array<std::int64_t, 2> down{c[0] + j * b, c[1] + (j - 1) * b};
        up_sum += field.brw_component(box_level, up);
        down_sum += field.brw_component(box_level, down);
      }
      const double z_up = steps * up_sum;
      const double z_down = steps * down_sum;
      SkeletonChoice choice;
      choice.level = level;
      choice.corner = c;
      choice.side = side;
      choice.up = z_up >= z_down;
      choice.gain = choice.up ? z_up : z_down;
      choice.alternative_gain = choice.up ? z_down : z_up;
      out.choices.push_back(choice);
      for (std::int64_t j = 1; j < boxes; ++j) {
        const Site corner = choice.up ? Site{c[0] + (j - 1) * b, c[1] + j * b, 0}
                                      : Site{c[0] + j * b, c[1] + (j - 1) * b, 0};
        next.push_back(corner);
        points.push_back(corner);
        points.push_back({corner[0] + b - 1, corner[1] + b - 1, 0});
      }
    }
    squares = std::move(next);
    out.squares_per_level.push_back(static_cast<std::int64_t>(squares.size()));
  }

  std::sort(points.begin(), points.end());
  points.erase(std::unique(points.begin(), points.end()), points.end());
  for (std::size_t t = 1; t < points.size(); ++t) {
    if (points[t][1] < points[t - 1][1]) throw InternalError("skeleton points are not ordered");
  }
  out.skeleton = points;
  out.path = leftmost_completion(points, n);

  for (const Site& v : out.path.vertices) {
    const std::array<std::int64_t, 2> at{v[0], v[1]};
    out.weight += field(v[0], v[1]);
    for (int l = 1; l <= out.M; ++l) out.L1 += field.brw_component(l * s, at);
  }
  out.L2 = out.weight - out.L1;
  return out;
}

ReferenceModel parse_reference_model(std::string_view name) {
  if (name == "heavy") return ReferenceModel::Heavy;
  if (name == "brw") return ReferenceModel::Brw;
  if (name == "logcorrected") return ReferenceModel::LogCorrected;
  throw DomainError("unknown reference model '" + std::string(name) + "'");
}

double reference_bound(double n, ReferenceModel model, double beta, int d) {
  if (!(n >= 4.0)) throw DomainError("reference bound needs n >= 4");
  if (d < 1) throw DomainError("d must be at least 1");
  const double log_n = std::log2(n);
  const double loglog_n = std::log2(log_n);
  const double heavy_exp = (d + 2.0) / (2.0 * (d + 1.0));
  double exponent = 0.0;
  switch (model) {
    case ReferenceModel::Heavy: exponent = heavy_exp; break;
    case ReferenceModel::Brw: exponent = 0.5; break;
    case ReferenceModel::LogCorrected: exponent = heavy_exp - beta / (d + 1.0); break;
  }
  return n * std::pow(log_n, exponent) / loglog_n;
}

void write_level_sets_csv(std::ostream& os, const LevelSets& levels, const WeightField& field) {
  const double n = static_cast<double>(levels.n);
  os << "level,index,x,y,scale\n";
  for (std::size_t level = 0; level < levels.vertices.size(); ++level) {
    const auto& vs = levels.vertices[level];
    for (std::size_t i = 0; i < vs.size(); ++i) {
      os << level << ',' << i << ',' << vs[i][0] << ',' << vs[i][1] << ',';
      const double w = field(vs[i][0], vs[i][1]);
      if (const auto k = w > 0.0 ? scale_of(w, n) : std::nullopt) os << *k;
      os << '\n';
    }
  }
}

void write_skeleton_choices_csv(std::ostream& os, const std::vector<SkeletonChoice>& choices) {
  os << "level,corner,choice,gain,alternative_gain\n";
  for (const auto& c : choices) {
    os << c.level << ',' << c.corner[0] << ':' << c.corner[1] << ',' << (c.up ? "up" : "down")
       << ',' << format_double(c.gain) << ',' << format_double(c.alternative_gain) << '\n';
  }
}

}  // namespace hlpp
