#include "hlpp/lpp.hpp"

#include <algorithm>
#include <barrier>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include "hlpp/error.hpp"
#include "hlpp/format.hpp"

namespace hlpp {

namespace {

constexpr std::int64_t kMaxN1 = std::int64_t{1} << 15;
constexpr std::int64_t kMaxN2 = std::int64_t{1} << 8;
constexpr std::int64_t kTableCells = std::int64_t{1} << 24;
constexpr std::int64_t kTableExtent = (std::int64_t{1} << 12) + 1;
constexpr std::size_t kMaxChainPoints = 10'000'000;
constexpr std::int64_t kTile = 512;

// Row sweep over a W x H rectangle in local coordinates. `row` ends up holding
// the last row. Every cell is X + max(left, down) with the origin taking X alone.
template <class W>
void sweep_rows(std::int64_t width, std::int64_t height, W&& w, std::vector<double>& row) {
  row.assign(static_cast<std::size_t>(width), 0.0);
  row[0] = w(0, 0);
  for (std::int64_t i = 1; i < width; ++i) row[i] = w(i, 0) + row[i - 1];
  for (std::int64_t j = 1; j < height; ++j) {
    row[0] = w(0, j) + row[0];
    for (std::int64_t i = 1; i < width; ++i) row[i] = w(i, j) + std::max(row[i - 1], row[i]);
  }
}

// Same recurrence with a direction bit per cell (1 = came from below), then a
// backtrack that prefers the horizontal predecessor on ties.
template <class W>
double table_path(std::int64_t width, std::int64_t height, W&& w,
                  std::vector<std::pair<std::int64_t, std::int64_t>>& out) {
  std::vector<std::uint64_t> bits(static_cast<std::size_t>((width * height + 63) / 64), 0);
  std::vector<double> row(static_cast<std::size_t>(width));
  row[0] = w(0, 0);
  for (std::int64_t i = 1; i < width; ++i) row[i] = w(i, 0) + row[i - 1];
  for (std::int64_t j = 1; j < height; ++j) {
    row[0] = w(0, j) + row[0];
    const std::int64_t base = j * width;
    for (std::int64_t i = 1; i < width; ++i) {
      const double left = row[i - 1];
      const double down = row[i];
      if (left < down) bits[(base + i) >> 6] |= std::uint64_t{1} << ((base + i) & 63);
      row[i] = w(i, j) + std::max(left, down);
    }
  }
  const std::size_t start = out.size();
  std::int64_t i = width - 1;
  std::int64_t j = height - 1;
  for (;;) {
    out.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    bool from_below;
    if (i == 0) {
      from_below = true;
    } else if (j == 0) {
      from_below = false;
    } else {
      const std::int64_t c = j * width + i;
      from_below = (bits[c >> 6] >> (c & 63)) & 1U;
    }
    if (from_below) --j; else --i;
  }
  std::reverse(out.begin() + static_cast<std::ptrdiff_t>(start), out.end());
  return row[width - 1];
}

double tiled_sweep(const WeightField& field, int threads) {
  const std::int64_t e = field.extent();
  const std::int64_t nb = (e + kTile - 1) / kTile;
  std::vector<double> top(static_cast<std::size_t>(e));
  std::vector<double> right(static_cast<std::size_t>(e));
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, nb));

  auto run_tile = [&](std::int64_t bx, std::int64_t by, std::vector<double>& buf) {
    const std::int64_t xs = bx * kTile;
    const std::int64_t xe = std::min(e, xs + kTile);
    const std::int64_t ys = by * kTile;
    const std::int64_t ye = std::min(e, ys + kTile);
    for (std::int64_t y = ys; y < ye; ++y) {
      for (std::int64_t x = xs; x < xe; ++x) {
        double& cell = buf[static_cast<std::size_t>(x - xs)];
        const bool has_left = x > 0;
        const bool has_down = y > 0;
        const double left = x == xs ? (has_left ? right[y] : 0.0) : buf[x - xs - 1];
        const double down = y == ys ? (has_down ? top[x] : 0.0) : cell;
        double best;
        if (has_left && has_down) {
          best = std::max(left, down);
        } else if (has_left) {
          best = left;
        } else if (has_down) {
          best = down;
        } else {
          cell = field(x, y);
          continue;
        }
        cell = field(x, y) + best;
      }
      right[y] = buf[static_cast<std::size_t>(xe - xs - 1)];
    }
    std::copy(buf.begin(), buf.begin() + (xe - xs), top.begin() + xs);
  };

  std::barrier sync(workers);
  auto worker = [&](int id) {
    std::vector<double> buf(static_cast<std::size_t>(kTile));
    for (std::int64_t diag = 0; diag < 2 * nb - 1; ++diag) {
      const std::int64_t bx_lo = std::max<std::int64_t>(0, diag - (nb - 1));
      const std::int64_t bx_hi = std::min(diag, nb - 1);
      for (std::int64_t bx = bx_lo + id; bx <= bx_hi; bx += workers) run_tile(bx, diag - bx, buf);
      sync.arrive_and_wait();
    }
  };
  {
    std::vector<std::jthread> pool;
    for (int id = 1; id < workers; ++id) pool.emplace_back(worker, id);
    worker(0);
  }
  return top[static_cast<std::size_t>(e - 1)];
}

// 3D box sweep over [lo, hi]; dirs (if given) receives 0/1/2 for the chosen
// predecessor along x/y/z, with that order of preference on ties.
double sweep_box(const WeightField& field, const Site& lo, const Site& hi,
                 std::vector<std::uint8_t>* dirs) {
  const std::int64_t wx = hi[0] - lo[0] + 1;
  const std::int64_t wy = hi[1] - lo[1] + 1;
  const std::int64_t wz = hi[2] - lo[2] + 1;
  std::vector<double> layer(static_cast<std::size_t>(wx * wy), 0.0);
  if (dirs) dirs->assign(static_cast<std::size_t>(wx * wy * wz), 0);
  for (std::int64_t k = 0; k < wz; ++k) {
    for (std::int64_t j = 0; j < wy; ++j) {
      for (std::int64_t i = 0; i < wx; ++i) {
        const std::size_t c = static_cast<std::size_t>(j * wx + i);
        const double x = field(lo[0] + i, lo[1] + j, lo[2] + k);
        bool any = false;
        double best = 0.0;
        std::uint8_t dir = 0;
        if (i > 0) { best = layer[c - 1]; any = true; dir = 0; }
        if (j > 0) {
          const double down = layer[c - static_cast<std::size_t>(wx)];
          if (!any || best < down) { best = down; dir = 1; }
          any = true;
        }
        if (k > 0) {
          const double back = layer[c];
          if (!any || best < back) { best = back; dir = 2; }
          any = true;
        }
        layer[c] = any ? x + best : x;
        if (dirs) (*dirs)[static_cast<std::size_t>(k * wx * wy) + c] = dir;
      }
    }
  }
  return layer.back();
}

void recover_2d(const WeightField& field, std::int64_t x0, std::int64_t y0, std::int64_t x1,
                std::int64_t y1, std::vector<Site>& out) {
  const std::int64_t width = x1 - x0 + 1;
  const std::int64_t height = y1 - y0 + 1;
  if (width * height <= kTableCells || height == 1) {
    std::vector<std::pair<std::int64_t, std::int64_t>> local;
    table_path(width, height, [&](std::int64_t i, std::int64_t j) { return field(x0 + i, y0 + j); },
               local);
    for (const auto& [i, j] : local) out.push_back({x0 + i, y0 + j, 0});
    return;
  }
  const std::int64_t ymid = y0 + (height - 1) / 2;
  std::vector<double> fwd;
  std::vector<double> bwd;
  sweep_rows(width, ymid - y0 + 1,
             [&](std::int64_t i, std::int64_t j) { return field(x0 + i, y0 + j); }, fwd);
  sweep_rows(width, y1 - ymid,
             [&](std::int64_t i, std::int64_t j) { return field(x1 - i, y1 - j); }, bwd);
  std::int64_t best_x = x0;
  double best = -std::numeric_limits<double>::infinity();
  for (std::int64_t x = x0; x <= x1; ++x) {
    const double total = fwd[x - x0] + bwd[x1 - x];
    if (total > best) {
      best = total;
      best_x = x;
    }
  }
  recover_2d(field, x0, y0, best_x, ymid, out);
  recover_2d(field, best_x, ymid + 1, x1, y1, out);
}

double site_weight(const WeightField& field, const Site& s) {
  return field.eval(std::span<const std::int64_t>(s.data(), field.dimension()));
}

}  // namespace

void validate_path(const DirectedPath& path, std::int64_t extent) {
  if (path.dim < 2 || path.dim > 3) throw DomainError("paths live in dimension 2 or 3");
  if (path.vertices.empty()) throw DomainError("empty path");
  for (int i = 0; i < path.dim; ++i) {
    if (path.vertices.front()[i] != 0) throw DomainError("path must start at the origin");
    if (path.vertices.back()[i] != extent - 1) throw DomainError("path must end at the far corner");
  }
  for (std::size_t t = 1; t < path.vertices.size(); ++t) {
    std::int64_t step = 0;
    for (int i = 0; i < path.dim; ++i) {
      const std::int64_t delta = path.vertices[t][i] - path.vertices[t - 1][i];
      if (delta < 0 || delta > 1) throw DomainError("path steps must be unit and increasing");
      step += delta;
    }
    if (step != 1) throw DomainError("path steps must be unit and increasing");
  }
}

bool is_valid_path(const DirectedPath& path, std::int64_t extent) noexcept {
  try {
    validate_path(path, extent);
    return true;
  } catch (const DomainError&) {
    return false;
  }
}

double path_weight(const DirectedPath& path, const WeightField& field) {
  if (path.dim != field.dimension()) throw DomainError("path and field dimensions differ");
  double total = 0.0;
  for (const auto& v : path.vertices) total += site_weight(field, v);
  return total;
}

double ScaleSums::total() const noexcept {
  double t = residual;
  for (const auto& [_, s] : by_scale) t += s;
  return t;
}

void check_dp_budget(const EnvironmentSpec& spec) {
  if (spec.d == 1) {
    if (spec.n > kMaxN1) throw SizeError("d = 1 solver is limited to n <= 2^15");
  } else if (spec.d == 2) {
    if (spec.n > kMaxN2) throw SizeError("d = 2 solver is limited to n <= 2^8");
  } else {
    throw UnsupportedError("exact solvers support d = 1 and d = 2 only");
  }
}

double last_passage(const WeightField& field, int threads) {
  check_dp_budget(field.spec());
  const std::int64_t e = field.extent();
  if (field.dimension() == 3) return sweep_box(field, {0, 0, 0}, {e - 1, e - 1, e - 1}, nullptr);
  if (threads > 1 && e > kTile) return tiled_sweep(field, threads);
  std::vector<double> row;
  sweep_rows(e, e, [&](std::int64_t x, std::int64_t y) { return field(x, y); }, row);
  return row.back();
}

PassageResult geodesic(const WeightField& field) {
  check_dp_budget(field.spec());
  const std::int64_t e = field.extent();
  PassageResult result;
  DirectedPath path;
  path.dim = field.dimension();
  if (path.dim == 2) {
    if (e <= kTableExtent) {
      std::vector<std::pair<std::int64_t, std::int64_t>> local;
      result.value =
          table_path(e, e, [&](std::int64_t x, std::int64_t y) { return field(x, y); }, local);
      path.vertices.reserve(local.size());
      for (const auto& [x, y] : local) path.vertices.push_back({x, y, 0});
    } else {
      result.value = last_passage(field, 1);
      path.vertices.reserve(static_cast<std::size_t>(2 * e - 1));
      recover_2d(field, 0, 0, e - 1, e - 1, path.vertices);
    }
  } else {
    std::vector<std::uint8_t> dirs;
    result.value = sweep_box(field, {0, 0, 0}, {e - 1, e - 1, e - 1}, &dirs);
    Site s{e - 1, e - 1, e - 1};
    for (;;) {
      path.vertices.push_back(s);
      if (s[0] == 0 && s[1] == 0 && s[2] == 0) break;
      --s[dirs[static_cast<std::size_t>((s[2] * e + s[1]) * e + s[0])]];
    }
    std::reverse(path.vertices.begin(), path.vertices.end());
  }
  result.scale_sums = scale_decomposition(path, field);
  if (path.dim == 2) result.transversal = transversal_fluctuation(path);
  result.geodesic = std::move(path);
  return result;
}

double passage_between(const WeightField& field, const Site& u, const Site& v) {
  check_dp_budget(field.spec());
  const int dim = field.dimension();
  for (int i = 0; i < dim; ++i) {
    if (u[i] < 0 || v[i] >= field.extent()) throw DomainError("endpoint outside the grid");
    if (u[i] > v[i]) throw DomainError("passage_between needs u <= v");
  }
  if (dim == 3) return sweep_box(field, u, v, nullptr);
  std::vector<double> row;
  sweep_rows(v[0] - u[0] + 1, v[1] - u[1] + 1,
             [&](std::int64_t i, std::int64_t j) { return field(u[0] + i, u[1] + j); }, row);
  return row.back();
}

ScaleSums scale_decomposition(const DirectedPath& path, const WeightField& field) {
  if (path.dim != field.dimension()) throw DomainError("path and field dimensions differ");
  const double n = std::max<double>(1.0, static_cast<double>(field.spec().n));
  ScaleSums sums;
  for (const auto& v : path.vertices) {
    const double x = site_weight(field, v);
    const auto k = x > 0.0 ? scale_of(x, n) : std::nullopt;
    if (k) {
      sums.by_scale[*k] += x;
    } else {
      sums.residual += x;
    }
  }
  return sums;
}

std::vector<Site> skeleton(const DirectedPath& path, const WeightField& field, double threshold) {
  if (path.dim != field.dimension()) throw DomainError("path and field dimensions differ");
  std::vector<Site> out;
  const std::size_t last = path.vertices.size() - 1;
  for (std::size_t t = 0; t <= last && !path.vertices.empty(); ++t) {
    if (t == 0 || t == last || site_weight(field, path.vertices[t]) > threshold) {
      out.push_back(path.vertices[t]);
    }
  }
  return out;
}

std::int64_t transversal_fluctuation(const DirectedPath& path) {
  if (path.dim != 2) throw UnsupportedError("transversal fluctuation is defined for d = 1 only");
  std::int64_t worst = 0;
  for (const auto& v : path.vertices) worst = std::max(worst, std::abs(v[0] - v[1]));
  return worst;
}

ChainResult max_weight_chain(std::span<const ChainPoint> points) {
  if (points.size() > kMaxChainPoints) throw SizeError("more than 1e7 points");
  ChainResult result;
  const std::size_t count = points.size();
  if (count == 0) return result;

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].x != points[b].x) return points[a].x < points[b].x;
    if (points[a].y != points[b].y) return points[a].y < points[b].y;
    return a < b;
  });
  std::vector<double> ys(count);
  for (std::size_t i = 0; i < count; ++i) ys[i] = points[i].y;
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());

  // Fenwick tree over 1-based y ranks holding (best chain value, its last point).
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::pair<double, std::size_t>> tree(ys.size() + 1, {0.0, kNone});
  auto query = [&](std::size_t r) {
    std::pair<double, std::size_t> best{0.0, kNone};
    for (; r > 0; r &= r - 1) {
      if (tree[r].second != kNone && (best.second == kNone || best.first < tree[r].first)) {
        best = tree[r];
      }
    }
    return best;
  };
  auto update = [&](std::size_t r, double value, std::size_t idx) {
    for (; r < tree.size(); r += r & (~r + 1)) {
      if (tree[r].second == kNone || tree[r].first < value) tree[r] = {value, idx};
    }
  };

  std::vector<double> best(count);
  std::vector<std::size_t> pred(count, kNone);
  std::vector<std::size_t> rank(count);
  for (std::size_t g = 0; g < count;) {
    std::size_t h = g;
    while (h < count && points[order[h]].x == points[order[g]].x) ++h;
    for (std::size_t t = g; t < h; ++t) {
      const std::size_t i = order[t];
      rank[i] = static_cast<std::size_t>(std::lower_bound(ys.begin(), ys.end(), points[i].y) -
                                         ys.begin()) + 1;
      const auto [value, from] = query(rank[i] - 1);
      best[i] = from == kNone ? points[i].weight : points[i].weight + value;
      pred[i] = from;
    }
    for (std::size_t t = g; t < h; ++t) update(rank[order[t]], best[order[t]], order[t]);
    g = h;
  }

  std::size_t end = kNone;
  for (std::size_t t = 0; t < count; ++t) {
    const std::size_t i = order[t];
    if (end == kNone || best[end] < best[i]) end = i;
  }
  if (best[end] <= 0.0) return result;
  result.value = best[end];
  for (std::size_t i = end; i != kNone; i = pred[i]) result.chain.push_back(i);
  std::reverse(result.chain.begin(), result.chain.end());
  return result;
}

namespace {
std::vector<ChainPoint> flatten(const PoissonLayers& layers, std::vector<int>* layer_of) {
  if (layers.total_points() > kMaxChainPoints) throw SizeError("more than 1e7 points");
  std::vector<ChainPoint> pts;
  pts.reserve(layers.total_points());
  for (const auto& layer : layers.layers) {
    for (const auto& p : layer.points) {
      pts.push_back({p[0], p[1], layer.weight});
      if (layer_of) layer_of->push_back(layer.k);
    }
  }
  return pts;
}
}  // namespace

double poisson_last_passage(const PoissonLayers& layers) {
  const auto pts = flatten(layers, nullptr);
  return max_weight_chain(pts).value;
}

ScaleSums poisson_chain_composition(const PoissonLayers& layers) {
  std::vector<int> layer_of;
  const auto pts = flatten(layers, &layer_of);
  const auto chain = max_weight_chain(pts);
  ScaleSums sums;
  for (const auto i : chain.chain) sums.by_scale[layer_of[i]] += pts[i].weight;
  return sums;
}

void write_path_csv(std::ostream& os, const DirectedPath& path) {
  os << (path.dim == 3 ? "x,y,z\n" : "x,y\n");
  for (const auto& v : path.vertices) {
    os << v[0] << ',' << v[1];
    if (path.dim == 3) os << ',' << v[2];
    os << '\n';
  }
}

void write_scale_csv(std::ostream& os, const ScaleSums& sums) {
  os << "scale,sum\n";
  for (const auto& [k, s] : sums.by_scale) os << k << ',' << format_double(s) << '\n';
  os << "residual," << format_double(sums.residual) << '\n';
}

}  // namespace hlpp
