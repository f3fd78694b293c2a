// Acceptance gate: one PASS/FAIL line per primary criterion, nonzero exit on any failure.

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "hlpp/construct.hpp"
#include "hlpp/env.hpp"
#include "hlpp/geometry.hpp"
#include "hlpp/lpp.hpp"
#include "hlpp/stats.hpp"
#include "oracle.hpp"

using namespace hlpp;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

EnvironmentSpec make_spec(EnvKind kind, std::int64_t n, std::uint64_t seed) {
  EnvironmentSpec s;
  s.kind = kind;
  s.n = n;
  s.seed = seed;
  return s;
}

std::vector<ReplicateRecord> run(EnvKind kind, std::vector<std::int64_t> ns, int reps,
                                 std::uint64_t seed) {
  ExperimentConfig c;
  c.environment = make_spec(kind, ns.front(), seed);
  c.n_list = std::move(ns);
  c.replicates = reps;
  c.seed = seed;
  return run_experiment(c);
}

std::map<std::int64_t, std::vector<double>> by_n(const std::vector<ReplicateRecord>& recs) {
  std::map<std::int64_t, std::vector<double>> out;
  for (const auto& r : recs) out[r.n].push_back(r.L);
  return out;
}

Verdict oracle_equivalence() {
  const auto t0 = Clock::now();
  int fields = 0;
  int mismatches = 0;
  for (auto kind : {EnvKind::IidPareto2, EnvKind::IidLogCorrected, EnvKind::Brw}) {
    for (std::int64_t n = 2; n <= 8; ++n) {
      if (kind == EnvKind::Brw && !is_power_of_two(n)) continue;
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const WeightField f(make_spec(kind, n, 1000 * n + seed));
        const auto brute = oracle::brute_force_2d(f);
        const auto g = geodesic(f);
        ++fields;
        if (last_passage(f) != brute.value || g.value != brute.value ||
            g.geodesic->vertices != brute.path) {
          ++mismatches;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0,
          fmt("%d fields, %d mismatches, %.1f s (limit 60 s)", fields, mismatches, secs)};
}

Verdict continuum_oracle() {
  int instances = 0;
  int mismatches = 0;
  std::size_t largest = 0;
  for (std::uint64_t seed = 0; instances < 100; ++seed) {
    const auto layers = gen_poisson_layers(8, 4, seed);
    if (layers.total_points() > 200) continue;
    std::vector<ChainPoint> pts;
    for (const auto& layer : layers.layers) {
      for (const auto& p : layer.points) pts.push_back({p[0], p[1], layer.weight});
    }
    largest = std::max(largest, pts.size());
    ++instances;
    if (poisson_last_passage(layers) != oracle::quadratic_chain(pts)) ++mismatches;
  }
  return {mismatches == 0, fmt("%d instances (up to %zu points), %d mismatches", instances, largest, mismatches)};
}

Verdict geometry_suite() {
  using namespace hlpp::geometry;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(314159);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int lattice_bad = 0, slope_bad = 0, cancel_bad = 0;
  const int trials = 10000;

  for (int i = 0; i < trials; ++i) {
    const double r = 0.01 + 0.98 * u(rng);
    const double lo = 10.0 / r;
    const double w = lo + (1000.0 - lo) * u(rng);
    const double h = lo + (1000.0 - lo) * u(rng);
    const Point a{u(rng) * 50.0, u(rng) * 50.0};
    const Cylinder c{Rect(a, {a.x + w, a.y + h}), r};
    const auto count = lattice_count_in_cyl(c);
    if (count > 0 && static_cast<double>(count) < c.area() - 100.0 * std::max(w, h)) ++lattice_bad;
  }

  auto inside = [&](const Cylinder& c) {
    std::uniform_real_distribution<double> ux(c.rect.lower().x, c.rect.upper().x);
    std::uniform_real_distribution<double> uy(c.rect.lower().y, c.rect.upper().y);
    for (;;) {
      const Point p{ux(rng), uy(rng)};
      if (cyl_contains(c, p)) return p;
    }
  };
  for (int i = 0; i < trials; ++i) {
    const double r = 0.01 + 0.98 * u(rng);
    const double sigma = std::exp(4.0 * u(rng) - 2.0);
    const double w2 = 1.0 + 99.0 * u(rng);
    const double w1 = w2 * (0.05 + 0.95 * u(rng));
    const double w3 = w2 * (0.05 + 0.95 * u(rng));
    const Point a{u(rng), u(rng)};
    const Point b{a.x + w1, a.y + sigma * w1};
    const Point c{b.x + w2, b.y + sigma * w2};
    const Point d{c.x + w3, c.y + sigma * w3};
    if (!check_slope_bound(a, b, c, d, r, inside({Rect(a, b), r}), inside({Rect(c, d), r}))) ++slope_bad;
  }

  for (int i = 0; i < trials; ++i) {
    const double delta = 1e-4 + 0.1 * u(rng);
    const int m = 1 + static_cast<int>(u(rng) * 30);
    const double base = std::exp(6.0 * u(rng) - 3.0);
    std::vector<double> xs(m), ys(m);
    for (int j = 0; j < m; ++j) {
      xs[j] = 1e-3 + 10.0 * u(rng);
      ys[j] = xs[j] * base * (1.0 + delta * u(rng));
    }
    const auto gap = cancellation_gap(xs, ys, delta);
    if (gap.lhs < gap.rhs) ++cancel_bad;
  }
  const double secs = seconds_since(t0);
  return {lattice_bad + slope_bad + cancel_bad == 0 && secs < 120.0,
          fmt("counterexamples: lattice %d, slope %d, cancellation %d of %d each; %.1f s (limit 120 s)",
              lattice_bad, slope_bad, cancel_bad, trials, secs)};
}

Verdict construction_invariants() {
  const auto t0 = Clock::now();
  const std::int64_t n = 1 << 16;
  const auto p = heavy_params(n, ScaleOverride{2, 4});
  int ordering_bad = 0, purity_bad = 0, apriori_bad = 0, dominance_bad = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WeightField f(make_spec(EnvKind::IidPareto2, n, 7000 + seed));
    const auto c = build_heavy_path(f, p);
    const auto& top = c.levels.vertices.back();
    bool ordered = is_valid_path(c.path, n + 1);
    for (std::size_t i = 1; i < top.size(); ++i) {
      ordered = ordered && top[i - 1][0] < top[i][0] && top[i - 1][1] < top[i][1];
    }
    std::size_t hit = 0;
    for (const auto& v : c.path.vertices) {
      if (hit < top.size() && v == top[hit]) ++hit;
    }
    if (!ordered || hit != top.size()) ++ordering_bad;
    for (int l = 1; l <= p.M; ++l) {
      std::int64_t recount = 0;
      for (std::size_t i = 1; i + 1 < top.size(); ++i) {
        if (scale_of(f(top[i][0], top[i][1]), static_cast<double>(n)) == l * p.s) ++recount;
      }
      if (recount != static_cast<std::int64_t>(c.levels.vertices[l].size() -
                                               c.levels.vertices[l - 1].size())) {
        ++purity_bad;
      }
    }
    if (!verify_apriori(c.levels, p).all_ok()) ++apriori_bad;
  }
  const std::int64_t m = 1 << 13;
  const auto q = heavy_params(m, desk_preset(m));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const WeightField f(make_spec(EnvKind::IidPareto2, m, 8000 + seed));
    const auto c = build_heavy_path(f, q);
    if (path_weight(c.path, f) > last_passage(f)) ++dominance_bad;
    if (!verify_apriori(c.levels, q).all_ok()) ++apriori_bad;
  }
  const double secs = seconds_since(t0);
  return {ordering_bad + purity_bad + apriori_bad + dominance_bad == 0 && secs < 600.0,
          fmt("failures: ordering %d, purity %d, a-priori %d, dominance %d; %.1f s (limit 600 s)",
              ordering_bad, purity_bad, apriori_bad, dominance_bad, secs)};
}

// Shared by the two growth criteria.
const std::map<std::int64_t, std::vector<double>>& growth_samples() {
  static const auto samples =
      by_n(run(EnvKind::IidPareto2, {256, 512, 1024, 2048, 4096, 8192}, 50, 20240601));
  return samples;
}

Verdict upper_band() {
  bool ok = true;
  std::string detail = "median L/(n log2 n):";
  for (const auto& [n, ls] : growth_samples()) {
    if (n > 4096) continue;
    std::vector<double> norm;
    for (double l : ls) norm.push_back(l / (n * std::log2(static_cast<double>(n))));
    const double med = median(norm);
    ok = ok && med >= 0.05 && med <= 10.0;
    detail += fmt(" %lld:%.3f", static_cast<long long>(n), med);
  }
  return {ok, detail + " (band [0.05, 10])"};
}

Verdict superlinear_growth() {
  std::vector<double> ns, means;
  std::string detail = "mean L/n:";
  bool increasing = true;
  for (const auto& [n, ls] : growth_samples()) {
    const double mean = sample_mean(ls);
    if (!means.empty() && mean / n <= means.back() / ns.back()) increasing = false;
    ns.push_back(static_cast<double>(n));
    means.push_back(mean);
    detail += fmt(" %.3f", mean / n);
  }
  const auto fit = fit_log_correction(ns, means);
  const bool band = fit.p > 0.4 && fit.p < 1.1;
  return {increasing && band,
          detail + fmt("; effective exponent %.3f +- %.3f (band (0.4, 1.1))", fit.p, fit.stderr_p)};
}

Verdict brw_variance() {
  const auto rows = variance_curve(by_n(run(EnvKind::Brw, {64, 128, 256, 512, 1024}, 300, 20240602)));
  double lo = INFINITY, hi = 0.0;
  std::string detail = "Var/n^2:";
  for (const auto& r : rows) {
    lo = std::min(lo, r.ratio);
    hi = std::max(hi, r.ratio);
    detail += fmt(" %.2f", r.ratio);
  }
  return {hi / lo <= 4.0, detail + fmt("; max/min %.3f (limit 4)", hi / lo)};
}

Verdict brw_fluctuation() {
  const auto samples = by_n(run(EnvKind::Brw, {256}, 1000, 20240603)).at(256);
  const std::vector<double> t{1.0};
  const auto row = concentration_tail(samples, 256.0, t).front();
  const double lo = std::exp(-9.0);
  return {row.p >= lo && row.p <= 0.9,
          fmt("P(|L-mean|/n > 1) = %.4f [%.4f, %.4f] (band [%.2e, 0.9])", row.p, row.ci_low,
              row.ci_high, lo)};
}

Verdict skeleton_gain() {
  const std::int64_t n = 256;
  const int s = 2;
  const int level = 1;
  std::vector<double> gains;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto c = build_brw_path(WeightField(make_spec(EnvKind::Brw, n, 9000 + seed)), s);
    for (const auto& ch : c.choices) {
      if (ch.level == level) gains.push_back(ch.gain);
    }
  }
  const std::int64_t b = n >> ((level + 1) * s);
  const double target = skeleton_sum_sd(b, s) / std::sqrt(M_PI);
  const double mean = sample_mean(gains);
  const double se = std::sqrt(sample_variance(gains) / static_cast<double>(gains.size()));
  return {std::fabs(mean - target) <= 3.0 * se,
          fmt("%zu squares, mean gain %.3f vs sd/sqrt(pi) %.3f, |diff|/SE %.2f (limit 3)",
              gains.size(), mean, target, std::fabs(mean - target) / se)};
}

Verdict poisson_unit_intensity() {
  const double k = 100.0;
  std::vector<double> ratios;
  for (std::int64_t rep = 0; rep < 100; ++rep) {
    const auto pts = sample_poisson_points(k, k * k, 20240604, rep);
    std::vector<ChainPoint> chain;
    chain.reserve(pts.size());
    for (const auto& p : pts) chain.push_back({p[0], p[1], 1.0});
    ratios.push_back(max_weight_chain(chain).value / k);
  }
  const double mean = sample_mean(ratios);
  return {mean >= 1.7 && mean <= 2.1, fmt("mean chain length / k = %.4f (band [1.7, 2.1])", mean)};
}

Verdict performance() {
  const auto t0 = Clock::now();
  const double value = last_passage(WeightField(make_spec(EnvKind::IidPareto2, 1 << 13, 1)), 1);
  const double secs = seconds_since(t0);

  std::fflush(stdout);
  const pid_t pid = fork();
  if (pid == 0) {
    const WeightField f(make_spec(EnvKind::IidPareto2, 1 << 14, 2));
    const auto g = geodesic(f);
    _exit(g.geodesic && is_valid_path(*g.geodesic, f.extent()) ? 0 : 1);
  }
  int status = 0;
  rusage usage{};
  if (pid < 0 || wait4(pid, &status, 0, &usage) != pid) return {false, "could not fork the memory probe"};
  const bool child_ok = WIFEXITED(status) && WEXITSTATUS(status) == 0;
  const double peak_gb = static_cast<double>(usage.ru_maxrss) * 1024.0 / 1e9;
  return {value > 0 && secs < 10.0 && child_ok && peak_gb < 1.5,
          fmt("n=2^13 value-only DP %.2f s (limit 10 s); n=2^14 geodesic peak RSS %.3f GB (limit 1.5 GB)%s",
              secs, peak_gb, child_ok ? "" : ", geodesic probe failed")};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
      {"oracle-equivalence", oracle_equivalence},
      {"continuum-oracle", continuum_oracle},
      {"geometry-lemmas", geometry_suite},
      {"construction-invariants", construction_invariants},
      {"upper-bound-band", upper_band},
      {"superlinear-growth", superlinear_growth},
      {"brw-variance", brw_variance},
      {"brw-fluctuation", brw_fluctuation},
      {"skeleton-gain", skeleton_gain},
      {"poisson-unit-intensity", poisson_unit_intensity},
      {"performance", performance},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
    failed += !v.pass;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
