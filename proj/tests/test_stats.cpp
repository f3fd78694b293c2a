#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "hlpp/error.hpp"
#include "hlpp/stats.hpp"

using namespace hlpp;

namespace {

ExperimentConfig small_config(EnvKind kind, std::vector<std::int64_t> ns, int reps) {
  ExperimentConfig c;
  c.environment.kind = kind;
  c.environment.n = ns.front();
  c.n_list = std::move(ns);
  c.replicates = reps;
  c.seed = 42;
  return c;
}

bool same_records(const std::vector<ReplicateRecord>& a, const std::vector<ReplicateRecord>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.model != y.model || x.n != y.n || x.replicate != y.replicate || x.seed != y.seed ||
        x.L != y.L || x.transversal != y.transversal || x.constructed_L != y.constructed_L) {
      return false;
    }
    if (x.scales.has_value() != y.scales.has_value()) return false;
    if (x.scales && (x.scales->by_scale != y.scales->by_scale || x.scales->residual != y.scales->residual)) {
      return false;
    }
  }
  return true;
}

std::string records_csv(const std::vector<ReplicateRecord>& r) {
  std::ostringstream os;
  write_records_csv(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("measure names") {
  for (auto m : {Measure::Value, Measure::Geodesic, Measure::ScaleSums, Measure::Transversal,
                 Measure::ConstructedPath}) {
    CHECK(parse_measure(measure_name(m)) == m);
  }
  CHECK(measure_name(Measure::ConstructedPath) == "constructed_path");
  CHECK_THROWS_AS(parse_measure("speed"), DomainError);
}

TEST_CASE("config json") {
  auto c = small_config(EnvKind::IidPareto2, {16, 32, 64}, 3);
  c.measure = {Measure::Value, Measure::Transversal, Measure::ConstructedPath};
  c.construction = ScaleOverride{1, 2};
  c.threads = 2;
  CHECK(experiment_from_json(to_json(c)) == c);

  const auto j = nlohmann::json::parse(R"({
    "environment": {"kind": "brw"},
    "n_list": [64, 128],
    "replicates": 5,
    "measure": ["scale_sums", "value", "value"],
    "seed": 9
  })");
  const auto parsed = experiment_from_json(j);
  CHECK(parsed.environment.kind == EnvKind::Brw);
  CHECK(parsed.environment.n == 64);
  CHECK(parsed.environment.seed == 9);
  CHECK(parsed.measure == std::vector<Measure>{Measure::Value, Measure::ScaleSums});
  CHECK(parsed.threads == 1);
  CHECK_FALSE(parsed.timing);

  auto bad = j;
  bad["colour"] = "red";
  bad["construction"] = {{"s", 1}, {"M", 1}, {"k", 3}};
  CHECK_THROWS_WITH_AS(experiment_from_json(bad), "unknown config keys: colour, construction.k",
                       DomainError);
  auto missing = j;
  missing.erase("seed");
  CHECK_THROWS_WITH_AS(experiment_from_json(missing), doctest::Contains("seed"), DomainError);
  auto nested = j;
  nested["environment"]["params"] = {{"alpha", 2}};
  CHECK_THROWS_WITH_AS(experiment_from_json(nested), doctest::Contains("params.alpha"), DomainError);
  auto typed = j;
  typed["replicates"] = "five";
  CHECK_THROWS_AS(experiment_from_json(typed), DomainError);
}

TEST_CASE("config validation") {
  auto c = small_config(EnvKind::IidPareto2, {16, 16}, 1);
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.n_list = {16, 8};
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.n_list = {16};
  c.replicates = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.replicates = 1;
  CHECK_NOTHROW(c.validate());
  c.n_list = {1 << 16};
  CHECK_THROWS_AS(c.validate(), SizeError);
  CHECK_THROWS_AS(run_experiment(c), SizeError);

  auto p = small_config(EnvKind::PoissonLayers, {64}, 1);
  p.measure = {Measure::Value, Measure::Geodesic};
  CHECK_THROWS_AS(p.validate(), DomainError);

  auto brw = small_config(EnvKind::Brw, {64, 100}, 1);
  CHECK_THROWS_AS(brw.validate(), DomainError);

  auto heavy = small_config(EnvKind::IidPareto2, {64}, 1);
  heavy.measure = {Measure::ConstructedPath};
  heavy.construction = ScaleOverride{3, 2};
  CHECK_THROWS_AS(heavy.validate(), InfeasibleError);
}

TEST_CASE("runs are deterministic across thread counts") {
  auto c = small_config(EnvKind::IidPareto2, {32, 64, 128}, 6);
  c.measure = {Measure::Value, Measure::ScaleSums, Measure::Transversal, Measure::ConstructedPath};
  c.construction = ScaleOverride{1, 2};
  const auto one = run_experiment(c);
  c.threads = 8;
  const auto eight = run_experiment(c);
  CHECK(same_records(one, eight));
  CHECK(records_csv(one) == records_csv(eight));
  CHECK(same_records(one, run_experiment(c)));

  REQUIRE(one.size() == 18);
  for (std::size_t i = 0; i < one.size(); ++i) {
    CHECK(one[i].n == c.n_list[i / 6]);
    CHECK(one[i].replicate == static_cast<int>(i % 6));
    CHECK(one[i].seed == replicate_seed(42, one[i].n, one[i].replicate));
    REQUIRE(one[i].constructed_L);
    CHECK(*one[i].constructed_L <= one[i].L);
    REQUIRE(one[i].transversal);
    REQUIRE(one[i].scales);
    CHECK(one[i].scales->total() == doctest::Approx(one[i].L).epsilon(1e-9));
    CHECK_FALSE(one[i].runtime_ms);
  }

  // The replicate seed reproduces the record on its own.
  EnvironmentSpec spec = c.environment;
  spec.n = one[7].n;
  spec.seed = one[7].seed;
  CHECK(last_passage(WeightField(spec)) == one[7].L);
}

TEST_CASE("experiments over each environment") {
  for (auto kind : {EnvKind::IidLogCorrected, EnvKind::Brw, EnvKind::PoissonLayers}) {
    auto c = small_config(kind, {16, 32}, 3);
    c.measure = {Measure::Value, Measure::ScaleSums};
    if (kind == EnvKind::Brw) c.measure.push_back(Measure::ConstructedPath);
    const auto a = run_experiment(c);
    c.threads = 3;
    CHECK(same_records(a, run_experiment(c)));
    REQUIRE(a.size() == 6);
    for (const auto& r : a) {
      CHECK(r.model == kind_name(kind));
      REQUIRE(r.scales);
      CHECK(r.scales->total() == doctest::Approx(r.L).epsilon(1e-9));
      if (r.constructed_L) CHECK(*r.constructed_L <= r.L);
    }
  }
  auto timed = small_config(EnvKind::IidPareto2, {16}, 2);
  timed.timing = true;
  for (const auto& r : run_experiment(timed)) CHECK(r.runtime_ms >= 0.0);
}

TEST_CASE("dominance over many replicates") {
  auto c = small_config(EnvKind::IidPareto2, {256, 512}, 40);
  c.measure = {Measure::Value, Measure::ConstructedPath};
  c.construction = ScaleOverride{2, 1};
  for (const auto& r : run_experiment(c)) REQUIRE(*r.constructed_L <= r.L);
}

TEST_CASE("log-correction fit") {
  const std::vector<double> ns{256, 1024, 4096, 16384, 65536};
  for (double p : {0.75, 0.0, 1.0, -0.3}) {
    std::vector<double> means;
    for (double n : ns) means.push_back(3.0 * n * std::pow(std::log2(n), p));
    const auto fit = fit_log_correction(ns, means);
    CHECK(fit.p == doctest::Approx(p).epsilon(1e-9).scale(1.0));
    CHECK(std::fabs(fit.stderr_p) < 1e-9);
    CHECK(fit.intercept == doctest::Approx(std::log2(3.0)).epsilon(1e-9));
  }
  const std::vector<double> same{64, 64, 64};
  const std::vector<double> vals{1, 2, 3};
  CHECK_THROWS_AS(fit_log_correction(same, vals), DomainError);
  const std::vector<double> two{64, 128};
  CHECK_THROWS_AS(fit_log_correction(two, std::vector<double>{1, 2}), DomainError);
  CHECK_THROWS_AS(fit_log_correction(ns, std::vector<double>{1, 2, 0, 4, 5}), DomainError);

  // Noisy data: the standard error is the textbook slope error.
  const std::vector<double> noisy{900, 4500, 21000, 98000, 450000};
  const auto fit = fit_log_correction(ns, noisy);
  double sx = 0, sy = 0;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    x.push_back(std::log2(std::log2(ns[i])));
    y.push_back(std::log2(noisy[i] / ns[i]));
    sx += x.back();
    sy += y.back();
  }
  sx /= 5;
  sy /= 5;
  double sxx = 0, sxy = 0;
  for (int i = 0; i < 5; ++i) {
    sxx += (x[i] - sx) * (x[i] - sx);
    sxy += (x[i] - sx) * (y[i] - sy);
  }
  const double slope = sxy / sxx;
  double rss = 0;
  for (int i = 0; i < 5; ++i) {
    const double e = y[i] - sy - slope * (x[i] - sx);
    rss += e * e;
  }
  CHECK(fit.p == doctest::Approx(slope).epsilon(1e-12));
  CHECK(fit.stderr_p == doctest::Approx(std::sqrt(rss / 3.0 / sxx)).epsilon(1e-10));
}

TEST_CASE("concentration tails") {
  const std::vector<double> ts{0.0, 0.5, 1.0, 2.0};
  const std::vector<double> flat(200, 7.0);
  for (const auto& row : concentration_tail(flat, 10.0, ts)) {
    CHECK(row.exceed == 0);
    CHECK(row.p == 0.0);
    CHECK(row.ci_low == 0.0);
    CHECK(row.total == 200);
  }

  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const double n = 500.0;
  std::vector<double> samples(20000);
  for (auto& s : samples) s = 3.0 * n + n * z(rng);
  const std::vector<double> one{1.0};
  const auto rows = concentration_tail(samples, n, one);
  REQUIRE(rows.size() == 1);
  // P(|Z| > 1) = 0.3173105...
  CHECK(rows[0].ci_low < 0.3173105);
  CHECK(rows[0].ci_high > 0.3173105);
  CHECK(rows[0].p == doctest::Approx(0.3173).epsilon(0.05));

  // Wilson interval by hand for 30 of 100.
  std::vector<double> mixed(100, 0.0);
  for (int i = 0; i < 15; ++i) mixed[i] = 10.0, mixed[99 - i] = -10.0;
  const std::vector<double> t{5.0};
  const auto w = concentration_tail(mixed, 1.0, t).front();
  CHECK(w.exceed == 30);
  const double zq = 1.959963984540054;
  const double phat = 0.3, m = 100.0;
  const double centre = (phat + zq * zq / (2 * m)) / (1 + zq * zq / m);
  const double half = zq / (1 + zq * zq / m) * std::sqrt(phat * (1 - phat) / m + zq * zq / (4 * m * m));
  CHECK(w.ci_low == doctest::Approx(centre - half).epsilon(1e-12));
  CHECK(w.ci_high == doctest::Approx(centre + half).epsilon(1e-12));

  const std::vector<double> few(99, 1.0);
  CHECK_THROWS_AS(concentration_tail(few, 1.0, ts), DomainError);
}

TEST_CASE("variance curves") {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> z;
  std::map<std::int64_t, std::vector<double>> by_n;
  for (std::int64_t n : {64, 256, 1024}) {
    for (int i = 0; i < 4000; ++i) by_n[n].push_back(static_cast<double>(n) * z(rng));
  }
  const auto rows = variance_curve(by_n);
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    CHECK(r.count == 4000);
    CHECK(std::fabs(r.ratio - 1.0) < 4.0 * r.ratio_se);
    CHECK(r.ratio_se == doctest::Approx(std::sqrt(2.0 / 4000.0)).epsilon(0.15));
    CHECK(r.variance == doctest::Approx(r.ratio * r.n * r.n).epsilon(1e-12));
  }

  // Jackknife standard error recomputed by brute force over leave-one-out sets.
  std::map<std::int64_t, std::vector<double>> small;
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (std::int64_t n : {8, 16}) {
    for (int i = 0; i < 120; ++i) small[n].push_back(u(rng) * u(rng));
  }
  const auto jk = variance_curve(small);
  for (const auto& r : jk) {
    const auto& xs = small.at(r.n);
    const auto m = xs.size();
    std::vector<double> loo;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> rest;
      for (std::size_t k = 0; k < m; ++k) if (k != i) rest.push_back(xs[k]);
      loo.push_back(sample_variance(rest));
    }
    const double bar = sample_mean(loo);
    double acc = 0.0;
    for (double v : loo) acc += (v - bar) * (v - bar);
    CHECK(r.variance == doctest::Approx(sample_variance(xs)).epsilon(1e-12));
    CHECK(r.variance_se == doctest::Approx(std::sqrt((m - 1.0) / m * acc)).epsilon(1e-8));
  }

  std::map<std::int64_t, std::vector<double>> flat{{8, std::vector<double>(100, 2.0)},
                                                   {16, std::vector<double>(100, 2.0)}};
  for (const auto& r : variance_curve(flat)) {
    CHECK(r.variance == 0.0);
    CHECK(r.variance_se == 0.0);
  }

  std::map<std::int64_t, std::vector<double>> thin{{8, std::vector<double>(100, 2.0)},
                                                   {16, std::vector<double>(99, 2.0)}};
  CHECK_THROWS_AS(variance_curve(thin), DomainError);
  std::map<std::int64_t, std::vector<double>> single{{8, std::vector<double>(500, 2.0)}};
  CHECK_THROWS_AS(variance_curve(single), DomainError);
}

TEST_CASE("sample helpers") {
  const std::vector<double> xs{3, 1, 2, 10};
  CHECK(sample_mean(xs) == 4.0);
  CHECK(sample_variance(xs) == doctest::Approx(50.0 / 3.0));
  CHECK(median(xs) == 2.5);
  CHECK(median({5, 1, 3}) == 3.0);
}

TEST_CASE("summary and csv") {
  auto c = small_config(EnvKind::IidPareto2, {16, 32, 64}, 4);
  c.measure = {Measure::Value, Measure::ScaleSums};
  const auto recs = run_experiment(c);
  const auto s = summarize(c, recs);
  CHECK(s["model"] == "iid-pareto2");
  CHECK(s["replicates"] == 4);
  REQUIRE(s["sizes"].size() == 3);
  CHECK(s["sizes"][1]["n"] == 32);
  CHECK(s["sizes"][1]["count"] == 4);
  CHECK(s["effective_exponent"].contains("p"));
  CHECK(s["variance_table"].contains("unavailable"));

  const auto csv = records_csv(recs);
  CHECK(csv.rfind("model,n,d,replicate,seed,L,transversal,constructed_L,runtime_ms\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 13);
  // Absent optional columns stay empty.
  const auto second = csv.substr(csv.find('\n') + 1);
  CHECK(second.substr(second.find('\n') - 3, 3) == ",,,");

  std::ostringstream scales;
  write_scales_csv(scales, recs);
  const auto text = scales.str();
  CHECK(text.rfind("n,replicate,scale,sum\n", 0) == 0);
  CHECK(text.find("16,0,residual,") != std::string::npos);
}
