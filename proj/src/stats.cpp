#include "hlpp/stats.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "hlpp/error.hpp"
#include "hlpp/format.hpp"
#include "hlpp/hash.hpp"

namespace hlpp {

namespace {

constexpr double kWilsonZ = 1.959963984540054;
constexpr std::size_t kMinTailSamples = 100;
constexpr std::int64_t kMinVarianceSamples = 100;

bool lattice_kind(EnvKind k) { return k != EnvKind::PoissonLayers; }
bool iid_kind(EnvKind k) { return k == EnvKind::IidPareto2 || k == EnvKind::IidLogCorrected; }

EnvironmentSpec spec_for(const ExperimentConfig& config, std::int64_t n, std::uint64_t seed) {
  EnvironmentSpec spec = config.environment;
  spec.n = n;
  spec.seed = seed;
  return spec;
}

ReplicateRecord run_replicate(const ExperimentConfig& config, std::int64_t n, int index) {
  const auto start = std::chrono::steady_clock::now();
  ReplicateRecord rec;
  rec.model = std::string(kind_name(config.environment.kind));
  rec.n = n;
  rec.d = config.environment.d;
  rec.replicate = index;
  rec.seed = replicate_seed(config.seed, n, index);
  const EnvironmentSpec spec = spec_for(config, n, rec.seed);

  if (spec.kind == EnvKind::PoissonLayers) {
    const int layers = spec.params.layer_count.value_or(floor_log2(n) + 1);
    const auto pl = gen_poisson_layers(n, layers, spec.seed);
    rec.L = poisson_last_passage(pl);
    if (config.wants(Measure::ScaleSums)) rec.scales = poisson_chain_composition(pl);
  } else {
    const WeightField field(spec);
    const bool need_path = config.wants(Measure::Geodesic) ||
                           config.wants(Measure::ScaleSums) || config.wants(Measure::Transversal);
    if (need_path) {
      auto result = geodesic(field);
      rec.L = result.value;
      if (config.wants(Measure::ScaleSums)) rec.scales = result.scale_sums;
      if (config.wants(Measure::Transversal)) rec.transversal = result.transversal;
    } else {
      rec.L = last_passage(field, 1);
    }
    if (config.wants(Measure::ConstructedPath)) {
      if (spec.kind == EnvKind::Brw) {
        const int s = config.construction ? config.construction->s : 2;
        rec.constructed_L = build_brw_path(field, s).weight;
      } else {
        const auto params =
            heavy_params(n, config.construction ? *config.construction : desk_preset(n));
        rec.constructed_L = path_weight(build_heavy_path(field, params).path, field);
      }
      if (*rec.constructed_L > rec.L) {
        throw InternalError("constructed path outweighs the last passage value");
      }
    }
  }
  if (config.timing) {
    rec.runtime_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                               start).count();
  }
  return rec;
}

std::string optional_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::string_view measure_name(Measure m) noexcept {
  switch (m) {
    case Measure::Value: return "value";
    case Measure::Geodesic: return "geodesic";
    case Measure::ScaleSums: return "scale_sums";
    case Measure::Transversal: return "transversal";
    case Measure::ConstructedPath: return "constructed_path";
  }
  return "unknown";
}

Measure parse_measure(std::string_view name) {
  for (auto m : {Measure::Value, Measure::Geodesic, Measure::ScaleSums, Measure::Transversal,
                 Measure::ConstructedPath}) {
    if (measure_name(m) == name) return m;
  }
  throw DomainError("unknown measure '" + std::string(name) + "'");
}

bool ExperimentConfig::wants(Measure m) const noexcept {
  return std::find(measure.begin(), measure.end(), m) != measure.end();
}

void ExperimentConfig::validate() const {
  if (n_list.empty()) throw DomainError("n_list must not be empty");
  for (std::size_t i = 1; i < n_list.size(); ++i) {
    if (n_list[i] <= n_list[i - 1]) throw DomainError("n_list must be strictly increasing");
  }
  if (replicates < 1) throw DomainError("replicates must be at least 1");
  if (threads < 1) throw DomainError("threads must be at least 1");
  if (measure.empty()) throw DomainError("measure must not be empty");
  const EnvKind kind = environment.kind;
  if (!lattice_kind(kind)) {
    for (auto m : {Measure::Geodesic, Measure::Transversal, Measure::ConstructedPath}) {
      if (wants(m)) {
        throw DomainError("measure '" + std::string(measure_name(m)) +
                          "' is not available for poisson layers");
      }
    }
  }
  if (wants(Measure::Transversal) && environment.d != 1) {
    throw DomainError("transversal needs d = 1");
  }
  if (wants(Measure::ConstructedPath) && environment.d != 1) {
    throw DomainError("constructed_path needs d = 1");
  }
  for (auto n : n_list) {
    const EnvironmentSpec spec = spec_for(*this, n, seed);
    spec.validate();
    if (lattice_kind(kind)) check_dp_budget(spec);
    if (wants(Measure::ConstructedPath)) {
      if (iid_kind(kind)) {
        heavy_params(n, construction ? *construction : desk_preset(n));
      } else if (construction && construction->s > floor_log2(n)) {
        throw DegenerateError("degenerate: s exceeds log2 n at n = " + std::to_string(n));
      }
    }
  }
}

nlohmann::json to_json(const ExperimentConfig& config) {
  nlohmann::json measures = nlohmann::json::array();
  for (auto m : config.measure) measures.push_back(measure_name(m));
  nlohmann::json j{{"environment", to_json(config.environment)},
                   {"n_list", config.n_list},
                   {"replicates", config.replicates},
                   {"measure", measures},
                   {"seed", config.seed},
                   {"threads", config.threads},
                   {"timing", config.timing}};
  if (config.construction) {
    j["construction"] = {{"s", config.construction->s}, {"M", config.construction->M}};
  }
  return j;
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("experiment config must be a JSON object");
  static const std::set<std::string> keys{"environment", "n_list",  "replicates", "measure",
                                          "construction", "seed",   "threads",    "timing"};
  std::string bad;
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (j.contains("construction") && j["construction"].is_object()) {
    for (const auto& [key, _] : j["construction"].items()) {
      if (key != "s" && key != "M") bad += (bad.empty() ? "" : ", ") + ("construction." + key);
    }
  }
  if (!bad.empty()) throw DomainError("unknown config keys: " + bad);
  for (const char* key : {"environment", "n_list", "replicates", "seed"}) {
    if (!j.contains(key)) throw DomainError(std::string("missing config key: ") + key);
  }

  ExperimentConfig config;
  try {
    config.n_list = j.at("n_list").get<std::vector<std::int64_t>>();
    config.replicates = j.at("replicates").get<int>();
    config.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) config.threads = j.at("threads").get<int>();
    if (j.contains("timing")) config.timing = j.at("timing").get<bool>();
    if (j.contains("measure")) {
      std::set<Measure> ms;
      for (const auto& m : j.at("measure")) ms.insert(parse_measure(m.get<std::string>()));
      config.measure.assign(ms.begin(), ms.end());
    }
    if (j.contains("construction")) {
      const auto& c = j.at("construction");
      if (!c.is_object() || !c.contains("s") || !c.contains("M")) {
        throw DomainError("construction needs both s and M");
      }
      config.construction = ScaleOverride{c.at("s").get<int>(), c.at("M").get<int>()};
    }
    nlohmann::json env = j.at("environment");
    if (!env.is_object()) throw DomainError("environment must be a JSON object");
    if (!env.contains("n") && !config.n_list.empty()) env["n"] = config.n_list.front();
    if (!env.contains("seed")) env["seed"] = config.seed;
    config.environment = environment_from_json(env);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed config: ") + e.what());
  }
  config.validate();
  return config;
}

std::uint64_t replicate_seed(std::uint64_t master, std::int64_t n, int index) noexcept {
  return keyed_hash(master, Stream::Replicate, {n, static_cast<std::int64_t>(index)});
}

std::vector<ReplicateRecord> run_experiment(const ExperimentConfig& config) {
  config.validate();
  std::vector<std::pair<std::int64_t, int>> tasks;
  for (auto n : config.n_list) {
    for (int r = 0; r < config.replicates; ++r) tasks.emplace_back(n, r);
  }
  std::vector<ReplicateRecord> records(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::size_t error_task = tasks.size();
  std::exception_ptr error;

  // Largest sizes first keeps the pool busy until the end.
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      const std::size_t slot = tasks.size() - 1 - t;
      try {
        records[slot] = run_replicate(config, tasks[slot].first, tasks[slot].second);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (slot < error_task) {
          error_task = slot;
          error = std::current_exception();
        }
      }
    }
  };
  const int workers = std::max(1, std::min<int>(config.threads, static_cast<int>(tasks.size())));
  {
    std::vector<std::jthread> pool;
    for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
    worker();
  }
  if (error) std::rethrow_exception(error);
  return records;
}

ExponentFit fit_log_correction(std::span<const double> ns, std::span<const double> means) {
  if (ns.size() != means.size()) throw DomainError("ns and means differ in length");
  if (ns.size() < 3) throw DomainError("fit needs at least three sizes");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (!(ns[i] > 2.0)) throw DomainError("fit needs n > 2");
    if (!(means[i] > 0.0)) throw DomainError("fit needs positive means");
    xs.push_back(std::log2(std::log2(ns[i])));
    ys.push_back(std::log2(means[i] / ns[i]));
  }
  const double k = static_cast<double>(xs.size());
  const double mx = sample_mean(xs);
  const double my = sample_mean(ys);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("fit design is degenerate: all sizes equal");
  ExponentFit fit;
  fit.p = sxy / sxx;
  fit.intercept = my - fit.p * mx;
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - fit.intercept - fit.p * xs[i];
    ssr += e * e;
  }
  fit.stderr_p = std::sqrt(ssr / (k - 2.0) / sxx);
  return fit;
}

double sample_mean(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean of an empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) throw DomainError("variance needs at least two samples");
  const double m = sample_mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / static_cast<double>(xs.size() - 1);
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw DomainError("median of an empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t h = xs.size() / 2;
  return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

std::vector<TailRow> concentration_tail(std::span<const double> samples, double n,
                                        std::span<const double> ts) {
  if (samples.size() < kMinTailSamples) throw DomainError("concentration_tail needs >= 100 samples");
  if (!(n > 0.0)) throw DomainError("n must be positive");
  const double m = sample_mean(samples);
  std::vector<TailRow> rows;
  for (double t : ts) {
    TailRow row;
    row.t = t;
    row.total = static_cast<std::int64_t>(samples.size());
    for (double x : samples) {
      if (std::fabs(x - m) / n > t) ++row.exceed;
    }
    const double total = static_cast<double>(row.total);
    row.p = static_cast<double>(row.exceed) / total;
    const double z2 = kWilsonZ * kWilsonZ;
    const double centre = (row.p + z2 / (2.0 * total)) / (1.0 + z2 / total);
    const double half = kWilsonZ / (1.0 + z2 / total) *
                        std::sqrt(row.p * (1.0 - row.p) / total + z2 / (4.0 * total * total));
    row.ci_low = std::max(0.0, centre - half);
    row.ci_high = std::min(1.0, centre + half);
    rows.push_back(row);
  }
  return rows;
}

std::vector<VarianceRow> variance_curve(const std::map<std::int64_t, std::vector<double>>& by_n) {
  if (by_n.size() < 2) throw DomainError("variance_curve needs at least two sizes");
  std::vector<VarianceRow> rows;
  for (const auto& [n, xs] : by_n) {
    const auto count = static_cast<std::int64_t>(xs.size());
    if (count < kMinVarianceSamples) {
      throw DomainError("variance_curve needs >= 100 replicates at n = " + std::to_string(n));
    }
    const double N = static_cast<double>(count);
    const double m = sample_mean(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    VarianceRow row;
    row.n = n;
    row.count = count;
    row.variance = ss / (N - 1.0);
    // Leave-one-out variances from the running sums.
    std::vector<double> loo(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const double dev = xs[i] - m;
      loo[i] = (ss - dev * dev * N / (N - 1.0)) / (N - 2.0);
    }
    const double loo_mean = sample_mean(loo);
    double acc = 0.0;
    for (double v : loo) acc += (v - loo_mean) * (v - loo_mean);
    row.variance_se = std::sqrt((N - 1.0) / N * acc);
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    row.ratio = row.variance / n2;
    row.ratio_se = row.variance_se / n2;
    rows.push_back(row);
  }
  return rows;
}

std::vector<VarianceRow> variance_curve(std::span<const ReplicateRecord> records) {
  std::map<std::int64_t, std::vector<double>> by_n;
  for (const auto& r : records) by_n[r.n].push_back(r.L);
  return variance_curve(by_n);
}

nlohmann::json summarize(const ExperimentConfig& config, std::span<const ReplicateRecord> records) {
  std::map<std::int64_t, std::vector<const ReplicateRecord*>> by_n;
  for (const auto& r : records) by_n[r.n].push_back(&r);

  nlohmann::json sizes = nlohmann::json::array();
  std::vector<double> ns;
  std::vector<double> means;
  for (const auto& [n, recs] : by_n) {
    std::vector<double> ls;
    std::vector<double> constructed;
    for (const auto* r : recs) {
      ls.push_back(r->L);
      if (r->constructed_L) constructed.push_back(*r->constructed_L);
    }
    const double nd = static_cast<double>(n);
    nlohmann::json row{{"n", n}, {"count", ls.size()}, {"mean_L", sample_mean(ls)}};
    row["var_L"] = ls.size() >= 2 ? nlohmann::json(sample_variance(ls)) : nlohmann::json();
    row["mean_L_over_n"] = sample_mean(ls) / nd;
    if (n >= 2) {
      std::vector<double> normalised;
      for (double l : ls) normalised.push_back(l / (nd * std::log2(nd)));
      row["median_L_over_n_log2n"] = median(normalised);
    }
    if (!constructed.empty()) row["mean_constructed_L"] = sample_mean(constructed);
    sizes.push_back(row);
    ns.push_back(nd);
    means.push_back(sample_mean(ls));
  }

  nlohmann::json summary{{"model", kind_name(config.environment.kind)},
                         {"d", config.environment.d},
                         {"replicates", config.replicates},
                         {"sizes", sizes}};
  try {
    const auto fit = fit_log_correction(ns, means);
    summary["effective_exponent"] = {{"p", fit.p},
                                     {"stderr", fit.stderr_p},
                                     {"intercept", fit.intercept},
                                     {"regression", "log2(mean_L/n) on log2(log2(n))"}};
  } catch (const DomainError& e) {
    summary["effective_exponent"] = {{"unavailable", e.what()}};
  }
  try {
    nlohmann::json table = nlohmann::json::array();
    for (const auto& row : variance_curve(records)) {
      table.push_back({{"n", row.n},
                       {"count", row.count},
                       {"var", row.variance},
                       {"var_se", row.variance_se},
                       {"var_over_n2", row.ratio},
                       {"var_over_n2_se", row.ratio_se}});
    }
    summary["variance_table"] = table;
  } catch (const DomainError& e) {
    summary["variance_table"] = {{"unavailable", e.what()}};
  }
  return summary;
}

void write_records_csv(std::ostream& os, std::span<const ReplicateRecord> records) {
  os << "model,n,d,replicate,seed,L,transversal,constructed_L,runtime_ms\n";
  for (const auto& r : records) {
    os << r.model << ',' << r.n << ',' << r.d << ',' << r.replicate << ',' << r.seed << ','
       << format_double(r.L) << ',';
    if (r.transversal) os << *r.transversal;
    os << ',' << optional_field(r.constructed_L) << ',' << optional_field(r.runtime_ms) << '\n';
  }
}

void write_scales_csv(std::ostream& os, std::span<const ReplicateRecord> records) {
  os << "n,replicate,scale,sum\n";
  for (const auto& r : records) {
    if (!r.scales) continue;
    for (const auto& [k, s] : r.scales->by_scale) {
      os << r.n << ',' << r.replicate << ',' << k << ',' << format_double(s) << '\n';
    }
    os << r.n << ',' << r.replicate << ",residual," << format_double(r.scales->residual) << '\n';
  }
}

}  // namespace hlpp
