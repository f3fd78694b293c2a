#pragma once

// Replicate experiments and the estimators applied to their output.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hlpp/construct.hpp"
#include "hlpp/env.hpp"
#include "hlpp/lpp.hpp"
#include "json.hpp"

namespace hlpp {

enum class Measure { Value, Geodesic, ScaleSums, Transversal, ConstructedPath };

std::string_view measure_name(Measure m) noexcept;
Measure parse_measure(std::string_view name);

struct ExperimentConfig {
  // Template: n and seed are replaced per replicate.
  EnvironmentSpec environment;
  std::vector<std::int64_t> n_list;
  int replicates = 1;
  std::vector<Measure> measure{Measure::Value};  // sorted, unique
  std::optional<ScaleOverride> construction;
  std::uint64_t seed = 0;
  int threads = 1;
  // Fills runtime_ms; off by default so that outputs are byte-reproducible.
  bool timing = false;

  bool wants(Measure m) const noexcept;
  // DomainError for broken invariants, SizeError when some n exceeds the solver guard.
  void validate() const;

  bool operator==(const ExperimentConfig&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
// Strict parse; unknown keys are reported together in one DomainError.
ExperimentConfig experiment_from_json(const nlohmann::json& j);

struct ReplicateRecord {
  std::string model;
  std::int64_t n = 0;
  int d = 1;
  int replicate = 0;
  std::uint64_t seed = 0;
  double L = 0.0;
  std::optional<std::int64_t> transversal;
  std::optional<double> constructed_L;
  std::optional<double> runtime_ms;
  std::optional<ScaleSums> scales;
};

std::uint64_t replicate_seed(std::uint64_t master, std::int64_t n, int index) noexcept;

// Records sorted by (n, replicate); identical at any thread count.
std::vector<ReplicateRecord> run_experiment(const ExperimentConfig& config);

struct ExponentFit {
  double p = 0.0;
  double stderr_p = 0.0;
  double intercept = 0.0;
};

// Least squares of log2(mean/n) on log2 log2 n: the "effective exponent".
ExponentFit fit_log_correction(std::span<const double> ns, std::span<const double> means);

struct TailRow {
  double t = 0.0;
  std::int64_t exceed = 0;
  std::int64_t total = 0;
  double p = 0.0;
  double ci_low = 0.0;   // Wilson 95% interval
  double ci_high = 0.0;
};

// Empirical P(|L - mean| / n > t); needs at least 100 samples.
std::vector<TailRow> concentration_tail(std::span<const double> samples, double n,
                                        std::span<const double> ts);

struct VarianceRow {
  std::int64_t n = 0;
  std::int64_t count = 0;
  double variance = 0.0;
  double variance_se = 0.0;  // jackknife
  double ratio = 0.0;        // variance / n^2
  double ratio_se = 0.0;
};

// Needs at least two sizes with at least 100 samples each.
std::vector<VarianceRow> variance_curve(const std::map<std::int64_t, std::vector<double>>& by_n);
std::vector<VarianceRow> variance_curve(std::span<const ReplicateRecord> records);

double sample_mean(std::span<const double> xs);
// Unbiased (n - 1) variance.
double sample_variance(std::span<const double> xs);
double median(std::vector<double> xs);

nlohmann::json summarize(const ExperimentConfig& config, std::span<const ReplicateRecord> records);

void write_records_csv(std::ostream& os, std::span<const ReplicateRecord> records);
void write_scales_csv(std::ostream& os, std::span<const ReplicateRecord> records);

}  // namespace hlpp
