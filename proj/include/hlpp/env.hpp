#pragma once

// Random environments: i.i.d. critical heavy tails, the log-corrected variant,
// the branching random walk, and layered Poisson point processes.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace hlpp {

enum class EnvKind { IidPareto2, IidLogCorrected, Brw, PoissonLayers };

std::string_view kind_name(EnvKind kind) noexcept;
// Accepts the CLI spellings: iid-pareto2, iid-logcorrected, brw, poisson.
EnvKind parse_kind(std::string_view name);

struct EnvParams {
  double t0 = 1.0;
  double beta = 1.2;
  std::optional<int> layer_count;

  bool operator==(const EnvParams&) const = default;
};

struct EnvironmentSpec {
  EnvKind kind = EnvKind::IidPareto2;
  std::int64_t n = 0;
  int d = 1;
  EnvParams params;
  std::uint64_t seed = 0;

  // Throws DomainError on any broken invariant.
  void validate() const;

  int dimension() const noexcept { return d + 1; }
  // Lattice points per axis: n + 1 for i.i.d. kinds on [0, n], n for the BRW on [0, n - 1].
  std::int64_t extent() const noexcept { return kind == EnvKind::Brw ? n : n + 1; }

  bool operator==(const EnvironmentSpec&) const = default;
};

nlohmann::json to_json(const EnvironmentSpec& spec);
// Strict: unknown keys and missing required keys are DomainErrors.
EnvironmentSpec environment_from_json(const nlohmann::json& j);

bool is_power_of_two(std::int64_t n) noexcept;
// floor(log2 n) for n >= 1.
int floor_log2(std::int64_t n) noexcept;

// Exact tail P(X > t) = (t0 / t)^2 for t >= t0, by inverse CDF.
double sample_pareto2(double u, double t0 = 1.0);

// min{1, t^-(d+1) (1 + log2 t)^-beta}.
double logcorrected_tail(double t, double beta, int d) noexcept;
// Quantile of the log-corrected law by geometric bisection on the tail.
double sample_logcorrected(double u, double beta, int d);

// Standard normal quantile, Wichura's AS241 (PPND16), ~1e-16 relative accuracy.
double normal_quantile(double p);

// Dyadic scale of a weight: the integer k with n/2^k < x <= n/2^(k-1).
// Weights above 2n receive negative k. Returns nullopt when x <= n/2^k_max.
std::optional<int> scale_of(double x, double n, int k_max);
// Uses k_max = ceil(log2 n), so everything at or below 1 is residual.
std::optional<int> scale_of(double x, double n);
int default_scale_floor(double n) noexcept;

enum class Materialize { Auto, Never, Always };

// Pure map from lattice coordinates to weights. Evaluation depends only on
// (spec, coordinate); a dense copy is kept when the grid is small.
class WeightField {
 public:
  explicit WeightField(EnvironmentSpec spec, Materialize policy = Materialize::Auto);
  // Explicit weights for tests and fixtures; `values` is indexed with x fastest.
  WeightField(EnvironmentSpec spec, std::vector<double> values);

  const EnvironmentSpec& spec() const noexcept { return spec_; }
  int dimension() const noexcept { return dim_; }
  std::int64_t extent() const noexcept { return extent_; }
  bool materialized() const noexcept { return !dense_.empty(); }
  bool custom() const noexcept { return custom_; }

  // Bounds-checked evaluation at any dimension.
  double eval(std::span<const std::int64_t> v) const;

  // Unchecked fast paths for the solvers.
  double operator()(std::int64_t x, std::int64_t y) const noexcept {
    if (!dense_.empty()) return dense_[static_cast<std::size_t>(y * extent_ + x)];
    const std::array<std::int64_t, 2> v{x, y};
    return compute(v);
  }
  double operator()(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    if (!dense_.empty()) return dense_[static_cast<std::size_t>((z * extent_ + y) * extent_ + x)];
    const std::array<std::int64_t, 3> v{x, y, z};
    return compute(v);
  }

  // BRW only: number of levels (log2 n + 1) and the level-k box variable at v.
  int brw_levels() const;
  double brw_component(int level, std::span<const std::int64_t> v) const;

 private:
  double compute(std::span<const std::int64_t> v) const noexcept;
  double iid_weight(std::span<const std::int64_t> v) const noexcept;
  double brw_box_value(int level, std::span<const std::int64_t> v) const noexcept;
  void build_brw_prefix(int levels, std::vector<double>& out) const;
  void materialize();

  EnvironmentSpec spec_;
  int dim_ = 2;
  std::int64_t extent_ = 0;
  int log2n_ = 0;
  bool custom_ = false;
  std::vector<double> dense_;
  // BRW partial sums of the coarsest `coarse_levels_` levels, at the finest of them.
  int coarse_levels_ = 0;
  std::vector<double> coarse_;
};

struct PoissonLayer {
  int k = 0;
  double weight = 0.0;
  std::vector<std::array<double, 2>> points;
};

struct PoissonLayers {
  double n = 0.0;
  std::vector<PoissonLayer> layers;

  std::size_t total_points() const noexcept;
};

// Poisson(mean) many i.i.d. uniform points in [0, side]^2, keyed by (seed, tag).
std::vector<std::array<double, 2>> sample_poisson_points(double side, double mean,
                                                         std::uint64_t seed, std::int64_t tag);

// Layer k has weight n/2^k and Poisson(4^k) uniform points in [0, n]^2.
PoissonLayers gen_poisson_layers(std::int64_t n, int layer_count, std::uint64_t seed);

}  // namespace hlpp
