#include "hlpp/env.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <set>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/poisson_distribution.hpp>

#include "hlpp/error.hpp"
#include "hlpp/hash.hpp"

namespace hlpp {

namespace {

constexpr std::int64_t kMaterializeAutoCells = std::int64_t{1} << 22;
constexpr std::int64_t kMaterializeMaxCells = std::int64_t{1} << 28;
constexpr int kCoarseLog2Cells = 22;

std::int64_t cell_count(std::int64_t extent, int dim) {
  std::int64_t cells = 1;
  for (int i = 0; i < dim; ++i) {
    if (cells > std::numeric_limits<std::int64_t>::max() / std::max<std::int64_t>(extent, 1)) {
      return std::numeric_limits<std::int64_t>::max();
    }
    cells *= extent;
  }
  return cells;
}

double polynomial(const double* c, int degree, double x) {
  double acc = c[degree];
  for (int i = degree - 1; i >= 0; --i) acc = acc * x + c[i];
  return acc;
}

}  // namespace

std::string_view kind_name(EnvKind kind) noexcept {
  switch (kind) {
    case EnvKind::IidPareto2: return "iid-pareto2";
    case EnvKind::IidLogCorrected: return "iid-logcorrected";
    case EnvKind::Brw: return "brw";
    case EnvKind::PoissonLayers: return "poisson";
  }
  return "unknown";
}

EnvKind parse_kind(std::string_view name) {
  if (name == "iid-pareto2") return EnvKind::IidPareto2;
  if (name == "iid-logcorrected") return EnvKind::IidLogCorrected;
  if (name == "brw") return EnvKind::Brw;
  if (name == "poisson") return EnvKind::PoissonLayers;
  throw DomainError("unknown environment kind '" + std::string(name) + "'");
}

bool is_power_of_two(std::int64_t n) noexcept {
  return n > 0 && std::has_single_bit(static_cast<std::uint64_t>(n));
}

int floor_log2(std::int64_t n) noexcept {
  return n <= 0 ? 0 : std::bit_width(static_cast<std::uint64_t>(n)) - 1;
}

void EnvironmentSpec::validate() const {
  if (d < 1) throw DomainError("d must be at least 1");
  if (!(params.t0 >= 1.0) || !std::isfinite(params.t0)) throw DomainError("t0 must be >= 1");
  switch (kind) {
    case EnvKind::IidPareto2:
      if (n < 0) throw DomainError("n must be non-negative");
      break;
    case EnvKind::IidLogCorrected:
      if (n < 0) throw DomainError("n must be non-negative");
      if (!(params.beta > 1.0 && params.beta < (d + 2) / 2.0)) {
        throw DomainError("beta must lie in (1, (d+2)/2)");
      }
      break;
    case EnvKind::Brw:
      if (!is_power_of_two(n)) throw DomainError("brw requires n to be a power of two");
      break;
    case EnvKind::PoissonLayers:
      if (n < 1) throw DomainError("poisson layers require n >= 1");
      if (params.layer_count &&
          (*params.layer_count < 1 || *params.layer_count > floor_log2(n) + 1)) {
        throw DomainError("layer_count must lie in [1, log2 n + 1]");
      }
      break;
  }
}

nlohmann::json to_json(const EnvironmentSpec& spec) {
  nlohmann::json params{{"t0", spec.params.t0}, {"beta", spec.params.beta}};
  if (spec.params.layer_count) params["layer_count"] = *spec.params.layer_count;
  return {{"kind", kind_name(spec.kind)},
          {"n", spec.n},
          {"d", spec.d},
          {"seed", spec.seed},
          {"params", params}};
}

EnvironmentSpec environment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("environment must be a JSON object");
  static const std::set<std::string> top_keys{"kind", "n", "d", "seed", "params"};
  static const std::set<std::string> param_keys{"t0", "beta", "layer_count"};
  std::string bad;
  for (const auto& [key, _] : j.items()) {
    if (!top_keys.count(key)) bad += (bad.empty() ? "" : ", ") + key;
  }
  if (j.contains("params")) {
    if (!j["params"].is_object()) throw DomainError("params must be an object");
    for (const auto& [key, _] : j["params"].items()) {
      if (!param_keys.count(key)) bad += (bad.empty() ? "" : ", ") + ("params." + key);
    }
  }
  if (!bad.empty()) throw DomainError("unknown environment keys: " + bad);
  for (const char* key : {"kind", "n", "seed"}) {
    if (!j.contains(key)) throw DomainError(std::string("missing environment key: ") + key);
  }

  EnvironmentSpec spec;
  try {
    spec.kind = parse_kind(j.at("kind").get<std::string>());
    spec.n = j.at("n").get<std::int64_t>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("d")) spec.d = j.at("d").get<int>();
    if (j.contains("params")) {
      const auto& p = j.at("params");
      if (p.contains("t0")) spec.params.t0 = p.at("t0").get<double>();
      if (p.contains("beta")) spec.params.beta = p.at("beta").get<double>();
      if (p.contains("layer_count")) spec.params.layer_count = p.at("layer_count").get<int>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed environment: ") + e.what());
  }
  spec.validate();
  return spec;
}

double sample_pareto2(double u, double t0) {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("uniform variate must lie in [0, 1)");
  if (!(t0 >= 1.0)) throw DomainError("t0 must be >= 1");
  return t0 / std::sqrt(1.0 - u);
}

double logcorrected_tail(double t, double beta, int d) noexcept {
  if (t <= 1.0) return 1.0;
  return std::min(1.0, std::pow(t, -(d + 1)) * std::pow(1.0 + std::log2(t), -beta));
}

double sample_logcorrected(double u, double beta, int d) {
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("uniform variate must lie in [0, 1)");
  if (d < 1 || !(beta > 1.0 && beta < (d + 2) / 2.0)) {
    throw DomainError("beta must lie in (1, (d+2)/2)");
  }
  const double target = 1.0 - u;
  if (target >= 1.0) return 1.0;
  // tail(t) <= t^-(d+1), so the root is below target^(-1/(d+1)).
  double lo = 1.0;
  double hi = std::pow(target, -1.0 / (d + 1));
  for (int iter = 0; iter < 400; ++iter) {
    if (hi - lo <= 1e-12 * lo) return hi;
    const double mid = std::sqrt(lo * hi);
    const double m = (mid > lo && mid < hi) ? mid : 0.5 * (lo + hi);
    if (logcorrected_tail(m, beta, d) > target) {
      lo = m;
    } else {
      hi = m;
    }
  }
  throw InternalError("log-corrected quantile bisection did not converge");
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal quantile needs p in (0, 1)");
  static constexpr double a[] = {3.3871328727963666080e0,  1.3314166789178437745e+2,
                                 1.9715909503065514427e+3, 1.3731693765509461125e+4,
                                 4.5921953931549871457e+4, 6.7265770927008700853e+4,
                                 3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr double b[] = {1.0,
                                 4.2313330701600911252e+1, 6.8718700749205790830e+2,
                                 5.3941960214247511077e+3, 2.1213794301586595867e+4,
                                 3.9307895800092710610e+4, 2.8729085735721942674e+4,
                                 5.2264952788528545610e+3};
  static constexpr double c[] = {1.42343711074968357734e0,  4.63033784615654529590e0,
                                 5.76949722146069140550e0,  3.64784832476320460504e0,
                                 1.27045825245236838258e0,  2.41780725177450611770e-1,
                                 2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double dd[] = {1.0,
                                  2.05319162663775882187e0,  1.67638483018380384940e0,
                                  6.89767334985100004550e-1, 1.48103976427480074590e-1,
                                  1.51986665636164571966e-2, 5.47593808499534494600e-4,
                                  1.05075007164441684324e-9};
  static constexpr double e[] = {6.65790464350110377720e0,  5.46378491116411436990e0,
                                 1.78482653991729133580e0,  2.96560571828504891230e-1,
                                 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                 2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[] = {1.0,
                                 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                 1.48753612908506148525e-2, 7.86869131145613259100e-4,
                                 1.84631831751005468180e-5, 1.42151175831644588870e-7,
                                 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * polynomial(a, 7, r) / polynomial(b, 7, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = polynomial(c, 7, r) / polynomial(dd, 7, r);
  } else {
    r -= 5.0;
    value = polynomial(e, 7, r) / polynomial(f, 7, r);
  }
  return q < 0.0 ? -value : value;
}

int default_scale_floor(double n) noexcept {
  return n <= 1.0 ? 0 : static_cast<int>(std::ceil(std::log2(n)));
}

std::optional<int> scale_of(double x, double n, int k_max) {
  if (!(x > 0.0)) throw DomainError("scale_of needs a positive weight");
  if (!(n >= 1.0)) throw DomainError("scale_of needs n >= 1");
  if (x <= std::ldexp(n, -k_max)) return std::nullopt;
  int k = static_cast<int>(std::floor(std::log2(2.0 * n / x)));
  // ldexp is exact, so the bucket edges below are compared without rounding.
  while (!(std::ldexp(n, -k) < x)) ++k;
  while (!(x <= std::ldexp(n, 1 - k))) --k;
  return k;
}

std::optional<int> scale_of(double x, double n) {
  return scale_of(x, n, default_scale_floor(n));
}

// ---------------------------------------------------------------------------
// WeightField

WeightField::WeightField(EnvironmentSpec spec, Materialize policy) : spec_(std::move(spec)) {
  spec_.validate();
  if (spec_.kind == EnvKind::PoissonLayers) {
    throw UnsupportedError("poisson layers are a point process, not a lattice field");
  }
  dim_ = spec_.dimension();
  extent_ = spec_.extent();
  log2n_ = spec_.kind == EnvKind::Brw ? floor_log2(spec_.n) : 0;

  const std::int64_t cells = cell_count(extent_, dim_);
  bool want_dense = false;
  switch (policy) {
    case Materialize::Never: break;
    case Materialize::Always:
      if (cells > kMaterializeMaxCells) throw SizeError("field too large to materialize");
      want_dense = true;
      break;
    case Materialize::Auto:
      want_dense = spec_.kind != EnvKind::IidPareto2 && cells <= kMaterializeAutoCells;
      break;
  }
  if (want_dense) {
    materialize();
  } else if (spec_.kind == EnvKind::Brw) {
    coarse_levels_ = std::min(log2n_ + 1, kCoarseLog2Cells / dim_ + 1);
    build_brw_prefix(coarse_levels_, coarse_);
  }
}

WeightField::WeightField(EnvironmentSpec spec, std::vector<double> values)
    : spec_(std::move(spec)), custom_(true) {
  spec_.validate();
  if (spec_.kind == EnvKind::PoissonLayers) {
    throw UnsupportedError("poisson layers are a point process, not a lattice field");
  }
  dim_ = spec_.dimension();
  extent_ = spec_.extent();
  log2n_ = spec_.kind == EnvKind::Brw ? floor_log2(spec_.n) : 0;
  if (static_cast<std::int64_t>(values.size()) != cell_count(extent_, dim_)) {
    throw DomainError("explicit field has the wrong number of values");
  }
  dense_ = std::move(values);
}

double WeightField::iid_weight(std::span<const std::int64_t> v) const noexcept {
  const double u = to_unit_closed_open(keyed_hash(spec_.seed, Stream::IidWeight, v));
  if (spec_.kind == EnvKind::IidPareto2) return spec_.params.t0 / std::sqrt(1.0 - u);
  return sample_logcorrected(u, spec_.params.beta, spec_.d);
}

double WeightField::brw_box_value(int level, std::span<const std::int64_t> box) const noexcept {
  std::uint64_t h = absorb(absorb(mix64(spec_.seed), static_cast<std::uint64_t>(Stream::BrwBox)),
                           static_cast<std::uint64_t>(level));
  for (auto b : box) h = absorb(h, static_cast<std::uint64_t>(b));
  return normal_quantile(to_unit_open(h));
}

void WeightField::build_brw_prefix(int levels, std::vector<double>& out) const {
  std::vector<std::int64_t> box(static_cast<std::size_t>(dim_), 0);
  std::vector<double> cur{brw_box_value(0, box)};
  for (int k = 1; k < levels; ++k) {
    const std::int64_t side = std::int64_t{1} << k;
    const std::int64_t half = side / 2;
    std::vector<double> next(static_cast<std::size_t>(cell_count(side, dim_)));
    std::fill(box.begin(), box.end(), 0);
    for (std::size_t idx = 0; idx < next.size(); ++idx) {
      std::int64_t parent = 0;
      for (int i = dim_ - 1; i >= 0; --i) parent = parent * half + box[i] / 2;
      next[idx] = cur[static_cast<std::size_t>(parent)] + brw_box_value(k, box);
      for (int i = 0; i < dim_; ++i) {
        if (++box[i] < side) break;
        box[i] = 0;
      }
    }
    cur = std::move(next);
  }
  out = std::move(cur);
}

void WeightField::materialize() {
  if (spec_.kind == EnvKind::Brw) {
    build_brw_prefix(log2n_ + 1, dense_);
    return;
  }
  const std::int64_t cells = cell_count(extent_, dim_);
  dense_.resize(static_cast<std::size_t>(cells));
  std::vector<std::int64_t> v(static_cast<std::size_t>(dim_), 0);
  for (std::int64_t idx = 0; idx < cells; ++idx) {
    dense_[static_cast<std::size_t>(idx)] = iid_weight(v);
    for (int i = 0; i < dim_; ++i) {
      if (++v[i] < extent_) break;
      v[i] = 0;
    }
  }
}

double WeightField::compute(std::span<const std::int64_t> v) const noexcept {
  if (spec_.kind != EnvKind::Brw) return iid_weight(v);
  std::array<std::int64_t, 16> box{};
  const int shift = log2n_ - (coarse_levels_ - 1);
  const std::int64_t side = std::int64_t{1} << (coarse_levels_ - 1);
  std::int64_t idx = 0;
  for (int i = dim_ - 1; i >= 0; --i) idx = idx * side + (v[i] >> shift);
  double total = coarse_[static_cast<std::size_t>(idx)];
  for (int k = coarse_levels_; k <= log2n_; ++k) {
    for (int i = 0; i < dim_; ++i) box[i] = v[i] >> (log2n_ - k);
    total += brw_box_value(k, std::span<const std::int64_t>(box.data(), dim_));
  }
  return total;
}

double WeightField::eval(std::span<const std::int64_t> v) const {
  if (static_cast<int>(v.size()) != dim_) throw DomainError("coordinate has the wrong dimension");
  for (auto c : v) {
    if (c < 0 || c >= extent_) throw DomainError("coordinate outside the grid");
  }
  if (!dense_.empty()) {
    std::int64_t idx = 0;
    for (int i = dim_ - 1; i >= 0; --i) idx = idx * extent_ + v[i];
    return dense_[static_cast<std::size_t>(idx)];
  }
  return compute(v);
}

int WeightField::brw_levels() const {
  if (spec_.kind != EnvKind::Brw) throw UnsupportedError("not a branching random walk");
  return log2n_ + 1;
}

double WeightField::brw_component(int level, std::span<const std::int64_t> v) const {
  if (spec_.kind != EnvKind::Brw || custom_) {
    throw UnsupportedError("box components exist only for generated brw fields");
  }
  if (level < 0 || level > log2n_) throw DomainError("brw level out of range");
  if (static_cast<int>(v.size()) != dim_) throw DomainError("coordinate has the wrong dimension");
  std::array<std::int64_t, 16> box{};
  for (int i = 0; i < dim_; ++i) {
    if (v[i] < 0 || v[i] >= extent_) throw DomainError("coordinate outside the grid");
    box[i] = v[i] >> (log2n_ - level);
  }
  return brw_box_value(level, std::span<const std::int64_t>(box.data(), dim_));
}

// ---------------------------------------------------------------------------
// Poisson layers

std::size_t PoissonLayers::total_points() const noexcept {
  std::size_t total = 0;
  for (const auto& layer : layers) total += layer.points.size();
  return total;
}

std::vector<std::array<double, 2>> sample_poisson_points(double side, double mean,
                                                         std::uint64_t seed, std::int64_t tag) {
  if (!(side > 0.0) || !(mean >= 0.0)) throw DomainError("poisson sampling needs side > 0, mean >= 0");
  boost::random::mt19937_64 engine(keyed_hash(seed, Stream::PoissonLayer, {tag}));
  std::int64_t count = 0;
  if (mean > 0.0) {
    boost::random::poisson_distribution<std::int64_t, double> poisson(mean);
    count = poisson(engine);
  }
  std::vector<std::array<double, 2>> points(static_cast<std::size_t>(count));
  for (auto& p : points) {
    p[0] = to_unit_closed_open(engine()) * side;
    p[1] = to_unit_closed_open(engine()) * side;
  }
  return points;
}

PoissonLayers gen_poisson_layers(std::int64_t n, int layer_count, std::uint64_t seed) {
  if (n < 1) throw DomainError("poisson layers require n >= 1");
  if (layer_count < 1 || layer_count > floor_log2(n) + 1) {
    throw DomainError("layer_count must lie in [1, log2 n + 1]");
  }
  PoissonLayers out;
  out.n = static_cast<double>(n);
  out.layers.reserve(static_cast<std::size_t>(layer_count));
  for (int k = 0; k < layer_count; ++k) {
    PoissonLayer layer;
    layer.k = k;
    layer.weight = std::ldexp(static_cast<double>(n), -k);
    layer.points = sample_poisson_points(out.n, std::ldexp(1.0, 2 * k), seed, k);
    out.layers.push_back(std::move(layer));
  }
  return out;
}

}  // namespace hlpp
