#pragma once

// Exact last passage solvers and geodesic diagnostics.
//
// Lattice solvers run the recurrence L(v) = X(v) + max_i L(v - e_i) with O(n^d)
// live memory. Geodesics break ties toward the horizontal predecessor (x - 1)
// at every backtrack step, which yields the upper-left-most maximizer.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "hlpp/env.hpp"

namespace hlpp {

using Site = std::array<std::int64_t, 3>;

struct DirectedPath {
  int dim = 2;
  std::vector<Site> vertices;

  std::size_t size() const noexcept { return vertices.size(); }
};

// Checks unit steps, the origin start and the far-corner end; throws DomainError.
void validate_path(const DirectedPath& path, std::int64_t extent);
bool is_valid_path(const DirectedPath& path, std::int64_t extent) noexcept;

// Plain left-to-right sum of the weights along the path.
double path_weight(const DirectedPath& path, const WeightField& field);

struct ScaleSums {
  std::map<int, double> by_scale;
  double residual = 0.0;

  double total() const noexcept;
};

struct PassageResult {
  double value = 0.0;
  std::optional<DirectedPath> geodesic;
  std::optional<ScaleSums> scale_sums;
  std::optional<std::int64_t> transversal;
};

// Size guard: n <= 2^15 for d = 1, n <= 2^8 for d = 2; other d unsupported.
void check_dp_budget(const EnvironmentSpec& spec);

// Value-only sweep. threads > 1 runs a tiled anti-diagonal wavefront whose
// result is bit-identical to the sequential sweep.
double last_passage(const WeightField& field, int threads = 1);

// Maximizing path plus its scale decomposition (and transversal fluctuation when d = 1).
// Grids above 2^12 in d = 1 are recovered by divide and conquer in O(n) memory.
PassageResult geodesic(const WeightField& field);

// L(u; v) over the sub-box spanned by u <= v.
double passage_between(const WeightField& field, const Site& u, const Site& v);

// Per-scale sums of the weights on the path, bucketed by scale_of(X, n).
// Non-positive weights and weights at or below 1 land in the residual bucket.
ScaleSums scale_decomposition(const DirectedPath& path, const WeightField& field);

// Path vertices with weight above the threshold, always keeping both endpoints.
std::vector<Site> skeleton(const DirectedPath& path, const WeightField& field, double threshold);

std::int64_t transversal_fluctuation(const DirectedPath& path);

struct ChainPoint {
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;
};

struct ChainResult {
  double value = 0.0;
  std::vector<std::size_t> chain;  // indices into the input, in increasing order
};

// Maximum total weight of a chain strictly increasing in both coordinates,
// O(N log N) by sorting on x and a max-Fenwick tree over ranked y.
ChainResult max_weight_chain(std::span<const ChainPoint> points);

// Guarded at 1e7 points.
double poisson_last_passage(const PoissonLayers& layers);
// Same maximum with the per-layer composition of a maximizing chain.
ScaleSums poisson_chain_composition(const PoissonLayers& layers);

void write_path_csv(std::ostream& os, const DirectedPath& path);
void write_scale_csv(std::ostream& os, const ScaleSums& sums);

}  // namespace hlpp
