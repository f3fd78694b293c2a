#pragma once

// Constructive lower-bound paths: the multi-scale cylinder construction for
// critical heavy tails and the up/down-skeleton tree for the branching random walk.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "hlpp/env.hpp"
#include "hlpp/lpp.hpp"

namespace hlpp {

enum class ParamSource { PaperAsymptotic, DeskOverride };

struct MultiScaleParams {
  int s = 1;
  int M = 0;
  double lambda = 1.0;
  double rho = 1.0;
  ParamSource source = ParamSource::PaperAsymptotic;
  // Set when M = 0: no level is ever built and an override is required.
  bool degenerate = false;

  // Cylinder width rho / lambda^2.
  double r() const noexcept { return rho / (lambda * lambda); }
};

struct ScaleOverride {
  int s = 1;
  int M = 1;

  bool operator==(const ScaleOverride&) const = default;
};

// s = round(100 log2 log2 n), M = floor(log2 n / (10 s)), lambda = (log2 n)^(1/4),
// rho = (log2 log2 n)^(1/2). An override keeps lambda and rho but replaces (s, M);
// M s > log2 n - 2 is InfeasibleError.
MultiScaleParams heavy_params(std::int64_t n, std::optional<ScaleOverride> override = {});
// s = 2, M = floor(log2 n / 4): (2, 4) at n = 2^16.
ScaleOverride desk_preset(std::int64_t n);

struct LevelRect {
  Site lower{};
  Site upper{};
  std::int64_t parent = -1;  // index into the previous level's rectangles
  std::int64_t m = 0;        // sub-rectangles along the diagonal when this rectangle was refined
};

struct LevelSets {
  std::int64_t n = 0;
  // vertices[l] is the ordered set V^(l), l = 0..M.
  std::vector<std::vector<Site>> vertices;
  // rects[l] are the rectangles between consecutive vertices of V^(l).
  std::vector<std::vector<LevelRect>> rects;
  // scanned[l] / hit[l]: cylinders examined / occupied while building V^(l+1).
  std::vector<std::int64_t> scanned;
  std::vector<std::int64_t> hit;
};

struct HeavyConstruction {
  DirectedPath path;
  LevelSets levels;
};

// Requires an i.i.d. field with d = 1 and M >= 1. Throws DegenerateError when
// every rectangle of some level has m = 0.
HeavyConstruction build_heavy_path(const WeightField& field, const MultiScaleParams& params);

// Leftmost (up first, then right) staircase through the ordered vertices.
DirectedPath leftmost_completion(const std::vector<Site>& ordered, std::int64_t extent);

struct AprioriCheck {
  int level = 0;
  std::size_t index = 0;
  bool area = false;
  bool slope_step = false;  // ratio to the parent within (1 + 2r)^(+-1)
  bool slope_iterated = false;
};

struct AprioriReport {
  std::vector<AprioriCheck> checks;

  bool all_ok() const noexcept;
};

// Area >= lambda^2 n^2 / 2^(2 l s) and the slope bounds, with 1e-9 slack.
// Level 0 holds only the root square and is checked against area n^2 and slope 1.
AprioriReport verify_apriori(const LevelSets& levels, const MultiScaleParams& params);

struct LevelHitStats {
  int level = 0;  // the level being built
  std::int64_t scanned = 0;
  std::int64_t hit = 0;
  std::optional<double> fraction;  // absent when nothing was scanned
};

std::vector<LevelHitStats> cylinder_hit_stats(const LevelSets& levels);
std::vector<LevelHitStats> cylinder_hit_stats(const WeightField& field,
                                              const MultiScaleParams& params);
inline constexpr double kHitBenchmark = 1.0 / 8.0;

struct SkeletonChoice {
  int level = 0;
  Site corner{};
  std::int64_t side = 0;
  bool up = true;
  double gain = 0.0;
  double alternative_gain = 0.0;
};

struct BrwConstruction {
  int s = 1;
  int M = 0;
  DirectedPath path;
  std::vector<Site> skeleton;                    // ordered union of chosen skeleton points
  std::vector<SkeletonChoice> choices;           // levels 0..M-1
  std::vector<std::int64_t> squares_per_level;   // slope-1 squares at levels 0..M
  double L1 = 0.0;  // box components at levels l s, l = 1..M, summed along the path
  double L2 = 0.0;  // path weight - L1
  double weight = 0.0;
};

// M = floor(log2 n / s); s > log2 n is DegenerateError.
BrwConstruction build_brw_path(const WeightField& field, int s);

// Standard deviation of one skeleton sum at a level whose boxes have side b.
double skeleton_sum_sd(std::int64_t box_side, int s) noexcept;

enum class ReferenceModel { Heavy, Brw, LogCorrected };
ReferenceModel parse_reference_model(std::string_view name);

// Growth shape with unit constant, for normalisation only.
double reference_bound(double n, ReferenceModel model, double beta = 1.2, int d = 1);

void write_level_sets_csv(std::ostream& os, const LevelSets& levels, const WeightField& field);
void write_skeleton_choices_csv(std::ostream& os, const std::vector<SkeletonChoice>& choices);

}  // namespace hlpp
