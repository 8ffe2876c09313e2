#pragma once

#include <array>
#include <optional>
#include <vector>

#include "fastdraw/geometry.hpp"
#include "fastdraw/heads.hpp"

namespace fastdraw {

struct DecodeConfig {
  double p_min = 0.5;                 // lane-probability threshold for seeds
  double cluster_eps = 5.0;           // density-clustering radius in pixels
  int cluster_min_points = 3;         // neighbourhood size (self included) for a core pixel
  double center_mask_fraction = 0.33; // centered column band excluded from seeding
  int max_steps = 1024;               // per drawing direction
  bool seed_isolated = true;          // also draw from pixels the clustering leaves as noise

  void validate() const;
};

struct Seed {
  int h = 0;
  int w = 0;
  float prob = 0.0f;
};

struct DecodedLane {
  Polyline polyline;
  std::vector<double> per_row_std;  // one per polyline point, in pixels
  Seed seed;
};

// Thresholds lane_prob, drops the centered column band, clusters the rest and
// returns the most likely pixel of every cluster, most likely first.
std::vector<Seed> propose_initial_points(const HeadField& field, const DecodeConfig& cfg);

// Greedy up/down drawing from a seed. Returns nullopt when the trail has
// fewer than two rows. Throws seed error when the seed is outside the field.
std::optional<DecodedLane> draw_lane(const HeadField& field, Seed seed, const DecodeConfig& cfg);

// Argmax of a step categorical. Ties go to the smaller |dw|, then to the
// negative step; the end token loses every tie.
int argmax_class(std::span<const float> probs, int L);

// Standard deviation of dw under the categorical at (h, w) in direction d,
// conditioned on not ending. Zero when the non-end mass is below 1e-9.
double uncertainty_at(const HeadField& field, int h, int w, Direction d);

// Draws from every cluster seed, then (with seed_isolated) from noise pixels
// that no kept lane covers. Lanes overlapping a kept lane on more than half
// their rows are dropped.
std::vector<DecodedLane> decode_all(const HeadField& field, const DecodeConfig& cfg);

// Fractions of decode steps whose chosen column lies within <1, <3, <5 px of
// the lane_prob argmax in the next row (searched over the +-L window).
struct AgreementReport {
  static constexpr std::array<int, 3> thresholds = {1, 3, 5};
  std::array<double, 3> fractions{};
  std::array<std::size_t, 3> hits{};
  std::size_t steps = 0;

  AgreementReport& operator+=(const AgreementReport& other);
  void finalize();
};

AgreementReport heuristic_agreement(const HeadField& field, const std::vector<DecodedLane>& lanes);

}  // namespace fastdraw
