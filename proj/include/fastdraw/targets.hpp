#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastdraw/geometry.hpp"
#include "fastdraw/heads.hpp"

namespace fastdraw {

struct PerturbConfig {
  double sigma = 2.0;  // std of the column offset noise, pixels
  int copies = 2;      // perturbed replicas per lane point
  int L = 6;

  void validate() const;
};

// Supervision for one image. Index grids hold class indices in [0, 2L+1] or
// kIgnore where no sequence target exists.
struct TargetSet {
  static constexpr std::int16_t kIgnore = -1;

  std::string image_id;
  int height = 0;
  int width = 0;
  int L = 0;
  std::vector<std::uint8_t> mask;      // H x W, 0/1
  std::vector<std::int16_t> up_idx;    // H x W
  std::vector<std::int16_t> down_idx;  // H x W

  std::size_t at(int h, int w) const { return static_cast<std::size_t>(h) * width + w; }
  std::size_t supervised_count() const;
};

// Rasterized mask plus perturbed step targets that point from offset pixels
// back to the lane in the adjacent row. Unperturbed lane targets are written
// last so they win every collision.
TargetSet build_targets(const AnnotationSet& ann, const PerturbConfig& cfg, std::uint64_t rng_seed);

// Ideal head field for `ann`: lane_prob 1 on rounded lane pixels, point-mass
// steps along each lane, end tokens at lane ends and everywhere off-lane.
// Throws unsupported_slope if any rounded step exceeds L.
HeadField oracle_field(const AnnotationSet& ann, int L);

// Serialized as an H x W x 3 FDT1 tensor [mask | up | down], IGNORE = -1.
RawTensor to_raw_tensor(const TargetSet& targets);
TargetSet targets_from_raw_tensor(const RawTensor& tensor);

}  // namespace fastdraw
