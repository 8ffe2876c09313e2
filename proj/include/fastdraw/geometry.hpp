#pragma once

#include <string>
#include <utility>
#include <vector>

namespace fastdraw {

struct ImageSize {
  int height = 0;
  int width = 0;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;
};

// One sample of a lane: integer row, sub-pixel column.
struct LanePoint {
  int h = 0;
  double w = 0.0;

  friend bool operator==(const LanePoint&, const LanePoint&) = default;
};

// A lane as a function of the row index. Rows increase by exactly one between
// consecutive points and the polyline always has at least two points.
class Polyline {
 public:
  Polyline() = default;
  // Validates the unit-row invariant; throws invalid_annotation otherwise.
  explicit Polyline(std::vector<LanePoint> points);

  const std::vector<LanePoint>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }
  const LanePoint& operator[](std::size_t i) const { return points_[i]; }
  const LanePoint& front() const { return points_.front(); }
  const LanePoint& back() const { return points_.back(); }

  int top_row() const { return points_.back().h; }
  int bottom_row() const { return points_.front().h; }
  bool covers_row(int h) const {
    return !points_.empty() && h >= points_.front().h && h <= points_.back().h;
  }
  // Column at row h; requires covers_row(h).
  double w_at(int h) const { return points_[static_cast<std::size_t>(h - points_.front().h)].w; }

  friend bool operator==(const Polyline&, const Polyline&) = default;

 private:
  std::vector<LanePoint> points_;
};

struct AnnotationSet {
  std::string image_id;
  ImageSize image_size;
  std::vector<Polyline> lanes;
};

// Throws invalid_annotation if any point lies outside the image.
void validate(const Polyline& lane, ImageSize size);
void validate(const AnnotationSet& ann);

// Linear interpolation at every integer row covered by the raw samples (and
// inside the image), columns clamped to [0, width - 1]. Raw rows may be given
// in increasing or decreasing order but must be strictly monotone.
Polyline resample_unit_rows(const std::vector<std::pair<double, double>>& raw, ImageSize size);

enum class AdjustAxis { width, height };

// w* = m * w + b on the chosen coordinate, re-clamped to the image. With the
// height axis the lane is re-sampled onto unit rows after the transform.
Polyline affine_adjust(const Polyline& lane, double m, double b, ImageSize size,
                       AdjustAxis axis = AdjustAxis::width);

// Rounds every column to the nearest integer pixel.
Polyline rounded(const Polyline& lane);

}  // namespace fastdraw
