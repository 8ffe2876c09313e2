#include "fastdraw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

Polyline::Polyline(std::vector<LanePoint> points) : points_(std::move(points)) {
  if (points_.size() < 2) {
    fail(ErrorCode::invalid_annotation, "polyline needs at least 2 points");
  }
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (points_[i].h - points_[i - 1].h != 1) {
      std::ostringstream oss;
      oss << "polyline rows must step by 1 (row " << points_[i - 1].h << " then " << points_[i].h
          << ")";
      fail(ErrorCode::invalid_annotation, oss.str());
    }
    if (!std::isfinite(points_[i].w)) fail(ErrorCode::invalid_annotation, "non-finite column");
  }
  if (!std::isfinite(points_[0].w)) fail(ErrorCode::invalid_annotation, "non-finite column");
}

void validate(const Polyline& lane, ImageSize size) {
  if (lane.size() < 2) fail(ErrorCode::invalid_annotation, "polyline needs at least 2 points");
  for (const auto& p : lane.points()) {
    if (p.h < 0 || p.h >= size.height || p.w < 0.0 || p.w > size.width - 1) {
      std::ostringstream oss;
      oss << "lane point (" << p.h << ", " << p.w << ") outside " << size.height << "x"
          << size.width << " image";
      fail(ErrorCode::invalid_annotation, oss.str());
    }
  }
}

void validate(const AnnotationSet& ann) {
  if (ann.image_size.height <= 0 || ann.image_size.width <= 0) {
    fail(ErrorCode::invalid_annotation, "annotation image size must be positive");
  }
  for (const auto& lane : ann.lanes) validate(lane, ann.image_size);
}

namespace {

double clamp_w(double w, ImageSize size) {
  return std::clamp(w, 0.0, static_cast<double>(size.width - 1));
}

}  // namespace

Polyline resample_unit_rows(const std::vector<std::pair<double, double>>& raw, ImageSize size) {
  if (raw.size() < 2) fail(ErrorCode::invalid_annotation, "need at least 2 raw points");
  for (const auto& [h, w] : raw) {
    if (!std::isfinite(h) || !std::isfinite(w)) {
      fail(ErrorCode::invalid_annotation, "non-finite raw point");
    }
  }
  std::vector<std::pair<double, double>> pts = raw;
  const bool increasing = pts[1].first > pts[0].first;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const double step = pts[i].first - pts[i - 1].first;
    if (increasing ? step <= 0.0 : step >= 0.0) {
      fail(ErrorCode::invalid_annotation, "raw rows must be strictly monotone");
    }
  }
  if (!increasing) std::reverse(pts.begin(), pts.end());

  const int first = std::max(0, static_cast<int>(std::ceil(pts.front().first)));
  const int last = std::min(size.height - 1, static_cast<int>(std::floor(pts.back().first)));
  std::vector<LanePoint> out;
  std::size_t seg = 0;
  for (int h = first; h <= last; ++h) {
    while (seg + 2 < pts.size() && pts[seg + 1].first < h) ++seg;
    const auto& [h0, w0] = pts[seg];
    const auto& [h1, w1] = pts[seg + 1];
    const double t = (h - h0) / (h1 - h0);
    out.push_back({h, clamp_w((1.0 - t) * w0 + t * w1, size)});
  }
  if (out.size() < 2) {
    fail(ErrorCode::invalid_annotation, "lane covers fewer than 2 image rows");
  }
  return Polyline(std::move(out));
}

Polyline affine_adjust(const Polyline& lane, double m, double b, ImageSize size,
                       AdjustAxis axis) {
  if (m == 0.0) fail(ErrorCode::degenerate_transform, "affine scale m must be nonzero");
  if (axis == AdjustAxis::width) {
    std::vector<LanePoint> out;
    out.reserve(lane.size());
    for (const auto& p : lane.points()) out.push_back({p.h, clamp_w(m * p.w + b, size)});
    Polyline result(std::move(out));
    validate(result, size);
    return result;
  }
  std::vector<std::pair<double, double>> raw;
  raw.reserve(lane.size());
  for (const auto& p : lane.points()) raw.emplace_back(m * p.h + b, p.w);
  return resample_unit_rows(raw, size);
}

Polyline rounded(const Polyline& lane) {
  std::vector<LanePoint> out;
  out.reserve(lane.size());
  for (const auto& p : lane.points()) out.push_back({p.h, std::round(p.w)});
  return Polyline(std::move(out));
}

}  // namespace fastdraw
