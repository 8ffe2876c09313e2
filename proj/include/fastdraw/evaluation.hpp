#pragma once

#include <utility>
#include <vector>

#include "fastdraw/decoder.hpp"
#include "fastdraw/geometry.hpp"
#include "fastdraw/heads.hpp"

namespace fastdraw {

// Tusimple-style constants scaled from the reference resolutions.
double tusimple_point_tolerance(int image_width);  // 20 px at 1280 wide
double culane_stroke_width(int image_width);       // 30 px at 1640 wide

struct LaneMatch {
  int pred = -1;
  int gt = -1;
  int correct_points = 0;
  bool true_positive = false;
};

struct TusimpleResult {
  double accuracy = 1.0;
  double fp = 0.0;
  double fn = 0.0;
  std::vector<LaneMatch> matching;

  // Raw counts, for pooling over a dataset.
  std::size_t correct_points = 0;
  std::size_t gt_points = 0;
  std::size_t pred_lanes = 0;
  std::size_t gt_lanes = 0;
  std::size_t true_positives = 0;
};

// A predicted point is correct when |w_pred - w_gt| <= pt_tol_px at the same
// row. Lanes are matched one-to-one, greedily by correct-point count (ties by
// gt index, then prediction index); a match is a true positive when at least
// lane_tol_frac of the gt lane's points are correct.
TusimpleResult tusimple_score(const std::vector<Polyline>& pred, const AnnotationSet& gt,
                              double pt_tol_px, double lane_tol_frac = 0.85);

struct IouResult {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  std::vector<std::pair<int, int>> matching;  // (pred, gt)
  std::size_t pred_lanes = 0;
  std::size_t gt_lanes = 0;
  std::size_t true_positives = 0;
};

// Lanes rasterized as stroke_width_px-wide horizontal spans per row; matched
// one-to-one greedily by IoU when IoU > iou_threshold.
IouResult iou_f1(const std::vector<Polyline>& pred, const AnnotationSet& gt,
                 double stroke_width_px, double iou_threshold = 0.5);

// Dataset pooling of per-image results.
struct MetricTotals {
  std::size_t correct_points = 0;
  std::size_t gt_points = 0;
  std::size_t pred_lanes = 0;
  std::size_t gt_lanes = 0;
  std::size_t tusimple_tp = 0;
  std::size_t iou_tp = 0;
  std::size_t images = 0;

  void add(const TusimpleResult& r);
  void add(const IouResult& r);
  double accuracy() const;
  double fp_rate() const;
  double fn_rate() const;
  double precision() const { return 1.0 - fp_rate(); }
  double recall() const { return 1.0 - fn_rate(); }
  double f1() const;
  double iou_precision() const;
  double iou_recall() const;
  double iou_f1() const;
};

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct LaneMetrics {
  double accuracy = 0.0;
  double fp_rate = 0.0;
  double fn_rate = 0.0;
  double iou_f1 = 0.0;
  std::vector<PrPoint> pr_curve;
};

struct EvalSample {
  const HeadField* field = nullptr;
  const AnnotationSet* gt = nullptr;
};

// Re-decodes every field at each p_min and scores with Tusimple matching:
// precision = 1 - fp, recall = 1 - fn (pooled over the dataset).
std::vector<PrPoint> pr_sweep(const std::vector<EvalSample>& samples,
                              const std::vector<double>& thresholds, const DecodeConfig& base,
                              double pt_tol_px, double lane_tol_frac = 0.85);

double f1_score(double precision, double recall);

}  // namespace fastdraw
