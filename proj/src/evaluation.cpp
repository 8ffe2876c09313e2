#include "fastdraw/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "fastdraw/error.hpp"

namespace fastdraw {

double tusimple_point_tolerance(int image_width) { return 20.0 * image_width / 1280.0; }
double culane_stroke_width(int image_width) {
  return std::max(1.0, 30.0 * image_width / 1640.0);
}

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

TusimpleResult tusimple_score(const std::vector<Polyline>& pred, const AnnotationSet& gt,
                              double pt_tol_px, double lane_tol_frac) {
  TusimpleResult r;
  r.pred_lanes = pred.size();
  r.gt_lanes = gt.lanes.size();
  for (const auto& g : gt.lanes) r.gt_points += g.size();

  struct Pair {
    int correct, gt, pred;
  };
  std::vector<Pair> pairs;
  for (std::size_t gi = 0; gi < gt.lanes.size(); ++gi) {
    const auto& g = gt.lanes[gi];
    for (std::size_t pi = 0; pi < pred.size(); ++pi) {
      int correct = 0;
      for (const auto& pt : g.points()) {
        if (pred[pi].covers_row(pt.h) && std::abs(pred[pi].w_at(pt.h) - pt.w) <= pt_tol_px) {
          ++correct;
        }
      }
      if (correct > 0) pairs.push_back({correct, static_cast<int>(gi), static_cast<int>(pi)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.correct, a.gt, a.pred) < std::tie(a.correct, b.gt, b.pred);
  });
  std::vector<bool> pred_used(pred.size(), false);
  std::vector<bool> gt_used(gt.lanes.size(), false);
  for (const auto& p : pairs) {
    if (pred_used[static_cast<std::size_t>(p.pred)] || gt_used[static_cast<std::size_t>(p.gt)]) {
      continue;
    }
    pred_used[static_cast<std::size_t>(p.pred)] = true;
    gt_used[static_cast<std::size_t>(p.gt)] = true;
    const double frac =
        static_cast<double>(p.correct) / static_cast<double>(gt.lanes[static_cast<std::size_t>(p.gt)].size());
    LaneMatch m{p.pred, p.gt, p.correct, frac >= lane_tol_frac};
    r.correct_points += static_cast<std::size_t>(p.correct);
    r.true_positives += m.true_positive;
    r.matching.push_back(m);
  }
  r.accuracy = r.gt_points == 0 ? 1.0
                                : static_cast<double>(r.correct_points) / static_cast<double>(r.gt_points);
  r.fp = r.pred_lanes == 0 ? 0.0
                           : static_cast<double>(r.pred_lanes - r.true_positives) /
                                 static_cast<double>(r.pred_lanes);
  r.fn = r.gt_lanes == 0 ? 0.0
                         : static_cast<double>(r.gt_lanes - r.true_positives) /
                               static_cast<double>(r.gt_lanes);
  return r;
}

namespace {

// Row-span rasterization: for every row, [start, start + width) columns.
std::vector<std::pair<int, int>> spans(const Polyline& lane, double width, int image_width) {
  const int n = std::max(1, static_cast<int>(std::lround(width)));
  std::vector<std::pair<int, int>> out;
  out.reserve(lane.size());
  for (const auto& p : lane.points()) {
    const int start = static_cast<int>(std::floor(p.w - n / 2.0 + 0.5));
    const int lo = std::max(0, start);
    const int hi = std::min(image_width, start + n);
    out.emplace_back(lo, std::max(lo, hi));
  }
  return out;
}

double span_iou(const Polyline& a, const std::vector<std::pair<int, int>>& sa, const Polyline& b,
                const std::vector<std::pair<int, int>>& sb) {
  long area_a = 0, area_b = 0, inter = 0;
  for (const auto& [lo, hi] : sa) area_a += hi - lo;
  for (const auto& [lo, hi] : sb) area_b += hi - lo;
  const int first = std::max(a.bottom_row(), b.bottom_row());
  const int last = std::min(a.top_row(), b.top_row());
  for (int h = first; h <= last; ++h) {
    const auto& x = sa[static_cast<std::size_t>(h - a.bottom_row())];
    const auto& y = sb[static_cast<std::size_t>(h - b.bottom_row())];
    inter += std::max(0, std::min(x.second, y.second) - std::max(x.first, y.first));
  }
  const long uni = area_a + area_b - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace

IouResult iou_f1(const std::vector<Polyline>& pred, const AnnotationSet& gt,
                 double stroke_width_px, double iou_threshold) {
  if (!(stroke_width_px >= 1.0)) fail(ErrorCode::invalid_argument, "stroke width must be >= 1");
  const int W = gt.image_size.width;
  IouResult r;
  r.pred_lanes = pred.size();
  r.gt_lanes = gt.lanes.size();
  std::vector<std::vector<std::pair<int, int>>> ps, gs;
  for (const auto& p : pred) ps.push_back(spans(p, stroke_width_px, W));
  for (const auto& g : gt.lanes) gs.push_back(spans(g, stroke_width_px, W));

  struct Pair {
    double iou;
    int pred, gt;
  };
  std::vector<Pair> pairs;
  for (std::size_t pi = 0; pi < pred.size(); ++pi) {
    for (std::size_t gi = 0; gi < gt.lanes.size(); ++gi) {
      const double iou = span_iou(pred[pi], ps[pi], gt.lanes[gi], gs[gi]);
      if (iou > iou_threshold) pairs.push_back({iou, static_cast<int>(pi), static_cast<int>(gi)});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(b.iou, a.gt, a.pred) < std::tie(a.iou, b.gt, b.pred);
  });
  std::vector<bool> pred_used(pred.size(), false);
  std::vector<bool> gt_used(gt.lanes.size(), false);
  for (const auto& p : pairs) {
    if (pred_used[static_cast<std::size_t>(p.pred)] || gt_used[static_cast<std::size_t>(p.gt)]) {
      continue;
    }
    pred_used[static_cast<std::size_t>(p.pred)] = true;
    gt_used[static_cast<std::size_t>(p.gt)] = true;
    r.matching.emplace_back(p.pred, p.gt);
  }
  r.true_positives = r.matching.size();
  r.precision = r.pred_lanes == 0 ? 1.0
                                  : static_cast<double>(r.true_positives) / static_cast<double>(r.pred_lanes);
  r.recall = r.gt_lanes == 0 ? 1.0
                             : static_cast<double>(r.true_positives) / static_cast<double>(r.gt_lanes);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

void MetricTotals::add(const TusimpleResult& r) {
  correct_points += r.correct_points;
  gt_points += r.gt_points;
  pred_lanes += r.pred_lanes;
  gt_lanes += r.gt_lanes;
  tusimple_tp += r.true_positives;
  ++images;
}

void MetricTotals::add(const IouResult& r) { iou_tp += r.true_positives; }

double MetricTotals::accuracy() const {
  return gt_points == 0 ? 1.0 : static_cast<double>(correct_points) / static_cast<double>(gt_points);
}
double MetricTotals::fp_rate() const {
  return pred_lanes == 0 ? 0.0
                         : static_cast<double>(pred_lanes - tusimple_tp) / static_cast<double>(pred_lanes);
}
double MetricTotals::fn_rate() const {
  return gt_lanes == 0 ? 0.0
                       : static_cast<double>(gt_lanes - tusimple_tp) / static_cast<double>(gt_lanes);
}
double MetricTotals::f1() const { return f1_score(precision(), recall()); }
double MetricTotals::iou_precision() const {
  return pred_lanes == 0 ? 1.0 : static_cast<double>(iou_tp) / static_cast<double>(pred_lanes);
}
double MetricTotals::iou_recall() const {
  return gt_lanes == 0 ? 1.0 : static_cast<double>(iou_tp) / static_cast<double>(gt_lanes);
}
double MetricTotals::iou_f1() const { return f1_score(iou_precision(), iou_recall()); }

std::vector<PrPoint> pr_sweep(const std::vector<EvalSample>& samples,
                              const std::vector<double>& thresholds, const DecodeConfig& base,
                              double pt_tol_px, double lane_tol_frac) {
  std::vector<PrPoint> curve;
  for (double t : thresholds) {
    if (!(t > 0.0 && t < 1.0)) fail(ErrorCode::invalid_argument, "pr_sweep thresholds must be in (0, 1)");
    DecodeConfig cfg = base;
    cfg.p_min = t;
    MetricTotals totals;
    for (const auto& s : samples) {
      std::vector<Polyline> lanes;
      for (auto& d : decode_all(*s.field, cfg)) lanes.push_back(std::move(d.polyline));
      totals.add(tusimple_score(lanes, *s.gt, pt_tol_px, lane_tol_frac));
    }
    curve.push_back({t, totals.precision(), totals.recall()});
  }
  return curve;
}

}  // namespace fastdraw
