#include "fastdraw/targets.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

void PerturbConfig::validate() const {
  if (!(sigma >= 0.0)) fail(ErrorCode::config, "perturb.sigma must be >= 0");
  if (copies < 0) fail(ErrorCode::config, "perturb.copies must be >= 0");
  if (L < 1) fail(ErrorCode::config, "perturb.L must be >= 1");
}

std::size_t TargetSet::supervised_count() const {
  std::size_t n = 0;
  for (auto v : up_idx) n += v != kIgnore;
  for (auto v : down_idx) n += v != kIgnore;
  return n;
}

namespace {

int round_col(double w) { return static_cast<int>(std::lround(w)); }

std::int16_t step_class(int from_w, int to_w, int L) {
  const int dw = std::clamp(to_w - from_w, -L, L);
  return static_cast<std::int16_t>(dw + L);
}

}  // namespace

TargetSet build_targets(const AnnotationSet& ann, const PerturbConfig& cfg, std::uint64_t rng_seed) {
  validate(ann);
  cfg.validate();
  const int H = ann.image_size.height;
  const int W = ann.image_size.width;
  const int L = cfg.L;
  const auto end = static_cast<std::int16_t>(end_class(L));

  TargetSet t;
  t.image_id = ann.image_id;
  t.height = H;
  t.width = W;
  t.L = L;
  const std::size_t n = static_cast<std::size_t>(H) * W;
  t.mask.assign(n, 0);
  t.up_idx.assign(n, TargetSet::kIgnore);
  t.down_idx.assign(n, TargetSet::kIgnore);

  auto write_point = [&](const Polyline& lane, std::size_t i, int offset) {
    const auto& pts = lane.points();
    const int h = pts[i].h;
    const int wp = std::clamp(round_col(pts[i].w) + offset, 0, W - 1);
    const std::size_t px = t.at(h, wp);
    t.up_idx[px] = i + 1 < pts.size() ? step_class(wp, round_col(pts[i + 1].w), L) : end;
    t.down_idx[px] = i > 0 ? step_class(wp, round_col(pts[i - 1].w), L) : end;
  };

  if (cfg.sigma > 0.0 && cfg.copies > 0) {
    std::mt19937_64 rng(rng_seed);
    std::normal_distribution<double> noise(0.5, cfg.sigma);
    for (const auto& lane : ann.lanes) {
      for (std::size_t i = 0; i < lane.size(); ++i) {
        for (int c = 0; c < cfg.copies; ++c) {
          write_point(lane, i, static_cast<int>(std::floor(noise(rng))));
        }
      }
    }
  }
  // floor(N(0.5, 0)) = 0: the unperturbed lane, written last.
  for (const auto& lane : ann.lanes) {
    for (std::size_t i = 0; i < lane.size(); ++i) {
      write_point(lane, i, 0);
      t.mask[t.at(lane[i].h, std::clamp(round_col(lane[i].w), 0, W - 1))] = 1;
    }
  }
  return t;
}

HeadField oracle_field(const AnnotationSet& ann, int L) {
  validate(ann);
  const int H = ann.image_size.height;
  const int W = ann.image_size.width;
  const int k = num_classes(L);
  const int ch = head_channels(L);
  std::vector<float> data(static_cast<std::size_t>(H) * W * ch, 0.0f);
  for (std::size_t px = 0; px < static_cast<std::size_t>(H) * W; ++px) {
    data[px * ch + 1 + end_class(L)] = 1.0f;
    data[px * ch + 1 + k + end_class(L)] = 1.0f;
  }
  for (const auto& lane : ann.lanes) {
    const auto& pts = lane.points();
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      const int dw = round_col(pts[i + 1].w) - round_col(pts[i].w);
      if (std::abs(dw) > L) {
        std::ostringstream oss;
        oss << "lane step " << dw << " at row " << pts[i].h << " exceeds L=" << L;
        fail(ErrorCode::unsupported_slope, oss.str());
      }
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const int w = round_col(pts[i].w);
      float* cell = data.data() + (static_cast<std::size_t>(pts[i].h) * W + w) * ch;
      cell[0] = 1.0f;
      std::fill(cell + 1, cell + ch, 0.0f);
      const int up = i + 1 < pts.size() ? round_col(pts[i + 1].w) - w + L : end_class(L);
      const int down = i > 0 ? round_col(pts[i - 1].w) - w + L : end_class(L);
      cell[1 + up] = 1.0f;
      cell[1 + k + down] = 1.0f;
    }
  }
  return HeadField(H, W, L, std::move(data));
}

RawTensor to_raw_tensor(const TargetSet& t) {
  RawTensor raw;
  raw.dims = {static_cast<std::uint32_t>(t.height), static_cast<std::uint32_t>(t.width), 3u};
  raw.L = static_cast<std::uint32_t>(t.L);
  raw.data.resize(static_cast<std::size_t>(t.height) * t.width * 3);
  for (std::size_t px = 0; px < t.mask.size(); ++px) {
    raw.data[px * 3] = t.mask[px];
    raw.data[px * 3 + 1] = t.up_idx[px];
    raw.data[px * 3 + 2] = t.down_idx[px];
  }
  return raw;
}

TargetSet targets_from_raw_tensor(const RawTensor& raw) {
  if (raw.dims.size() != 3 || raw.dims[2] != 3) {
    fail(ErrorCode::shape, "target tensor must be H x W x 3");
  }
  TargetSet t;
  t.height = static_cast<int>(raw.dims[0]);
  t.width = static_cast<int>(raw.dims[1]);
  t.L = static_cast<int>(raw.L);
  const std::size_t n = static_cast<std::size_t>(t.height) * t.width;
  t.mask.resize(n);
  t.up_idx.resize(n);
  t.down_idx.resize(n);
  const int hi = end_class(t.L);
  auto index = [hi](float v) {
    const int i = static_cast<int>(v);
    if (static_cast<float>(i) != v || i < -1 || i > hi) {
      fail(ErrorCode::format, "target index outside class range");
    }
    return static_cast<std::int16_t>(i);
  };
  for (std::size_t px = 0; px < n; ++px) {
    const float m = raw.data[px * 3];
    if (m != 0.0f && m != 1.0f) fail(ErrorCode::format, "target mask must be 0/1");
    t.mask[px] = static_cast<std::uint8_t>(m);
    t.up_idx[px] = index(raw.data[px * 3 + 1]);
    t.down_idx[px] = index(raw.data[px * 3 + 2]);
  }
  return t;
}

}  // namespace fastdraw
