#include "fastdraw/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

const std::vector<StylePreset>& builtin_presets() {
  static const std::vector<StylePreset> presets = {
      {"base", 1.0, {0.0, 0.0, 0.0}, 1.0, 0.0, 0.0, 0.0},
      {"night", 0.3, {0.0, 0.0, 0.06}, 1.0, 0.0, 0.0, 0.0},
      {"rain", 0.75, {0.02, 0.02, 0.04}, 1.0, 0.0, 0.08, 0.0},
      {"fog", 0.45, {0.38, 0.38, 0.38}, 1.0, 0.0, 0.02, 0.0},
      {"dusk", 0.4, {0.06, 0.02, 0.0}, 1.2, 20.0, 0.05, 0.4},
  };
  return presets;
}

const StylePreset& find_preset(const std::vector<StylePreset>& presets, const std::string& name) {
  for (const auto& p : presets) {
    if (p.name == name) return p;
  }
  fail(ErrorCode::unknown_preset, "unknown style preset '" + name + "'");
}

void SceneConfig::validate() const {
  if (image_size.height < 8 || image_size.width < 8) {
    fail(ErrorCode::config, "scene.height and scene.width must be >= 8");
  }
  if (lanes_min < 0 || lanes_max < lanes_min) {
    fail(ErrorCode::config, "scene.lanes_min/lanes_max must satisfy 0 <= min <= max");
  }
  if (!(curvature >= 0.0)) fail(ErrorCode::config, "scene.curvature must be >= 0");
  if (lane_width_min < 1 || lane_width_max < lane_width_min) {
    fail(ErrorCode::config, "scene.lane_width_min/lane_width_max must satisfy 1 <= min <= max");
  }
  if (!(noise_amplitude >= 0.0)) fail(ErrorCode::config, "scene.noise_amplitude must be >= 0");
  if (L < 1) fail(ErrorCode::config, "scene.L must be >= 1");
  if (min_lane_rows < 2) fail(ErrorCode::config, "scene.min_lane_rows must be >= 2");
}

namespace {

struct LaneShape {
  double bottom_offset;  // column offset from the vanishing point at the bottom row
  double width;          // stroke width at the bottom row
  std::array<float, 3> color;
};

// Offsets alternate ego-left, ego-right, then outward.
std::vector<double> lane_slots(int count, double ego_half, double spacing, std::mt19937_64& rng) {
  std::vector<double> slots;
  for (int j = 0; static_cast<int>(slots.size()) < count; ++j) {
    const double d = ego_half + j * spacing;
    std::bernoulli_distribution left_first(0.5);
    if (j == 0 || left_first(rng)) {
      slots.push_back(-d);
      if (static_cast<int>(slots.size()) < count) slots.push_back(d);
    } else {
      slots.push_back(d);
      if (static_cast<int>(slots.size()) < count) slots.push_back(-d);
    }
  }
  return slots;
}

bool steps_within(const std::vector<LanePoint>& pts, int L) {
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (std::abs(std::lround(pts[i].w) - std::lround(pts[i - 1].w)) > L) return false;
  }
  return true;
}

}  // namespace

Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const int H = cfg.image_size.height;
  const int W = cfg.image_size.width;
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  Scene scene;
  scene.annotation.image_size = cfg.image_size;
  const double horizon = uniform(0.08, 0.18) * H;
  const double vp_w = W / 2.0 + uniform(-0.06, 0.06) * W;
  const int n_lanes = std::uniform_int_distribution<int>(cfg.lanes_min, cfg.lanes_max)(rng);

  // Road geometry; redrawn when a lane would violate the step bound.
  std::vector<std::vector<LanePoint>> lanes;
  std::vector<LaneShape> shapes;
  for (int attempt = 0; attempt < 32; ++attempt) {
    lanes.clear();
    shapes.clear();
    const double kappa = cfg.curvature > 0.0 ? uniform(-cfg.curvature, cfg.curvature) : 0.0;
    // Ego lanes meet the bottom row outside the centered third of the image,
    // where the decoder does not look for seeds.
    const double ego_half = uniform(0.28, 0.36) * W;
    const double spacing = uniform(0.25, 0.35) * W;
    const int top_row = static_cast<int>(std::ceil(horizon + uniform(2.0, 5.0)));
    const double span = (H - 1) - horizon;
    bool ok = true;
    for (double offset : lane_slots(n_lanes, ego_half, spacing, rng)) {
      std::vector<LanePoint> pts;
      for (int h = std::max(top_row, 0); h < H; ++h) {
        const double t = (h - horizon) / span;
        const double below = (H - 1) - h;
        const double w = vp_w + offset * t + 0.5 * kappa * below * below;
        if (w < 0.0 || w > W - 1) {
          if (!pts.empty()) break;  // lane left the image
          continue;
        }
        pts.push_back({h, w});
      }
      if (static_cast<int>(pts.size()) < cfg.min_lane_rows) continue;
      if (!steps_within(pts, cfg.L)) {
        ok = false;
        break;
      }
      const bool yellow = std::bernoulli_distribution(0.25)(rng);
      const int width = std::uniform_int_distribution<int>(cfg.lane_width_min, cfg.lane_width_max)(rng);
      shapes.push_back({offset, static_cast<double>(width),
                        yellow ? std::array<float, 3>{0.92f, 0.8f, 0.3f}
                               : std::array<float, 3>{0.93f, 0.93f, 0.93f}});
      lanes.push_back(std::move(pts));
    }
    if (ok) break;
    lanes.clear();
    shapes.clear();
  }

  // Background: sky above the horizon, textured road below.
  Image img(H, W);
  const double road = uniform(0.25, 0.42);
  const std::array<double, 3> sky = {uniform(0.5, 0.65), uniform(0.6, 0.75), uniform(0.7, 0.9)};
  std::uniform_real_distribution<double> grain(-1.0, 1.0);
  // Low-frequency blotches from a coarse random grid, bilinearly sampled.
  const int gh = H / 8 + 2;
  const int gw = W / 8 + 2;
  std::vector<double> coarse(static_cast<std::size_t>(gh) * gw);
  for (auto& v : coarse) v = grain(rng);
  for (int h = 0; h < H; ++h) {
    for (int w = 0; w < W; ++w) {
      double v[3];
      if (h < horizon) {
        for (int c = 0; c < 3; ++c) v[c] = sky[static_cast<std::size_t>(c)];
      } else {
        const double t = (h - horizon) / ((H - 1) - horizon + 1e-9);
        const double gy = h / 8.0;
        const double gx = w / 8.0;
        const int y0 = static_cast<int>(gy);
        const int x0 = static_cast<int>(gx);
        const double fy = gy - y0;
        const double fx = gx - x0;
        auto at = [&](int y, int x) { return coarse[static_cast<std::size_t>(y) * gw + x]; };
        const double blot = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                            fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        const double base = road + cfg.gradient_strength * (t - 0.5) + 0.04 * blot;
        const double n = cfg.noise_amplitude * grain(rng);
        for (int c = 0; c < 3; ++c) v[c] = base + n;
      }
      for (int c = 0; c < 3; ++c) img.at(c, h, w) = static_cast<float>(std::clamp(v[c], 0.0, 1.0));
    }
  }

  // Strokes: tent profile around the subpixel centerline, thinner with distance.
  for (std::size_t k = 0; k < lanes.size(); ++k) {
    const auto& shape = shapes[k];
    const auto& pts = lanes[k];
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto& p = pts[i];
      const double t = (p.h - horizon) / ((H - 1) - horizon);
      // Horizontal extent of a stroke of the given normal width at this slope.
      const double slope = (pts[std::min(i + 1, pts.size() - 1)].w - pts[i > 0 ? i - 1 : 0].w) /
                           ((i > 0 && i + 1 < pts.size()) ? 2.0 : 1.0);
      const double half = (0.5 * shape.width * (0.4 + 0.6 * t) + 0.5) * std::sqrt(1.0 + slope * slope);
      const int lo = std::max(0, static_cast<int>(std::floor(p.w - half)));
      const int hi = std::min(W - 1, static_cast<int>(std::ceil(p.w + half)));
      for (int w = lo; w <= hi; ++w) {
        const double alpha = std::clamp(1.0 - std::abs(w - p.w) / half, 0.0, 1.0);
        if (alpha <= 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          float& px = img.at(c, p.h, w);
          px = static_cast<float>((1.0 - alpha) * px + alpha * shape.color[static_cast<std::size_t>(c)]);
        }
      }
    }
    scene.annotation.lanes.emplace_back(lanes[k]);
  }
  std::sort(scene.annotation.lanes.begin(), scene.annotation.lanes.end(),
            [](const Polyline& a, const Polyline& b) { return a.back().w < b.back().w; });
  scene.image = std::move(img);
  return scene;
}

Image stylize(const Image& image, const StylePreset& preset, std::uint64_t seed) {
  Image out = image;
  const int H = image.height;
  const int W = image.width;
  const std::size_t plane = out.plane();
  if (preset.gain != 1.0 || preset.bias != std::array<double, 3>{0.0, 0.0, 0.0}) {
    for (int c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < plane; ++i) {
        float& v = out.data[c * plane + i];
        v = static_cast<float>(std::clamp(preset.gain * v + preset.bias[static_cast<std::size_t>(c)], 0.0, 1.0));
      }
    }
  }
  if (preset.gamma != 1.0) {
    for (auto& v : out.data) v = static_cast<float>(std::pow(std::max(0.0f, v), preset.gamma));
  }
  if (preset.hue_degrees != 0.0) {
    // Rotation about the gray axis.
    const double a = preset.hue_degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(a);
    const double sn = std::sin(a);
    const double k = 1.0 / 3.0;
    const double s3 = std::sqrt(k);
    const double m[3][3] = {
        {cs + (1 - cs) * k, k * (1 - cs) - s3 * sn, k * (1 - cs) + s3 * sn},
        {k * (1 - cs) + s3 * sn, cs + k * (1 - cs), k * (1 - cs) - s3 * sn},
        {k * (1 - cs) - s3 * sn, k * (1 - cs) + s3 * sn, cs + k * (1 - cs)},
    };
    for (std::size_t i = 0; i < plane; ++i) {
      const double r = out.data[i], g = out.data[plane + i], b = out.data[2 * plane + i];
      for (int c = 0; c < 3; ++c) {
        out.data[c * plane + i] =
            static_cast<float>(std::clamp(m[c][0] * r + m[c][1] * g + m[c][2] * b, 0.0, 1.0));
      }
    }
  }
  if (preset.vignette != 0.0) {
    const double cy = (H - 1) / 2.0;
    const double cx = (W - 1) / 2.0;
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < W; ++w) {
        const double dy = (h - cy) / (cy + 1e-9);
        const double dx = (w - cx) / (cx + 1e-9);
        const double f = std::clamp(1.0 - preset.vignette * 0.5 * (dx * dx + dy * dy), 0.0, 1.0);
        for (int c = 0; c < 3; ++c) out.at(c, h, w) = static_cast<float>(out.at(c, h, w) * f);
      }
    }
  }
  if (preset.noise_sigma > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, preset.noise_sigma);
    for (auto& v : out.data) v = static_cast<float>(std::clamp(v + noise(rng), 0.0, 1.0));
  }
  return out;
}

}  // namespace fastdraw
