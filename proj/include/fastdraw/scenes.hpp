#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fastdraw/geometry.hpp"
#include "fastdraw/image.hpp"

namespace fastdraw {

// Geometry-preserving photometric transform, applied in this order:
// gain/bias, gamma, hue rotation, vignette, additive Gaussian noise.
struct StylePreset {
  std::string name;
  double gain = 1.0;
  std::array<double, 3> bias{0.0, 0.0, 0.0};
  double gamma = 1.0;
  double hue_degrees = 0.0;
  double noise_sigma = 0.0;
  double vignette = 0.0;  // darkening at the corners, 0..1
};

// base (identity), night, rain, fog, dusk.
const std::vector<StylePreset>& builtin_presets();
const StylePreset& find_preset(const std::vector<StylePreset>& presets, const std::string& name);

struct SceneConfig {
  ImageSize image_size{64, 128};
  int lanes_min = 2;
  int lanes_max = 4;
  double curvature = 0.015;     // max |d2w/dh2| in px per row^2
  int lane_width_min = 2;       // stroke width at the bottom row, px
  int lane_width_max = 4;
  double noise_amplitude = 0.05;
  double gradient_strength = 0.15;  // brightness ramp from horizon to bottom
  int L = 6;                    // every generated lane keeps |dw| <= L
  int min_lane_rows = 8;
  std::vector<StylePreset> style_presets = builtin_presets();
  std::uint64_t rng_seed = 1;

  void validate() const;
};

struct Scene {
  Image image;
  AnnotationSet annotation;
};

// Perspective-like lanes converging toward a jittered vanishing point, shared
// quadratic bend, anti-aliased strokes over a textured road. The annotation is
// the real-valued stroke centerline at every covered row.
Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed);

// Appearance-only transform; the image size never changes and labels are
// reused unchanged by callers.
Image stylize(const Image& image, const StylePreset& preset, std::uint64_t seed);

}  // namespace fastdraw
