#pragma once

#include <string>
#include <vector>

namespace fastdraw {

// Planar RGB image, channel-major (c, h, w), values nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, float fill = 0.0f)
      : height(h), width(w), data(static_cast<std::size_t>(3) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float& at(int c, int h, int w) { return data[c * plane() + static_cast<std::size_t>(h) * width + w]; }
  float at(int c, int h, int w) const {
    return data[c * plane() + static_cast<std::size_t>(h) * width + w];
  }
  double mean() const;

  friend bool operator==(const Image&, const Image&) = default;
};

// Binary PPM (P6, maxval 255). Values are clamped and rounded on write.
void save_ppm(const std::string& path, const Image& image);
Image load_ppm(const std::string& path);
// Quantizes through 8 bits exactly as a save/load round-trip would.
Image quantized(const Image& image);

}  // namespace fastdraw
