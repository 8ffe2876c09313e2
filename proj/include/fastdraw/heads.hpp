#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fastdraw/tensor_io.hpp"

namespace fastdraw {

// Class index into a (2L+2)-way step categorical: idx = dw + L for dw in
// [-L, L], and idx = 2L+1 is the end token.
struct ClassIndex {
  int idx = 0;
};

constexpr int num_classes(int L) { return 2 * L + 2; }
constexpr int end_class(int L) { return 2 * L + 1; }
constexpr int head_channels(int L) { return 1 + 2 * num_classes(L); }

// Step for a class index, or nullopt for the end token. Throws index error
// outside [0, 2L+1].
std::optional<int> index_to_dw(ClassIndex c, int L);
ClassIndex dw_to_index(int dw, int L);

// Drawing direction. `up` (d = +1) moves to the next row index, `down`
// (d = -1) to the previous one.
enum class Direction : int { down = -1, up = 1 };

// The three decoded network heads over an H x W grid, stored as one
// row-major (h, w, channel) array with channel layout
// [lane_prob | up block (2L+2) | down block (2L+2)].
class HeadField {
 public:
  HeadField() = default;
  // Takes ownership of already-normalized data; validates every invariant.
  HeadField(int height, int width, int L, std::vector<float> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int L() const noexcept { return L_; }
  int classes() const noexcept { return num_classes(L_); }
  int channels() const noexcept { return head_channels(L_); }
  bool contains(int h, int w) const noexcept {
    return h >= 0 && h < height_ && w >= 0 && w < width_;
  }

  float lane_prob(int h, int w) const { return data_[offset(h, w)]; }
  std::span<const float> up(int h, int w) const {
    return {data_.data() + offset(h, w) + 1, static_cast<std::size_t>(classes())};
  }
  std::span<const float> down(int h, int w) const {
    return {data_.data() + offset(h, w) + 1 + classes(), static_cast<std::size_t>(classes())};
  }
  std::span<const float> categorical(int h, int w, Direction d) const {
    return d == Direction::up ? up(h, w) : down(h, w);
  }

  const std::vector<float>& data() const noexcept { return data_; }

  // Copy with lane_prob multiplied by `factor` (clamped to [0, 1]).
  HeadField with_scaled_lane_prob(float factor) const;

 private:
  std::size_t offset(int h, int w) const {
    return (static_cast<std::size_t>(h) * width_ + w) * channels();
  }

  int height_ = 0;
  int width_ = 0;
  int L_ = 0;
  std::vector<float> data_;
};

// Sigmoid on channel 0, softmax over each (2L+2) block. `raw` is row-major
// (h, w, channel) with 1 + 2(2L+2) channels.
HeadField from_logits(std::span<const float> raw, int height, int width, int L);
// Same, for channel-major (channel, h, w) logits as produced by the network.
HeadField from_planar_logits(std::span<const float> raw, int height, int width, int L);

RawTensor to_raw_tensor(const HeadField& field);
// L is inferred from the channel count and must agree with the header.
HeadField from_raw_tensor(const RawTensor& tensor);

void save_field(const std::string& path, const HeadField& field);
HeadField load_field(const std::string& path);

}  // namespace fastdraw
