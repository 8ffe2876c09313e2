#include "fastdraw/heads.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

std::optional<int> index_to_dw(ClassIndex c, int L) {
  if (c.idx < 0 || c.idx > end_class(L)) {
    std::ostringstream oss;
    oss << "class index " << c.idx << " outside [0, " << end_class(L) << "]";
    fail(ErrorCode::index, oss.str());
  }
  if (c.idx == end_class(L)) return std::nullopt;
  return c.idx - L;
}

ClassIndex dw_to_index(int dw, int L) {
  if (dw < -L || dw > L) {
    std::ostringstream oss;
    oss << "step " << dw << " outside [-" << L << ", " << L << "]";
    fail(ErrorCode::index, oss.str());
  }
  return {dw + L};
}

HeadField::HeadField(int height, int width, int L, std::vector<float> data)
    : height_(height), width_(width), L_(L), data_(std::move(data)) {
  if (height <= 0 || width <= 0 || L < 0) {
    fail(ErrorCode::shape, "head field needs positive size and L >= 0");
  }
  const std::size_t expected = static_cast<std::size_t>(height) * width * channels();
  if (data_.size() != expected) {
    std::ostringstream oss;
    oss << "head field payload has " << data_.size() << " values, expected " << expected;
    fail(ErrorCode::shape, oss.str());
  }
  const int k = classes();
  for (std::size_t px = 0; px < static_cast<std::size_t>(height) * width; ++px) {
    const float* base = data_.data() + px * channels();
    if (!(base[0] >= 0.0f && base[0] <= 1.0f)) fail(ErrorCode::format, "lane_prob outside [0, 1]");
    for (int block = 0; block < 2; ++block) {
      const float* p = base + 1 + block * k;
      double sum = 0.0;
      for (int c = 0; c < k; ++c) {
        if (!(p[c] >= 0.0f)) fail(ErrorCode::format, "negative or NaN categorical entry");
        sum += p[c];
      }
      if (std::abs(sum - 1.0) > 1e-6) {
        std::ostringstream oss;
        oss << "categorical slice at pixel " << px << " sums to " << sum;
        fail(ErrorCode::format, oss.str());
      }
    }
  }
}

HeadField HeadField::with_scaled_lane_prob(float factor) const {
  std::vector<float> copy = data_;
  for (std::size_t i = 0; i < copy.size(); i += channels()) {
    copy[i] = std::clamp(copy[i] * factor, 0.0f, 1.0f);
  }
  return HeadField(height_, width_, L_, std::move(copy));
}

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Softmax of `n` logits read with the given stride; written contiguously.
void softmax_into(const float* in, std::size_t stride, int n, float* out) {
  double mx = in[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, static_cast<double>(in[i * stride]));
  double sum = 0.0;
  double tmp[256];
  for (int i = 0; i < n; ++i) {
    tmp[i] = std::exp(static_cast<double>(in[i * stride]) - mx);
    sum += tmp[i];
  }
  for (int i = 0; i < n; ++i) out[i] = static_cast<float>(tmp[i] / sum);
}

HeadField normalize(std::span<const float> raw, int height, int width, int L, bool planar) {
  const int k = num_classes(L);
  const int ch = head_channels(L);
  if (k > 256) fail(ErrorCode::shape, "L too large");
  const std::size_t pixels = static_cast<std::size_t>(height) * width;
  if (height <= 0 || width <= 0 || raw.size() != pixels * ch) {
    std::ostringstream oss;
    oss << "logit grid has " << raw.size() << " values, expected " << height << "x" << width
        << "x" << ch;
    fail(ErrorCode::shape, oss.str());
  }
  std::vector<float> out(pixels * ch);
  for (std::size_t px = 0; px < pixels; ++px) {
    const float* in = planar ? raw.data() + px : raw.data() + px * ch;
    const std::size_t stride = planar ? pixels : 1;
    float* dst = out.data() + px * ch;
    dst[0] = static_cast<float>(sigmoid(in[0]));
    softmax_into(in + stride, stride, k, dst + 1);
    softmax_into(in + (1 + k) * stride, stride, k, dst + 1 + k);
  }
  return HeadField(height, width, L, std::move(out));
}

}  // namespace

HeadField from_logits(std::span<const float> raw, int height, int width, int L) {
  return normalize(raw, height, width, L, false);
}

HeadField from_planar_logits(std::span<const float> raw, int height, int width, int L) {
  return normalize(raw, height, width, L, true);
}

RawTensor to_raw_tensor(const HeadField& field) {
  RawTensor t;
  t.dims = {static_cast<std::uint32_t>(field.height()), static_cast<std::uint32_t>(field.width()),
            static_cast<std::uint32_t>(field.channels())};
  t.L = static_cast<std::uint32_t>(field.L());
  t.data = field.data();
  return t;
}

HeadField from_raw_tensor(const RawTensor& t) {
  if (t.dims.size() != 3) fail(ErrorCode::shape, "head field tensor must have rank 3");
  const int ch = static_cast<int>(t.dims[2]);
  if (ch < 5 || (ch - 5) % 4 != 0) {
    std::ostringstream oss;
    oss << "channel count " << ch << " is not 1 + 2(2L+2) for any L";
    fail(ErrorCode::shape, oss.str());
  }
  const int inferred = (ch - 5) / 4;
  if (inferred != static_cast<int>(t.L)) {
    std::ostringstream oss;
    oss << "header L=" << t.L << " disagrees with channel count " << ch << " (L=" << inferred
        << ")";
    fail(ErrorCode::shape, oss.str());
  }
  return HeadField(static_cast<int>(t.dims[0]), static_cast<int>(t.dims[1]), inferred, t.data);
}

void save_field(const std::string& path, const HeadField& field) {
  save_raw_tensor(path, to_raw_tensor(field));
}

HeadField load_field(const std::string& path) { return from_raw_tensor(load_raw_tensor(path)); }

}  // namespace fastdraw
