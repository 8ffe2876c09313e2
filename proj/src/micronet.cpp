#include "fastdraw/micronet.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "fastdraw/error.hpp"

namespace fastdraw::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
void im2col(const T* in, int channels, int height, int width, int stride, T* cols) {
  const int out_h = (height - 1) / stride + 1;
  const int out_w = (width - 1) / stride + 1;
  const std::size_t P = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    const T* src = in + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * P;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - 1;
          T* row = dst + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(row, row + out_w, T(0));
            continue;
          }
          const T* src_row = src + static_cast<std::size_t>(iy) * width;
          if (stride == 1) {
            // ix = ox + kx - 1
            const int lo = kx == 0 ? 1 : 0;
            const int hi = kx == 2 ? out_w - 1 : out_w;
            if (lo > 0) row[0] = T(0);
            if (hi < out_w) row[out_w - 1] = T(0);
            std::copy(src_row + lo + kx - 1, src_row + hi + kx - 1, row + lo);
          } else {
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride + kx - 1;
              row[ox] = (ix >= 0 && ix < width) ? src_row[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* cols, int channels, int height, int width, int stride, T* out) {
  const int out_h = (height - 1) / stride + 1;
  const int out_w = (width - 1) / stride + 1;
  const std::size_t P = static_cast<std::size_t>(out_h) * out_w;
  std::fill(out, out + static_cast<std::size_t>(channels) * height * width, T(0));
  for (int c = 0; c < channels; ++c) {
    T* dst = out + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = cols + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * P;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - 1;
          if (iy < 0 || iy >= height) continue;
          const T* row = src + static_cast<std::size_t>(oy) * out_w;
          T* dst_row = dst + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride + kx - 1;
            if (ix >= 0 && ix < width) dst_row[ix] += row[ox];
          }
        }
      }
    }
  }
}

// out = act(W * cols + b), cols already filled.
template <typename T>
void conv_apply(const ConvLayer<T>& layer, const std::vector<T>& cols, int out_h, int out_w,
                Tensor3<T>& out) {
  const int P = out_h * out_w;
  if (out.channels != layer.out_channels || out.height != out_h || out.width != out_w) {
    out = Tensor3<T>(layer.out_channels, out_h, out_w);
  }
  Eigen::Map<const RowMat<T>> w(layer.weight.data(), layer.out_channels, layer.fan_in());
  Eigen::Map<const RowMat<T>> c(cols.data(), layer.fan_in(), P);
  Eigen::Map<RowMat<T>> o(out.data.data(), layer.out_channels, P);
  Eigen::Map<const Vec<T>> b(layer.bias.data(), layer.out_channels);
  o.noalias() = w * c;
  o.colwise() += b;
  if (layer.relu) o = o.cwiseMax(T(0));
}

template <typename T>
void conv_forward(const ConvLayer<T>& layer, const Tensor3<T>& in, std::vector<T>& cols,
                  Tensor3<T>& out) {
  const int out_h = (in.height - 1) / layer.stride + 1;
  const int out_w = (in.width - 1) / layer.stride + 1;
  cols.resize(static_cast<std::size_t>(layer.fan_in()) * out_h * out_w);
  im2col(in.data.data(), in.channels, in.height, in.width, layer.stride, cols.data());
  conv_apply(layer, cols, out_h, out_w, out);
}

// dout is masked in place by the ReLU derivative (taken from the output).
template <typename T>
void relu_backward(const Tensor3<T>& out, T* dout) {
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    if (out.data[i] <= T(0)) dout[i] = T(0);
  }
}

template <typename T>
void conv_param_grads(const ConvLayer<T>& layer, const std::vector<T>& cols, const T* dout, int P,
                      std::vector<T>& dw, std::vector<T>& db) {
  Eigen::Map<const RowMat<T>> d(dout, layer.out_channels, P);
  Eigen::Map<const RowMat<T>> c(cols.data(), layer.fan_in(), P);
  Eigen::Map<RowMat<T>> gw(dw.data(), layer.out_channels, layer.fan_in());
  gw.noalias() += d * c.transpose();
  // Plain loop: a vectorized reduction would depend on the buffer's alignment
  // and break bitwise reproducibility across workspaces.
  for (int o = 0; o < layer.out_channels; ++o) {
    const T* row = dout + static_cast<std::size_t>(o) * P;
    T s = T(0);
    for (int i = 0; i < P; ++i) s += row[i];
    db[static_cast<std::size_t>(o)] += s;
  }
}

template <typename T>
void conv_input_cols(const ConvLayer<T>& layer, const T* dout, int P, std::vector<T>& dcols,
                     bool accumulate) {
  Eigen::Map<const RowMat<T>> d(dout, layer.out_channels, P);
  Eigen::Map<const RowMat<T>> w(layer.weight.data(), layer.out_channels, layer.fan_in());
  if (!accumulate) dcols.resize(static_cast<std::size_t>(layer.fan_in()) * P);
  Eigen::Map<RowMat<T>> dc(dcols.data(), layer.fan_in(), P);
  if (accumulate) {
    dc.noalias() += w.transpose() * d;
  } else {
    dc.noalias() = w.transpose() * d;
  }
}

template <typename T>
void upsample2_concat(const Tensor3<T>& low, const Tensor3<T>& skip, Tensor3<T>& out) {
  const int H = skip.height;
  const int W = skip.width;
  out = Tensor3<T>(low.channels + skip.channels, H, W);
  for (int c = 0; c < low.channels; ++c) {
    const T* src = low.channel(c);
    T* dst = out.channel(c);
    for (int y = 0; y < H; ++y) {
      const T* src_row = src + static_cast<std::size_t>(y / 2) * low.width;
      T* dst_row = dst + static_cast<std::size_t>(y) * W;
      for (int x = 0; x < W; ++x) dst_row[x] = src_row[x / 2];
    }
  }
  std::copy(skip.data.begin(), skip.data.end(), out.channel(low.channels));
}

// Splits the gradient of an upsample+concat into the low-res and skip parts.
template <typename T>
void upsample2_concat_backward(const Tensor3<T>& dcat, int low_channels, int low_h, int low_w,
                               std::vector<T>& dlow, T* dskip_accum) {
  const int H = dcat.height;
  const int W = dcat.width;
  dlow.assign(static_cast<std::size_t>(low_channels) * low_h * low_w, T(0));
  for (int c = 0; c < low_channels; ++c) {
    const T* src = dcat.channel(c);
    T* dst = dlow.data() + static_cast<std::size_t>(c) * low_h * low_w;
    for (int y = 0; y < H; ++y) {
      const T* src_row = src + static_cast<std::size_t>(y) * W;
      T* dst_row = dst + static_cast<std::size_t>(y / 2) * low_w;
      for (int x = 0; x < W; ++x) dst_row[x / 2] += src_row[x];
    }
  }
  const T* skip = dcat.channel(low_channels);
  const std::size_t n = static_cast<std::size_t>(dcat.channels - low_channels) * H * W;
  for (std::size_t i = 0; i < n; ++i) dskip_accum[i] += skip[i];
}

}  // namespace

template <typename T>
Tensor3<T> to_tensor(const Image& image) {
  Tensor3<T> t(3, image.height, image.width);
  std::transform(image.data.begin(), image.data.end(), t.data.begin(),
                 [](float v) { return static_cast<T>((v - 0.5f) * 4.0f); });
  return t;
}

void Architecture::validate() const {
  if (L < 1) fail(ErrorCode::config, "arch.L must be >= 1");
  for (int c : {enc0, enc1, enc2, dec1, dec2, head_hidden}) {
    if (c < 1) fail(ErrorCode::config, "architecture channel widths must be >= 1");
  }
}

template <typename T>
void Gradients<T>::zero() {
  for (auto& g : weight) std::fill(g.begin(), g.end(), T(0));
  for (auto& g : bias) std::fill(g.begin(), g.end(), T(0));
  w_mask = 0.0;
  w_seq = 0.0;
}

template <typename T>
Gradients<T>& Gradients<T>::operator+=(const Gradients& other) {
  for (int l = 0; l < kLayerCount; ++l) {
    for (std::size_t i = 0; i < weight[l].size(); ++i) weight[l][i] += other.weight[l][i];
    for (std::size_t i = 0; i < bias[l].size(); ++i) bias[l][i] += other.bias[l][i];
  }
  w_mask += other.w_mask;
  w_seq += other.w_seq;
  return *this;
}

template <typename T>
void Gradients<T>::scale(double factor) {
  const T f = static_cast<T>(factor);
  for (auto& g : weight) for (auto& v : g) v *= f;
  for (auto& g : bias) for (auto& v : g) v *= f;
  w_mask *= factor;
  w_seq *= factor;
}

template <typename T>
double Gradients<T>::squared_norm() const {
  double s = w_mask * w_mask + w_seq * w_seq;
  for (const auto& g : weight) for (auto v : g) s += static_cast<double>(v) * v;
  for (const auto& g : bias) for (auto v : g) s += static_cast<double>(v) * v;
  return s;
}

template <typename T>
MicroNet<T>::MicroNet(const Architecture& arch, std::uint64_t seed, InitMode mode) : arch_(arch) {
  arch.validate();
  const int k = num_classes(arch.L);
  struct Spec {
    const char* name;
    int in, out, stride;
    bool relu;
  };
  const std::array<Spec, kLayerCount> specs = {{
      {"enc0", 3, arch.enc0, 1, true},
      {"enc1", arch.enc0, arch.enc1, 2, true},
      {"enc2", arch.enc1, arch.enc1, 1, true},
      {"enc3", arch.enc1, arch.enc2, 2, true},
      {"enc4", arch.enc2, arch.enc2, 1, true},
      {"dec1", arch.enc2 + arch.enc1, arch.dec1, 1, true},
      {"dec2", arch.dec1 + arch.enc0, arch.dec2, 1, true},
      {"mask_head.0", arch.dec2, arch.head_hidden, 1, true},
      {"mask_head.1", arch.head_hidden, 1, 1, false},
      {"up_head.0", arch.dec2, arch.head_hidden, 1, true},
      {"up_head.1", arch.head_hidden, k, 1, false},
      {"down_head.0", arch.dec2, arch.head_hidden, 1, true},
      {"down_head.1", arch.head_hidden, k, 1, false},
  }};
  std::mt19937_64 rng(seed);
  for (int l = 0; l < kLayerCount; ++l) {
    auto& layer = layers_[l];
    const auto& s = specs[l];
    layer.name = s.name;
    layer.in_channels = s.in;
    layer.out_channels = s.out;
    layer.stride = s.stride;
    layer.relu = s.relu;
    layer.weight.assign(static_cast<std::size_t>(s.out) * s.in * 9, T(0));
    layer.bias.assign(static_cast<std::size_t>(s.out), T(0));
    const bool zero = mode == InitMode::zero_head_outputs && !s.relu;
    // He-uniform for ReLU layers, LeCun-uniform for the linear head outputs.
    const double bound = std::sqrt((s.relu ? 6.0 : 3.0) / layer.fan_in());
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : layer.weight) {
      const double v = dist(rng);
      w = zero ? T(0) : static_cast<T>(v);
    }
  }
}

template <typename T>
std::size_t MicroNet<T>::parameter_count() const {
  std::size_t n = 2;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

template <typename T>
bool MicroNet<T>::all_finite() const {
  if (!std::isfinite(w_mask) || !std::isfinite(w_seq)) return false;
  for (const auto& l : layers_) {
    for (auto v : l.weight) if (!std::isfinite(static_cast<double>(v))) return false;
    for (auto v : l.bias) if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <typename T>
Gradients<T> MicroNet<T>::make_gradients() const {
  Gradients<T> g;
  for (int l = 0; l < kLayerCount; ++l) {
    g.weight[l].assign(layers_[l].weight.size(), T(0));
    g.bias[l].assign(layers_[l].bias.size(), T(0));
  }
  return g;
}

template <typename T>
const Tensor3<T>& MicroNet<T>::forward(const Tensor3<T>& input, Workspace<T>& ws) const {
  if (input.channels != 3 || input.height <= 0 || input.width <= 0 || input.height % 4 != 0 ||
      input.width % 4 != 0) {
    std::ostringstream oss;
    oss << "network input must be 3 x H x W with H, W multiples of 4 (got " << input.channels
        << " x " << input.height << " x " << input.width << ")";
    fail(ErrorCode::shape, oss.str());
  }
  ws.height = input.height;
  ws.width = input.width;
  auto& a = ws.act;
  conv_forward(layers_[kEnc0], input, ws.cols[kEnc0], a[kEnc0]);
  conv_forward(layers_[kEnc1], a[kEnc0], ws.cols[kEnc1], a[kEnc1]);
  conv_forward(layers_[kEnc2], a[kEnc1], ws.cols[kEnc2], a[kEnc2]);
  conv_forward(layers_[kEnc3], a[kEnc2], ws.cols[kEnc3], a[kEnc3]);
  conv_forward(layers_[kEnc4], a[kEnc3], ws.cols[kEnc4], a[kEnc4]);
  upsample2_concat(a[kEnc4], a[kEnc2], ws.cat1);
  conv_forward(layers_[kDec1], ws.cat1, ws.cols[kDec1], a[kDec1]);
  upsample2_concat(a[kDec1], a[kEnc0], ws.cat2);
  conv_forward(layers_[kDec2], ws.cat2, ws.cols[kDec2], a[kDec2]);

  // The three hidden head layers read the same im2col buffer.
  const int H = input.height;
  const int W = input.width;
  conv_forward(layers_[kMaskHidden], a[kDec2], ws.cols[kMaskHidden], a[kMaskHidden]);
  conv_apply(layers_[kUpHidden], ws.cols[kMaskHidden], H, W, a[kUpHidden]);
  conv_apply(layers_[kDownHidden], ws.cols[kMaskHidden], H, W, a[kDownHidden]);
  conv_forward(layers_[kMaskOut], a[kMaskHidden], ws.cols[kMaskOut], a[kMaskOut]);
  conv_forward(layers_[kUpOut], a[kUpHidden], ws.cols[kUpOut], a[kUpOut]);
  conv_forward(layers_[kDownOut], a[kDownHidden], ws.cols[kDownOut], a[kDownOut]);

  ws.logits = Tensor3<T>(arch_.output_channels(), H, W);
  auto it = ws.logits.data.begin();
  for (int l : {kMaskOut, kUpOut, kDownOut}) it = std::copy(a[l].data.begin(), a[l].data.end(), it);
  return ws.logits;
}

template <typename T>
void MicroNet<T>::backward(const Tensor3<T>& dlogits, Workspace<T>& ws, Gradients<T>& g) const {
  const int H = ws.height;
  const int W = ws.width;
  const int P = H * W;
  const int k = num_classes(arch_.L);
  auto& a = ws.act;
  if (dlogits.channels != arch_.output_channels() || dlogits.height != H || dlogits.width != W) {
    fail(ErrorCode::shape, "backward: gradient does not match the cached forward pass");
  }

  // Heads: output layers are linear, hidden layers share one im2col buffer.
  std::vector<T> dhidden;
  std::vector<T> dcols_feat;
  bool first_head = true;
  const struct {
    int hidden, out, offset;
  } heads[] = {{kMaskHidden, kMaskOut, 0}, {kUpHidden, kUpOut, 1}, {kDownHidden, kDownOut, 1 + k}};
  for (const auto& hd : heads) {
    const T* dout = dlogits.channel(hd.offset);
    conv_param_grads(layers_[hd.out], ws.cols[hd.out], dout, P, g.weight[hd.out], g.bias[hd.out]);
    conv_input_cols(layers_[hd.out], dout, P, ws.scratch, false);
    dhidden.resize(static_cast<std::size_t>(arch_.head_hidden) * P);
    col2im(ws.scratch.data(), arch_.head_hidden, H, W, 1, dhidden.data());
    relu_backward(a[hd.hidden], dhidden.data());
    conv_param_grads(layers_[hd.hidden], ws.cols[kMaskHidden], dhidden.data(), P,
                     g.weight[hd.hidden], g.bias[hd.hidden]);
    conv_input_cols(layers_[hd.hidden], dhidden.data(), P, dcols_feat, !first_head);
    first_head = false;
  }
  Tensor3<T> dfeat(arch_.dec2, H, W);
  col2im(dcols_feat.data(), arch_.dec2, H, W, 1, dfeat.data.data());

  // Generic conv backward for the trunk; returns d input.
  auto back = [&](int l, T* dout, const Tensor3<T>& in_shape_src, std::vector<T>& din) {
    relu_backward(a[l], dout);
    const auto& layer = layers_[l];
    const int p = a[l].height * a[l].width;
    conv_param_grads(layer, ws.cols[l], dout, p, g.weight[l], g.bias[l]);
    conv_input_cols(layer, dout, p, ws.scratch, false);
    din.resize(in_shape_src.data.size());
    col2im(ws.scratch.data(), in_shape_src.channels, in_shape_src.height, in_shape_src.width,
           layer.stride, din.data());
  };

  std::vector<T> dcat2;
  back(kDec2, dfeat.data.data(), ws.cat2, dcat2);
  Tensor3<T> dcat2_t(ws.cat2.channels, H, W);
  dcat2_t.data = std::move(dcat2);
  std::vector<T> da0(a[kEnc0].data.size(), T(0));
  std::vector<T> ddec1;
  upsample2_concat_backward(dcat2_t, arch_.dec1, a[kDec1].height, a[kDec1].width, ddec1, da0.data());

  std::vector<T> dcat1;
  back(kDec1, ddec1.data(), ws.cat1, dcat1);
  Tensor3<T> dcat1_t(ws.cat1.channels, ws.cat1.height, ws.cat1.width);
  dcat1_t.data = std::move(dcat1);
  std::vector<T> da2(a[kEnc2].data.size(), T(0));
  std::vector<T> da4;
  upsample2_concat_backward(dcat1_t, arch_.enc2, a[kEnc4].height, a[kEnc4].width, da4, da2.data());

  std::vector<T> da3, da2_trunk, da1, da0_trunk, dinput;
  back(kEnc4, da4.data(), a[kEnc3], da3);
  back(kEnc3, da3.data(), a[kEnc2], da2_trunk);
  for (std::size_t i = 0; i < da2.size(); ++i) da2[i] += da2_trunk[i];
  back(kEnc2, da2.data(), a[kEnc1], da1);
  back(kEnc1, da1.data(), a[kEnc0], da0_trunk);
  for (std::size_t i = 0; i < da0.size(); ++i) da0[i] += da0_trunk[i];
  // First layer: only parameter gradients are needed.
  relu_backward(a[kEnc0], da0.data());
  conv_param_grads(layers_[kEnc0], ws.cols[kEnc0], da0.data(), P, g.weight[kEnc0], g.bias[kEnc0]);
}

template <typename T>
LossBreakdown head_loss(const Tensor3<T>& logits, const TargetSet& targets, double w_mask,
                        double w_seq, Tensor3<T>* dlogits) {
  const int k = (logits.channels - 1) / 2;
  if (logits.channels != 1 + 2 * k || k != num_classes(targets.L) ||
      logits.height != targets.height || logits.width != targets.width) {
    fail(ErrorCode::shape, "head_loss: logits do not match targets");
  }
  const std::size_t n = logits.plane();
  std::vector<double> lane(n);
  std::vector<double> up(n * k);
  std::vector<double> down(n * k);
  for (std::size_t px = 0; px < n; ++px) {
    const double z = logits.data[px];
    lane[px] = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    for (int block = 0; block < 2; ++block) {
      double* dst = (block == 0 ? up.data() : down.data()) + px * k;
      const int base = 1 + block * k;
      double mx = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) mx = std::max(mx, static_cast<double>(logits.data[(base + c) * n + px]));
      double sum = 0.0;
      for (int c = 0; c < k; ++c) {
        dst[c] = std::exp(static_cast<double>(logits.data[(base + c) * n + px]) - mx);
        sum += dst[c];
      }
      for (int c = 0; c < k; ++c) dst[c] /= sum;
    }
  }
  const MaskLoss m = mask_nll(lane, targets.mask);
  const SeqLoss s = seq_nll(up, down, targets.up_idx, targets.down_idx, k);
  const LossBreakdown b = combined_loss(m.loss, s.loss, w_mask, w_seq);
  if (dlogits) {
    *dlogits = Tensor3<T>(logits.channels, logits.height, logits.width);
    for (std::size_t px = 0; px < n; ++px) {
      dlogits->data[px] = static_cast<T>(b.mask_scale * m.grad_logit[px]);
      for (int c = 0; c < k; ++c) {
        dlogits->data[(1 + c) * n + px] = static_cast<T>(b.seq_scale * s.grad_up[px * k + c]);
        dlogits->data[(1 + k + c) * n + px] = static_cast<T>(b.seq_scale * s.grad_down[px * k + c]);
      }
    }
  }
  return b;
}

template <typename T>
LossBreakdown loss_and_gradients(const MicroNet<T>& net, const Tensor3<T>& input,
                                 const TargetSet& targets, Workspace<T>& ws, Gradients<T>& grads) {
  if (grads.weight[0].size() != net.layers()[0].weight.size()) grads = net.make_gradients();
  grads.zero();
  const Tensor3<T>& logits = net.forward(input, ws);
  Tensor3<T> dlogits;
  const LossBreakdown b = head_loss(logits, targets, net.w_mask, net.w_seq, &dlogits);
  net.backward(dlogits, ws, grads);
  grads.w_mask = b.d_w_mask;
  grads.w_seq = b.d_w_seq;
  return b;
}

template <typename T>
HeadField predict(const MicroNet<T>& net, const Image& image, Workspace<T>& ws) {
  const auto& logits = net.forward(to_tensor<T>(image), ws);
  std::vector<float> raw(logits.data.begin(), logits.data.end());
  return from_planar_logits(raw, logits.height, logits.width, net.L());
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const MicroNet<T>& net) {
  AdamState s;
  for (int l = 0; l < kLayerCount; ++l) {
    s.m_weight[l].assign(net.layers()[l].weight.size(), T(0));
    s.v_weight[l].assign(net.layers()[l].weight.size(), T(0));
    s.m_bias[l].assign(net.layers()[l].bias.size(), T(0));
    s.v_bias[l].assign(net.layers()[l].bias.size(), T(0));
  }
  return s;
}

template <typename T>
void adam_step(MicroNet<T>& net, AdamState<T>& st, const Gradients<T>& g, double lr,
               const AdamConfig& cfg, bool learn_task_weights) {
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  auto update = [&](T& p, T& m, T& v, double grad) {
    const double mm = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
    const double vv = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
    m = static_cast<T>(mm);
    v = static_cast<T>(vv);
    p = static_cast<T>(p - lr * (mm / c1) / (std::sqrt(vv / c2) + cfg.eps));
  };
  for (int l = 0; l < kLayerCount; ++l) {
    auto& layer = net.layers()[l];
    for (std::size_t i = 0; i < layer.weight.size(); ++i) {
      update(layer.weight[i], st.m_weight[l][i], st.v_weight[l][i], g.weight[l][i]);
    }
    for (std::size_t i = 0; i < layer.bias.size(); ++i) {
      update(layer.bias[i], st.m_bias[l][i], st.v_bias[l][i], g.bias[l][i]);
    }
  }
  if (learn_task_weights) {
    auto update_scalar = [&](double& p, double& m, double& v, double grad) {
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad;
      p -= lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
    };
    update_scalar(net.w_mask, st.m_w_mask, st.v_w_mask, g.w_mask);
    update_scalar(net.w_seq, st.m_w_seq, st.v_w_seq, g.w_seq);
  }
}

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) fail(ErrorCode::config, "train.lr must be >= 0");
  if (batch_size < 1) fail(ErrorCode::config, "train.batch_size must be >= 1");
  if (epochs < 0) fail(ErrorCode::config, "train.epochs must be >= 0");
  if (halve_every < 0) fail(ErrorCode::config, "train.halve_every must be >= 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    fail(ErrorCode::config, "train.beta1/beta2 must be in [0, 1)");
  }
  if (!(adam.eps > 0.0)) fail(ErrorCode::config, "train.eps must be positive");
}

double TrainConfig::lr_at_epoch(int epoch) const {
  if (halve_every <= 0) return lr;
  return lr * std::pow(0.5, epoch / halve_every);
}

int resolve_threads(int requested) {
  int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FASTDRAW_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return std::max(1, n);
}

namespace {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(c)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

TrainHistory train(MicroNet<float>& net, AdamState<float>& opt, std::span<const TrainSample> data,
                   const TrainConfig& cfg, const PerturbConfig& perturb,
                   const EpochCallback& on_epoch) {
  cfg.validate();
  perturb.validate();
  if (data.empty()) fail(ErrorCode::invalid_argument, "training set is empty");
  if (perturb.L != net.L()) fail(ErrorCode::config, "perturb.L differs from the network's L");
  if (opt.m_weight[0].size() != net.layers()[0].weight.size()) opt = AdamState<float>::zeros_like(net);

  const int threads = std::min(resolve_threads(cfg.threads), cfg.batch_size);
  std::vector<Tensor3<float>> inputs;
  inputs.reserve(data.size());
  for (const auto& s : data) inputs.push_back(to_tensor<float>(s.image));

  std::vector<Workspace<float>> workspaces(static_cast<std::size_t>(threads));
  std::vector<Gradients<float>> item_grads(static_cast<std::size_t>(cfg.batch_size),
                                           net.make_gradients());
  std::vector<LossBreakdown> item_loss(static_cast<std::size_t>(cfg.batch_size));
  Gradients<float> total = net.make_gradients();

  TrainHistory history;
  std::vector<std::size_t> order(data.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cfg.lr_at_epoch(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(epoch), 0x5u));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord rec{epoch, lr, 0.0, 0.0, 0.0};
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t count = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      auto run_item = [&](std::size_t item, Workspace<float>& ws) {
        const std::size_t idx = order[start + item];
        const TargetSet targets = build_targets(
            data[idx].annotation, perturb,
            mix_seed(cfg.rng_seed, static_cast<std::uint64_t>(epoch) + 1, idx + 1));
        item_loss[item] = loss_and_gradients(net, inputs[idx], targets, ws, item_grads[item]);
      };
      if (threads <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) run_item(i, workspaces[0]);
      } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
          pool.emplace_back([&, t] {
            for (std::size_t i = static_cast<std::size_t>(t); i < count; i += threads) {
              run_item(i, workspaces[static_cast<std::size_t>(t)]);
            }
          });
        }
        for (auto& th : pool) th.join();
      }
      total.zero();
      LossBreakdown mean;
      for (std::size_t i = 0; i < count; ++i) {
        total += item_grads[i];
        mean.mask_nll += item_loss[i].mask_nll / count;
        mean.seq_nll += item_loss[i].seq_nll / count;
        mean.combined += item_loss[i].combined / count;
      }
      mean.w_mask = net.w_mask;
      mean.w_seq = net.w_seq;
      if (!std::isfinite(mean.combined)) {
        std::ostringstream oss;
        oss << "non-finite loss at epoch " << epoch << ", step " << opt.step
            << " (mask " << mean.mask_nll << ", seq " << mean.seq_nll << ")";
        fail(ErrorCode::divergence, oss.str());
      }
      total.scale(1.0 / static_cast<double>(count));
      adam_step(net, opt, total, lr, cfg.adam, cfg.learn_task_weights);
      history.steps.push_back({epoch, opt.step, lr, mean});
      rec.combined += mean.combined;
      rec.mask_nll += mean.mask_nll;
      rec.seq_nll += mean.seq_nll;
      ++batches;
    }
    if (!net.all_finite()) fail(ErrorCode::divergence, "non-finite parameters after update");
    rec.combined /= static_cast<double>(batches);
    rec.mask_nll /= static_cast<double>(batches);
    rec.seq_nll /= static_cast<double>(batches);
    history.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec, net, opt);
  }
  return history;
}

#define FASTDRAW_INSTANTIATE(T)                                                                   \
  template Tensor3<T> to_tensor<T>(const Image&);                                                 \
  template struct Gradients<T>;                                                                   \
  template class MicroNet<T>;                                                                     \
  template LossBreakdown head_loss<T>(const Tensor3<T>&, const TargetSet&, double, double,         \
                                      Tensor3<T>*);                                               \
  template LossBreakdown loss_and_gradients<T>(const MicroNet<T>&, const Tensor3<T>&,             \
                                               const TargetSet&, Workspace<T>&, Gradients<T>&);   \
  template HeadField predict<T>(const MicroNet<T>&, const Image&, Workspace<T>&);                 \
  template struct AdamState<T>;                                                                   \
  template void adam_step<T>(MicroNet<T>&, AdamState<T>&, const Gradients<T>&, double,            \
                             const AdamConfig&, bool);

FASTDRAW_INSTANTIATE(float)
FASTDRAW_INSTANTIATE(double)

#undef FASTDRAW_INSTANTIATE

}  // namespace fastdraw::nn
