#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fastdraw/geometry.hpp"
#include "fastdraw/heads.hpp"
#include "fastdraw/image.hpp"
#include "fastdraw/loss.hpp"
#include "fastdraw/targets.hpp"

namespace fastdraw::nn {

template <typename T>
struct Tensor3 {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<T> data;

  Tensor3() = default;
  Tensor3(int c, int h, int w, T fill = T(0))
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  T* channel(int c) { return data.data() + c * plane(); }
  const T* channel(int c) const { return data.data() + c * plane(); }
};

template <typename T>
Tensor3<T> to_tensor(const Image& image);

// Channel widths of the encoder-decoder. The defaults give
// conv(3->16) | s2 conv(16->32) | conv(32->32) | s2 conv(32->64) | conv(64->64)
// | up+skip conv(96->32) | up+skip conv(48->32) | three 2-layer heads with
// head_hidden channels in between.
struct Architecture {
  int L = 6;
  int enc0 = 16;
  int enc1 = 32;
  int enc2 = 64;
  int dec1 = 32;
  int dec2 = 32;
  int head_hidden = 64;

  int output_channels() const { return head_channels(L); }
  void validate() const;
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

enum Layer : int {
  kEnc0,
  kEnc1,
  kEnc2,
  kEnc3,
  kEnc4,
  kDec1,
  kDec2,
  kMaskHidden,
  kMaskOut,
  kUpHidden,
  kUpOut,
  kDownHidden,
  kDownOut,
  kLayerCount
};

// 3x3 convolution, zero padding 1.
template <typename T>
struct ConvLayer {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  bool relu = true;
  std::vector<T> weight;  // out x in x 3 x 3
  std::vector<T> bias;    // out

  int fan_in() const { return in_channels * 9; }
};

template <typename T>
struct Gradients {
  std::array<std::vector<T>, kLayerCount> weight;
  std::array<std::vector<T>, kLayerCount> bias;
  double w_mask = 0.0;
  double w_seq = 0.0;

  void zero();
  Gradients& operator+=(const Gradients& other);
  void scale(double factor);
  double squared_norm() const;
};

// Cached activations of one forward pass; one per concurrent sample.
template <typename T>
struct Workspace {
  int height = 0;
  int width = 0;
  std::array<Tensor3<T>, kLayerCount> act;
  std::array<std::vector<T>, kLayerCount> cols;
  Tensor3<T> cat1;
  Tensor3<T> cat2;
  Tensor3<T> logits;
  std::vector<T> scratch;
};

enum class InitMode { fan_in_uniform, zero_head_outputs };

template <typename T>
class MicroNet {
 public:
  MicroNet() = default;
  MicroNet(const Architecture& arch, std::uint64_t seed,
           InitMode mode = InitMode::fan_in_uniform);

  const Architecture& arch() const noexcept { return arch_; }
  int L() const noexcept { return arch_.L; }
  std::array<ConvLayer<T>, kLayerCount>& layers() noexcept { return layers_; }
  const std::array<ConvLayer<T>, kLayerCount>& layers() const noexcept { return layers_; }
  std::size_t parameter_count() const;
  bool all_finite() const;

  // Task log-variances (w = log sigma^2) of the learned loss weighting.
  double w_mask = 0.0;
  double w_seq = 0.0;

  // Raw logits, channel-major [lane | up (2L+2) | down (2L+2)] x H x W.
  // H and W must be multiples of 4.
  const Tensor3<T>& forward(const Tensor3<T>& input, Workspace<T>& ws) const;
  // Back-propagates d loss / d logits through the pass cached in `ws`.
  void backward(const Tensor3<T>& dlogits, Workspace<T>& ws, Gradients<T>& grads) const;

  Gradients<T> make_gradients() const;

 private:
  Architecture arch_;
  std::array<ConvLayer<T>, kLayerCount> layers_;
};

// Loss of raw logits against targets and its gradient w.r.t. the logits.
template <typename T>
LossBreakdown head_loss(const Tensor3<T>& logits, const TargetSet& targets, double w_mask,
                        double w_seq, Tensor3<T>* dlogits);

// Forward, loss, backward for one sample. `grads` is overwritten.
template <typename T>
LossBreakdown loss_and_gradients(const MicroNet<T>& net, const Tensor3<T>& input,
                                 const TargetSet& targets, Workspace<T>& ws, Gradients<T>& grads);

template <typename T>
HeadField predict(const MicroNet<T>& net, const Image& image, Workspace<T>& ws);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  std::int64_t step = 0;
  std::array<std::vector<T>, kLayerCount> m_weight, v_weight, m_bias, v_bias;
  double m_w_mask = 0.0, v_w_mask = 0.0, m_w_seq = 0.0, v_w_seq = 0.0;

  static AdamState zeros_like(const MicroNet<T>& net);
};

template <typename T>
void adam_step(MicroNet<T>& net, AdamState<T>& state, const Gradients<T>& grads, double lr,
               const AdamConfig& cfg, bool learn_task_weights = true);

struct TrainConfig {
  double lr = 1e-4;
  int batch_size = 4;
  int epochs = 7;
  int halve_every = 2;  // epochs between learning-rate halvings; 0 disables
  AdamConfig adam;
  std::uint64_t rng_seed = 1;
  int threads = 0;      // 0: hardware concurrency, capped by FASTDRAW_THREADS
  bool learn_task_weights = true;

  void validate() const;
  double lr_at_epoch(int epoch) const;
};

struct TrainSample {
  Image image;
  AnnotationSet annotation;
};

struct StepRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  LossBreakdown loss;  // batch mean
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double combined = 0.0;
  double mask_nll = 0.0;
  double seq_nll = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
};

using EpochCallback =
    std::function<void(const EpochRecord&, const MicroNet<float>&, const AdamState<float>&)>;

// Mini-batch Adam over `data`. Perturbed targets are re-drawn every epoch
// from (rng_seed, epoch, sample). Throws divergence on a non-finite loss.
TrainHistory train(MicroNet<float>& net, AdamState<float>& opt, std::span<const TrainSample> data,
                   const TrainConfig& cfg, const PerturbConfig& perturb,
                   const EpochCallback& on_epoch = {});

int resolve_threads(int requested);

}  // namespace fastdraw::nn
