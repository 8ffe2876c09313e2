#include "fastdraw/loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fastdraw/error.hpp"

namespace fastdraw {

namespace {

double clipped_log(double p) { return std::log(std::clamp(p, kProbClip, 1.0 - kProbClip)); }

}  // namespace

MaskLoss mask_nll(std::span<const double> lane_prob, std::span<const std::uint8_t> mask) {
  if (lane_prob.size() != mask.size()) fail(ErrorCode::shape, "mask_nll: shape mismatch");
  MaskLoss out;
  const std::size_t n = lane_prob.size();
  out.grad_logit.resize(n);
  if (n == 0) return out;
  const double inv_n = 1.0 / static_cast<double>(n);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = lane_prob[i];
    const double t = mask[i] ? 1.0 : 0.0;
    sum -= mask[i] ? clipped_log(p) : clipped_log(1.0 - p);
    out.grad_logit[i] = (p - t) * inv_n;
  }
  out.loss = sum * inv_n;
  return out;
}

SeqLoss seq_nll(std::span<const double> up_probs, std::span<const double> down_probs,
                std::span<const std::int16_t> up_idx, std::span<const std::int16_t> down_idx,
                int classes) {
  const std::size_t n = up_idx.size();
  const auto k = static_cast<std::size_t>(classes);
  if (down_idx.size() != n || up_probs.size() != n * k || down_probs.size() != n * k) {
    fail(ErrorCode::shape, "seq_nll: shape mismatch");
  }
  SeqLoss out;
  out.grad_up.assign(n * k, 0.0);
  out.grad_down.assign(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto idx : {up_idx[i], down_idx[i]}) {
      if (idx >= classes) {
        std::ostringstream oss;
        oss << "seq_nll: target class " << idx << " outside [0, " << classes - 1 << "]";
        fail(ErrorCode::index, oss.str());
      }
      out.supervised += idx >= 0;
    }
  }
  if (out.supervised == 0) return out;
  const double inv = 1.0 / static_cast<double>(out.supervised);
  double sum = 0.0;
  auto accumulate = [&](std::span<const double> probs, std::span<const std::int16_t> idx,
                        std::vector<double>& grad) {
    for (std::size_t i = 0; i < n; ++i) {
      if (idx[i] < 0) continue;
      const double* p = probs.data() + i * k;
      double* g = grad.data() + i * k;
      sum -= clipped_log(p[idx[i]]);
      for (std::size_t c = 0; c < k; ++c) g[c] = p[c] * inv;
      g[idx[i]] -= inv;
    }
  };
  accumulate(up_probs, up_idx, out.grad_up);
  accumulate(down_probs, down_idx, out.grad_down);
  out.loss = sum * inv;
  return out;
}

LossBreakdown combined_loss(double mask_loss, double seq_loss, double w_mask, double w_seq) {
  LossBreakdown b;
  b.mask_nll = mask_loss;
  b.seq_nll = seq_loss;
  b.w_mask = w_mask;
  b.w_seq = w_seq;
  b.mask_scale = std::exp(-w_mask);
  b.seq_scale = std::exp(-w_seq);
  b.combined = b.mask_scale * mask_loss + b.seq_scale * seq_loss + w_mask + w_seq;
  b.d_w_mask = 1.0 - b.mask_scale * mask_loss;
  b.d_w_seq = 1.0 - b.seq_scale * seq_loss;
  return b;
}

}  // namespace fastdraw
