#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fastdraw {

// Probabilities are clipped to [kProbClip, 1 - kProbClip] before the log.
inline constexpr double kProbClip = 1e-7;

struct MaskLoss {
  double loss = 0.0;
  std::vector<double> grad_logit;  // d loss / d pre-sigmoid logit, per pixel
};

// Mean binary cross-entropy over all pixels.
MaskLoss mask_nll(std::span<const double> lane_prob, std::span<const std::uint8_t> mask);

struct SeqLoss {
  double loss = 0.0;
  std::size_t supervised = 0;
  std::vector<double> grad_up;    // d loss / d logits, pixel-major N x classes
  std::vector<double> grad_down;
};

// Mean cross-entropy over every non-IGNORE (negative) entry of both
// direction grids. Probabilities are pixel-major N x classes.
SeqLoss seq_nll(std::span<const double> up_probs, std::span<const double> down_probs,
                std::span<const std::int16_t> up_idx, std::span<const std::int16_t> down_idx,
                int classes);

// Learned-temperature combination with w = log sigma^2 per task:
//   combined = exp(-w_mask) L_mask + exp(-w_seq) L_seq + w_mask + w_seq
struct LossBreakdown {
  double mask_nll = 0.0;
  double seq_nll = 0.0;
  double combined = 0.0;
  double w_mask = 0.0;
  double w_seq = 0.0;
  double d_w_mask = 0.0;     // d combined / d w_mask = 1 - exp(-w_mask) L_mask
  double d_w_seq = 0.0;
  double mask_scale = 1.0;   // d combined / d L_mask = exp(-w_mask)
  double seq_scale = 1.0;
};

LossBreakdown combined_loss(double mask_loss, double seq_loss, double w_mask, double w_seq);

}  // namespace fastdraw
