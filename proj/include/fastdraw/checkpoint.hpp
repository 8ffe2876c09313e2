#pragma once

#include <string>

#include "fastdraw/micronet.hpp"

namespace fastdraw {

// Checkpoint file: "FDCK" | u32 manifest length | JSON manifest | FDT1
// tensors in manifest order (every parameter, then Adam first and second
// moments). The manifest records layer names, shapes, L, the architecture,
// the task log-variances and the scalar optimizer state.
struct Checkpoint {
  nn::MicroNet<float> net;
  nn::AdamState<float> optimizer;
  int epoch = -1;
};

void save_checkpoint(const std::string& path, const nn::MicroNet<float>& net,
                     const nn::AdamState<float>& optimizer, int epoch);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fastdraw
