#pragma once

#include <cstdint>
#include <json.hpp>
#include <string>
#include <vector>

#include "fastdraw/decoder.hpp"
#include "fastdraw/micronet.hpp"
#include "fastdraw/scenes.hpp"
#include "fastdraw/targets.hpp"

namespace fastdraw {

struct EvalConfig {
  double pt_tol_px = 0.0;        // <= 0: 20 px scaled from 1280-wide images
  double lane_tol_frac = 0.85;
  double stroke_width_px = 0.0;  // <= 0: 30 px scaled from 1640-wide images
  double iou_threshold = 0.5;

  double point_tolerance(int image_width) const;
  double stroke_width(int image_width) const;
};

struct GenerateConfig {
  int count = 200;
  std::vector<std::string> styles;  // extra appearance variants per base scene
};

// Every module's configuration. Loaded from a JSON file (nested objects or
// dotted keys) with flat "section.key=value" overrides on top.
struct RunConfig {
  std::uint64_t seed = 1;
  int L = 6;
  std::string output_dir = "out";
  SceneConfig scene;
  PerturbConfig perturb;
  nn::Architecture arch;
  // Final head layers start at zero so training begins from lane_prob 0.5
  // and uniform step categoricals.
  nn::InitMode init = nn::InitMode::zero_head_outputs;
  nn::TrainConfig train;
  DecodeConfig decode;
  EvalConfig eval;
  GenerateConfig generate;

  // Propagates L and the seed into the nested configs, then validates.
  void finalize();
};

RunConfig default_run_config();
// Throws config error naming the offending key.
void apply_json(RunConfig& cfg, const nlohmann::json& j);
void apply_override(RunConfig& cfg, const std::string& assignment);
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides = {});
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace fastdraw
