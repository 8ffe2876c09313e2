#include "fastdraw/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fastdraw/error.hpp"
#include "fastdraw/evaluation.hpp"

namespace fastdraw {

using nlohmann::json;

double EvalConfig::point_tolerance(int image_width) const {
  return pt_tol_px > 0.0 ? pt_tol_px : tusimple_point_tolerance(image_width);
}

double EvalConfig::stroke_width(int image_width) const {
  return stroke_width_px > 0.0 ? stroke_width_px : culane_stroke_width(image_width);
}

void RunConfig::finalize() {
  scene.L = L;
  perturb.L = L;
  arch.L = L;
  scene.rng_seed = seed;
  train.rng_seed = seed;
  scene.validate();
  perturb.validate();
  arch.validate();
  train.validate();
  decode.validate();
  if (!(eval.lane_tol_frac > 0.0 && eval.lane_tol_frac <= 1.0)) {
    fail(ErrorCode::config, "eval.lane_tol_frac must be in (0, 1]");
  }
  if (!(eval.iou_threshold >= 0.0 && eval.iou_threshold < 1.0)) {
    fail(ErrorCode::config, "eval.iou_threshold must be in [0, 1)");
  }
  if (generate.count < 0) fail(ErrorCode::config, "generate.count must be >= 0");
  for (const auto& s : generate.styles) find_preset(scene.style_presets, s);
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.finalize();
  return cfg;
}

namespace {

using Setter = std::function<void(RunConfig&, const json&)>;

template <typename T>
Setter field(T RunConfig::*member) {
  return [member](RunConfig& c, const json& v) { c.*member = v.get<T>(); };
}

template <typename S, typename T>
Setter nested(S RunConfig::*section, T S::*member) {
  return [section, member](RunConfig& c, const json& v) { (c.*section).*member = v.get<T>(); };
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

StylePreset preset_from_json(const json& j) {
  StylePreset p;
  p.name = j.at("name").get<std::string>();
  p.gain = j.value("gain", 1.0);
  if (j.contains("bias")) p.bias = j.at("bias").get<std::array<double, 3>>();
  p.gamma = j.value("gamma", 1.0);
  p.hue_degrees = j.value("hue_degrees", 0.0);
  p.noise_sigma = j.value("noise_sigma", 0.0);
  p.vignette = j.value("vignette", 0.0);
  return p;
}

const std::map<std::string, Setter>& registry() {
  static const std::map<std::string, Setter> keys = {
      {"seed", field(&RunConfig::seed)},
      {"L", field(&RunConfig::L)},
      {"output_dir", field(&RunConfig::output_dir)},
      {"scene.height", [](RunConfig& c, const json& v) { c.scene.image_size.height = v.get<int>(); }},
      {"scene.width", [](RunConfig& c, const json& v) { c.scene.image_size.width = v.get<int>(); }},
      {"scene.lanes_min", nested(&RunConfig::scene, &SceneConfig::lanes_min)},
      {"scene.lanes_max", nested(&RunConfig::scene, &SceneConfig::lanes_max)},
      {"scene.curvature", nested(&RunConfig::scene, &SceneConfig::curvature)},
      {"scene.lane_width_min", nested(&RunConfig::scene, &SceneConfig::lane_width_min)},
      {"scene.lane_width_max", nested(&RunConfig::scene, &SceneConfig::lane_width_max)},
      {"scene.noise_amplitude", nested(&RunConfig::scene, &SceneConfig::noise_amplitude)},
      {"scene.gradient_strength", nested(&RunConfig::scene, &SceneConfig::gradient_strength)},
      {"scene.min_lane_rows", nested(&RunConfig::scene, &SceneConfig::min_lane_rows)},
      {"scene.presets",
       [](RunConfig& c, const json& v) {
         for (const auto& p : v) {
           StylePreset preset = preset_from_json(p);
           auto& list = c.scene.style_presets;
           auto it = std::find_if(list.begin(), list.end(),
                                  [&](const StylePreset& s) { return s.name == preset.name; });
           if (it != list.end()) {
             *it = preset;
           } else {
             list.push_back(preset);
           }
         }
       }},
      {"perturb.sigma", nested(&RunConfig::perturb, &PerturbConfig::sigma)},
      {"perturb.copies", nested(&RunConfig::perturb, &PerturbConfig::copies)},
      {"arch.enc0", nested(&RunConfig::arch, &nn::Architecture::enc0)},
      {"arch.enc1", nested(&RunConfig::arch, &nn::Architecture::enc1)},
      {"arch.enc2", nested(&RunConfig::arch, &nn::Architecture::enc2)},
      {"arch.dec1", nested(&RunConfig::arch, &nn::Architecture::dec1)},
      {"arch.dec2", nested(&RunConfig::arch, &nn::Architecture::dec2)},
      {"arch.head_hidden", nested(&RunConfig::arch, &nn::Architecture::head_hidden)},
      {"arch.init",
       [](RunConfig& c, const json& v) {
         const auto name = v.get<std::string>();
         if (name == "fan_in_uniform") {
           c.init = nn::InitMode::fan_in_uniform;
         } else if (name == "zero_head_outputs") {
           c.init = nn::InitMode::zero_head_outputs;
         } else {
           fail(ErrorCode::config, "arch.init must be fan_in_uniform or zero_head_outputs");
         }
       }},
      {"train.lr", nested(&RunConfig::train, &nn::TrainConfig::lr)},
      {"train.batch_size", nested(&RunConfig::train, &nn::TrainConfig::batch_size)},
      {"train.epochs", nested(&RunConfig::train, &nn::TrainConfig::epochs)},
      {"train.halve_every", nested(&RunConfig::train, &nn::TrainConfig::halve_every)},
      {"train.threads", nested(&RunConfig::train, &nn::TrainConfig::threads)},
      {"train.learn_task_weights", nested(&RunConfig::train, &nn::TrainConfig::learn_task_weights)},
      {"train.beta1", [](RunConfig& c, const json& v) { c.train.adam.beta1 = v.get<double>(); }},
      {"train.beta2", [](RunConfig& c, const json& v) { c.train.adam.beta2 = v.get<double>(); }},
      {"train.eps", [](RunConfig& c, const json& v) { c.train.adam.eps = v.get<double>(); }},
      {"decode.p_min", nested(&RunConfig::decode, &DecodeConfig::p_min)},
      {"decode.cluster_eps", nested(&RunConfig::decode, &DecodeConfig::cluster_eps)},
      {"decode.cluster_min_points", nested(&RunConfig::decode, &DecodeConfig::cluster_min_points)},
      {"decode.center_mask_fraction", nested(&RunConfig::decode, &DecodeConfig::center_mask_fraction)},
      {"decode.max_steps", nested(&RunConfig::decode, &DecodeConfig::max_steps)},
      {"decode.seed_isolated", nested(&RunConfig::decode, &DecodeConfig::seed_isolated)},
      {"eval.pt_tol_px", nested(&RunConfig::eval, &EvalConfig::pt_tol_px)},
      {"eval.lane_tol_frac", nested(&RunConfig::eval, &EvalConfig::lane_tol_frac)},
      {"eval.stroke_width_px", nested(&RunConfig::eval, &EvalConfig::stroke_width_px)},
      {"eval.iou_threshold", nested(&RunConfig::eval, &EvalConfig::iou_threshold)},
      {"generate.count", nested(&RunConfig::generate, &GenerateConfig::count)},
      {"generate.styles",
       [](RunConfig& c, const json& v) {
         c.generate.styles = v.is_string() ? split_list(v.get<std::string>())
                                           : v.get<std::vector<std::string>>();
       }},
  };
  return keys;
}

void set_key(RunConfig& cfg, const std::string& key, const json& value) {
  const auto& keys = registry();
  const auto it = keys.find(key);
  if (it == keys.end()) fail(ErrorCode::config, "unknown config key '" + key + "'");
  try {
    it->second(cfg, value);
  } catch (const json::exception& e) {
    fail(ErrorCode::config, "bad value for config key '" + key + "': " + e.what());
  } catch (const Error& e) {
    fail(ErrorCode::config, "bad value for config key '" + key + "': " + e.what());
  }
}

void apply_flat(RunConfig& cfg, const json& j, const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object() && !registry().contains(key)) {
      apply_flat(cfg, *it, key);
    } else {
      set_key(cfg, key, *it);
    }
  }
}

}  // namespace

void apply_json(RunConfig& cfg, const json& j) {
  if (!j.is_object()) fail(ErrorCode::config, "config root must be a JSON object");
  apply_flat(cfg, j, "");
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    fail(ErrorCode::config, "override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  set_key(cfg, key, value);
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail(ErrorCode::io, "cannot open config " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) fail(ErrorCode::config, path + ": malformed JSON");
    apply_json(cfg, j);
  }
  for (const auto& o : overrides) apply_override(cfg, o);
  cfg.finalize();
  return cfg;
}

json to_json(const RunConfig& c) {
  json presets = json::array();
  for (const auto& p : c.scene.style_presets) {
    presets.push_back({{"name", p.name},
                       {"gain", p.gain},
                       {"bias", p.bias},
                       {"gamma", p.gamma},
                       {"hue_degrees", p.hue_degrees},
                       {"noise_sigma", p.noise_sigma},
                       {"vignette", p.vignette}});
  }
  return {
      {"seed", c.seed},
      {"L", c.L},
      {"output_dir", c.output_dir},
      {"scene",
       {{"height", c.scene.image_size.height},
        {"width", c.scene.image_size.width},
        {"lanes_min", c.scene.lanes_min},
        {"lanes_max", c.scene.lanes_max},
        {"curvature", c.scene.curvature},
        {"lane_width_min", c.scene.lane_width_min},
        {"lane_width_max", c.scene.lane_width_max},
        {"noise_amplitude", c.scene.noise_amplitude},
        {"gradient_strength", c.scene.gradient_strength},
        {"min_lane_rows", c.scene.min_lane_rows},
        {"presets", presets}}},
      {"perturb", {{"sigma", c.perturb.sigma}, {"copies", c.perturb.copies}}},
      {"arch",
       {{"enc0", c.arch.enc0},
        {"enc1", c.arch.enc1},
        {"enc2", c.arch.enc2},
        {"dec1", c.arch.dec1},
        {"dec2", c.arch.dec2},
        {"head_hidden", c.arch.head_hidden},
        {"init", c.init == nn::InitMode::zero_head_outputs ? "zero_head_outputs" : "fan_in_uniform"}}},
      {"train",
       {{"lr", c.train.lr},
        {"batch_size", c.train.batch_size},
        {"epochs", c.train.epochs},
        {"halve_every", c.train.halve_every},
        {"threads", c.train.threads},
        {"learn_task_weights", c.train.learn_task_weights},
        {"beta1", c.train.adam.beta1},
        {"beta2", c.train.adam.beta2},
        {"eps", c.train.adam.eps}}},
      {"decode",
       {{"p_min", c.decode.p_min},
        {"cluster_eps", c.decode.cluster_eps},
        {"cluster_min_points", c.decode.cluster_min_points},
        {"center_mask_fraction", c.decode.center_mask_fraction},
        {"max_steps", c.decode.max_steps},
        {"seed_isolated", c.decode.seed_isolated}}},
      {"eval",
       {{"pt_tol_px", c.eval.pt_tol_px},
        {"lane_tol_frac", c.eval.lane_tol_frac},
        {"stroke_width_px", c.eval.stroke_width_px},
        {"iou_threshold", c.eval.iou_threshold}}},
      {"generate", {{"count", c.generate.count}, {"styles", c.generate.styles}}},
  };
}

}  // namespace fastdraw
