#pragma once

#include <array>
#include <string>
#include <vector>

#include "fastdraw/annotation_json.hpp"
#include "fastdraw/checkpoint.hpp"
#include "fastdraw/decoder.hpp"
#include "fastdraw/evaluation.hpp"
#include "fastdraw/run_config.hpp"

namespace fastdraw {

// In-memory dataset: `count` base scenes, each followed by one stylized copy
// per entry of `styles` sharing its annotation.
struct DatasetItem {
  std::string image_id;
  std::string style;
  Image image;
  AnnotationSet annotation;
};
std::vector<DatasetItem> make_dataset(const SceneConfig& scene, int count, std::uint64_t seed,
                                      const std::vector<std::string>& styles);
// Copy of `items` with every image replaced by its `style` version.
std::vector<DatasetItem> restyle(const std::vector<DatasetItem>& items, const SceneConfig& scene,
                                 const std::string& style, std::uint64_t seed);
std::vector<nn::TrainSample> to_train_samples(const std::vector<DatasetItem>& items);

struct EvalSummary {
  MetricTotals totals;
  AgreementReport agreement;
  std::vector<PrPoint> pr_curve;
};

// Runs the network on every item, decodes and scores.
EvalSummary evaluate_model(const nn::MicroNet<float>& net, const std::vector<DatasetItem>& items,
                           const RunConfig& cfg, const std::vector<double>& pr_thresholds = {});

// Overlay colormap: linear blue -> red over per-row std in [0, 9] px.
std::array<float, 3> std_color(double std_px);
Image render_overlay(const Image& background, const std::vector<DecodedLane>& lanes);

// generate: <out_dir>/images/*.ppm + <out_dir>/manifest.json.
struct GenerateResult {
  std::string manifest_path;
  std::size_t images = 0;
};
GenerateResult cmd_generate(const RunConfig& cfg, const std::string& out_dir);

// train: checkpoints per epoch, final.fdck, loss.csv; optional held-out eval.
struct TrainResult {
  std::string checkpoint_path;
  std::string loss_csv;
  nn::TrainHistory history;
  bool has_holdout = false;
  MetricTotals holdout;
};
TrainResult cmd_train(const RunConfig& cfg, const std::string& manifest_path,
                      const std::string& out_dir, const std::string& holdout_manifest = {});

// Where decode/eval/agreement get head fields from: a checkpoint run over the
// manifest images, or FDT1 files named <image_id>.fdt in a directory.
struct FieldSource {
  std::string checkpoint;
  std::string fields_dir;
};

struct DecodeRequest {
  FieldSource source;
  std::string manifest;                 // images (and ids) for checkpoint input
  std::vector<std::string> field_files; // explicit FDT1 inputs
  std::string output;                   // predictions, JSON lines
  std::string overlay_dir;              // empty: no overlays
  std::string save_fields_dir;          // empty: do not save fields
};
struct DecodeResult {
  std::size_t images = 0;
  std::size_t lanes = 0;
  std::size_t overlays = 0;
};
DecodeResult cmd_decode(const RunConfig& cfg, const DecodeRequest& req);

struct EvalRequest {
  std::string predictions;
  std::string gt_manifest;
  std::string output_prefix;            // writes <prefix>.json, <prefix>.csv, <prefix>_pr.txt
  std::vector<double> pr_thresholds;    // requires a field source
  FieldSource source;
};
struct EvalResult {
  MetricTotals totals;
  std::vector<PrPoint> pr_curve;
  bool has_agreement = false;
  AgreementReport agreement;
};
EvalResult cmd_eval(const RunConfig& cfg, const EvalRequest& req);

struct AgreementRequest {
  FieldSource source;
  std::string manifest;
  std::string output;  // JSON report; CSV alongside
};
AgreementReport cmd_agreement(const RunConfig& cfg, const AgreementRequest& req);

// "a:b:step" -> inclusive range.
std::vector<double> parse_sweep(const std::string& spec);

}  // namespace fastdraw
