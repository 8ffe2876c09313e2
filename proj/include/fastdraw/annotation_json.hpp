#pragma once

#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "fastdraw/geometry.hpp"

namespace fastdraw {

// Tusimple-compatible record: {"raw_file", "h_samples": [int...],
// "lanes": [[w...]...]} with w = -2 for rows a lane does not cover. Optional
// extras: "image_id", "image_size": [H, W], "style", "std": [[...]...].
nlohmann::json to_tusimple_json(const AnnotationSet& ann, const std::string& raw_file,
                                const std::vector<std::vector<double>>* per_row_std = nullptr);
// Missing "image_size" falls back to `size`. Lanes with fewer than two valid
// samples are dropped.
AnnotationSet annotation_from_json(const nlohmann::json& record, std::optional<ImageSize> size = {});

struct DatasetRecord {
  std::string image_id;
  std::string raw_file;  // relative to the manifest directory
  std::string style = "base";
  AnnotationSet annotation;
};

struct Manifest {
  ImageSize image_size;
  int L = 6;
  std::vector<DatasetRecord> records;
};

void save_manifest(const std::string& path, const Manifest& manifest);
Manifest load_manifest(const std::string& path);

struct PredictionRecord {
  std::string image_id;
  std::string raw_file;
  AnnotationSet lanes;
  std::vector<std::vector<double>> per_row_std;
  double run_time_ms = 0.0;
};

// JSON lines, one record per image.
void save_predictions(const std::string& path, const std::vector<PredictionRecord>& preds);
std::vector<PredictionRecord> load_predictions(const std::string& path);

}  // namespace fastdraw
