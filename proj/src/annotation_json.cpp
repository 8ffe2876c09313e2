#include "fastdraw/annotation_json.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "fastdraw/error.hpp"

namespace fastdraw {

using nlohmann::json;

namespace {

constexpr double kAbsent = -2.0;

}  // namespace

json to_tusimple_json(const AnnotationSet& ann, const std::string& raw_file,
                      const std::vector<std::vector<double>>* per_row_std) {
  int first = std::numeric_limits<int>::max();
  int last = std::numeric_limits<int>::min();
  for (const auto& lane : ann.lanes) {
    first = std::min(first, lane.bottom_row());
    last = std::max(last, lane.top_row());
  }
  json rec;
  rec["raw_file"] = raw_file;
  rec["image_id"] = ann.image_id;
  rec["image_size"] = {ann.image_size.height, ann.image_size.width};
  std::vector<int> rows;
  for (int h = first; h <= last && !ann.lanes.empty(); ++h) rows.push_back(h);
  rec["h_samples"] = rows;
  json lanes = json::array();
  json stds = json::array();
  for (std::size_t k = 0; k < ann.lanes.size(); ++k) {
    const auto& lane = ann.lanes[k];
    std::vector<double> ws(rows.size(), kAbsent);
    std::vector<double> ss(rows.size(), kAbsent);
    for (std::size_t i = 0; i < lane.size(); ++i) {
      const auto r = static_cast<std::size_t>(lane[i].h - first);
      ws[r] = lane[i].w;
      if (per_row_std) ss[r] = (*per_row_std)[k][i];
    }
    lanes.push_back(ws);
    stds.push_back(ss);
  }
  rec["lanes"] = lanes;
  if (per_row_std) rec["std"] = stds;
  return rec;
}

AnnotationSet annotation_from_json(const json& rec, std::optional<ImageSize> size) {
  AnnotationSet ann;
  try {
    if (rec.contains("image_size")) {
      const auto s = rec.at("image_size").get<std::vector<int>>();
      if (s.size() != 2) fail(ErrorCode::format, "image_size must be [H, W]");
      ann.image_size = {s[0], s[1]};
    } else if (size) {
      ann.image_size = *size;
    } else {
      fail(ErrorCode::format, "annotation record has no image_size");
    }
    ann.image_id = rec.value("image_id", rec.value("raw_file", std::string{}));
    const auto rows = rec.at("h_samples").get<std::vector<double>>();
    for (const auto& lane : rec.at("lanes")) {
      const auto ws = lane.get<std::vector<double>>();
      if (ws.size() != rows.size()) fail(ErrorCode::format, "lane length differs from h_samples");
      std::vector<std::pair<double, double>> raw;
      for (std::size_t i = 0; i < ws.size(); ++i) {
        if (ws[i] >= 0.0) raw.emplace_back(rows[i], ws[i]);
      }
      if (raw.size() < 2) continue;
      ann.lanes.push_back(resample_unit_rows(raw, ann.image_size));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, std::string("annotation record: ") + e.what());
  }
  return ann;
}

void save_manifest(const std::string& path, const Manifest& m) {
  json j;
  j["format"] = "fastdraw-dataset";
  j["image_size"] = {m.image_size.height, m.image_size.width};
  j["L"] = m.L;
  json records = json::array();
  for (const auto& r : m.records) {
    json rec = to_tusimple_json(r.annotation, r.raw_file);
    rec["image_id"] = r.image_id;
    rec["style"] = r.style;
    records.push_back(std::move(rec));
  }
  j["records"] = std::move(records);
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  out << j.dump(1) << "\n";
  if (!out) fail(ErrorCode::io, "failed writing " + path);
}

Manifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open manifest " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorCode::format, path + ": " + e.what());
  }
  Manifest m;
  try {
    const auto s = j.at("image_size").get<std::vector<int>>();
    if (s.size() != 2) fail(ErrorCode::format, "image_size must be [H, W]");
    m.image_size = {s[0], s[1]};
    m.L = j.value("L", 6);
    for (const auto& rec : j.at("records")) {
      DatasetRecord r;
      r.raw_file = rec.at("raw_file").get<std::string>();
      r.image_id = rec.value("image_id", r.raw_file);
      r.style = rec.value("style", std::string("base"));
      r.annotation = annotation_from_json(rec, m.image_size);
      r.annotation.image_id = r.image_id;
      m.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::format, path + ": " + e.what());
  }
  return m;
}

void save_predictions(const std::string& path, const std::vector<PredictionRecord>& preds) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  for (const auto& p : preds) {
    json rec = to_tusimple_json(p.lanes, p.raw_file,
                                p.per_row_std.empty() ? nullptr : &p.per_row_std);
    rec["image_id"] = p.image_id;
    rec["run_time"] = p.run_time_ms;
    out << rec.dump() << "\n";
  }
  if (!out) fail(ErrorCode::io, "failed writing " + path);
}

std::vector<PredictionRecord> load_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot open predictions " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      fail(ErrorCode::format, path + ": " + e.what());
    }
    PredictionRecord p;
    p.raw_file = rec.value("raw_file", std::string{});
    p.image_id = rec.value("image_id", p.raw_file);
    p.run_time_ms = rec.value("run_time", 0.0);
    p.lanes = annotation_from_json(rec);
    p.lanes.image_id = p.image_id;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace fastdraw
