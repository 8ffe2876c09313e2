#include "fastdraw/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "fastdraw/error.hpp"
#include "fastdraw/image.hpp"

namespace fastdraw {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index, const std::string& salt = {}) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                    static_cast<std::uint32_t>(std::hash<std::string>{}(salt))};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

std::string scene_id(std::size_t index) {
  std::ostringstream oss;
  oss << "scene_" << std::setw(5) << std::setfill('0') << index;
  return oss.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorCode::io, "cannot create directory " + dir);
}

std::vector<std::string> split_styles(const std::vector<std::string>& styles) {
  std::vector<std::string> out;
  for (const auto& s : styles) {
    if (s != "base") out.push_back(s);
  }
  return out;
}

std::vector<Polyline> polylines(const std::vector<DecodedLane>& lanes) {
  std::vector<Polyline> out;
  out.reserve(lanes.size());
  for (const auto& l : lanes) out.push_back(l.polyline);
  return out;
}

}  // namespace

std::vector<DatasetItem> make_dataset(const SceneConfig& scene, int count, std::uint64_t seed,
                                      const std::vector<std::string>& styles) {
  const auto extra = split_styles(styles);
  for (const auto& s : extra) find_preset(scene.style_presets, s);
  std::vector<DatasetItem> items;
  items.reserve(static_cast<std::size_t>(count) * (1 + extra.size()));
  for (int i = 0; i < count; ++i) {
    Scene s = generate_scene(scene, derive_seed(seed, static_cast<std::uint64_t>(i)));
    const std::string id = scene_id(static_cast<std::size_t>(i));
    s.annotation.image_id = id;
    Image base = quantized(s.image);
    for (const auto& style : extra) {
      const auto& preset = find_preset(scene.style_presets, style);
      Image styled = quantized(stylize(base, preset, derive_seed(seed, static_cast<std::uint64_t>(i), style)));
      AnnotationSet ann = s.annotation;
      ann.image_id = id + "_" + style;
      items.push_back({ann.image_id, style, std::move(styled), std::move(ann)});
    }
    items.insert(items.end() - static_cast<std::ptrdiff_t>(extra.size()),
                 DatasetItem{id, "base", std::move(base), std::move(s.annotation)});
  }
  return items;
}

std::vector<DatasetItem> restyle(const std::vector<DatasetItem>& items, const SceneConfig& scene,
                                 const std::string& style, std::uint64_t seed) {
  const auto& preset = find_preset(scene.style_presets, style);
  std::vector<DatasetItem> out;
  out.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    DatasetItem item = items[i];
    item.image = quantized(stylize(items[i].image, preset, derive_seed(seed, i, style)));
    item.style = style;
    item.image_id += "_" + style;
    item.annotation.image_id = item.image_id;
    out.push_back(std::move(item));
  }
  return out;
}

std::vector<nn::TrainSample> to_train_samples(const std::vector<DatasetItem>& items) {
  std::vector<nn::TrainSample> out;
  out.reserve(items.size());
  for (const auto& i : items) out.push_back({i.image, i.annotation});
  return out;
}

EvalSummary evaluate_model(const nn::MicroNet<float>& net, const std::vector<DatasetItem>& items,
                           const RunConfig& cfg, const std::vector<double>& pr_thresholds) {
  EvalSummary summary;
  nn::Workspace<float> ws;
  std::vector<HeadField> fields;
  if (!pr_thresholds.empty()) fields.reserve(items.size());
  for (const auto& item : items) {
    HeadField field = nn::predict(net, item.image, ws);
    const auto lanes = decode_all(field, cfg.decode);
    const int W = item.annotation.image_size.width;
    summary.totals.add(tusimple_score(polylines(lanes), item.annotation, cfg.eval.point_tolerance(W),
                                      cfg.eval.lane_tol_frac));
    summary.totals.add(iou_f1(polylines(lanes), item.annotation, cfg.eval.stroke_width(W),
                              cfg.eval.iou_threshold));
    summary.agreement += heuristic_agreement(field, lanes);
    if (!pr_thresholds.empty()) fields.push_back(std::move(field));
  }
  summary.agreement.finalize();
  if (!pr_thresholds.empty() && !items.empty()) {
    std::vector<EvalSample> samples;
    for (std::size_t i = 0; i < items.size(); ++i) samples.push_back({&fields[i], &items[i].annotation});
    summary.pr_curve = pr_sweep(samples, pr_thresholds, cfg.decode,
                                cfg.eval.point_tolerance(items.front().annotation.image_size.width),
                                cfg.eval.lane_tol_frac);
  }
  return summary;
}

std::array<float, 3> std_color(double std_px) {
  const double t = std::clamp(std_px / 9.0, 0.0, 1.0);
  return {static_cast<float>(t), 0.0f, static_cast<float>(1.0 - t)};
}

Image render_overlay(const Image& background, const std::vector<DecodedLane>& lanes) {
  Image out = background;
  for (const auto& lane : lanes) {
    for (std::size_t i = 0; i < lane.polyline.size(); ++i) {
      const auto& p = lane.polyline[i];
      const auto color = std_color(lane.per_row_std[i]);
      const int w = static_cast<int>(std::lround(p.w));
      for (int dw = -1; dw <= 1; ++dw) {
        const int x = w + dw;
        if (x < 0 || x >= out.width || p.h < 0 || p.h >= out.height) continue;
        for (int c = 0; c < 3; ++c) out.at(c, p.h, x) = color[static_cast<std::size_t>(c)];
      }
    }
  }
  return out;
}

GenerateResult cmd_generate(const RunConfig& cfg, const std::string& out_dir) {
  ensure_dir(out_dir);
  ensure_dir((fs::path(out_dir) / "images").string());
  const auto items = make_dataset(cfg.scene, cfg.generate.count, cfg.seed, cfg.generate.styles);
  Manifest manifest;
  manifest.image_size = cfg.scene.image_size;
  manifest.L = cfg.L;
  for (const auto& item : items) {
    const std::string rel = "images/" + item.image_id + ".ppm";
    save_ppm((fs::path(out_dir) / rel).string(), item.image);
    manifest.records.push_back({item.image_id, rel, item.style, item.annotation});
  }
  GenerateResult r;
  r.manifest_path = (fs::path(out_dir) / "manifest.json").string();
  r.images = items.size();
  save_manifest(r.manifest_path, manifest);
  return r;
}

namespace {

std::vector<DatasetItem> load_items(const std::string& manifest_path) {
  const Manifest m = load_manifest(manifest_path);
  const fs::path root = fs::path(manifest_path).parent_path();
  std::vector<DatasetItem> items;
  items.reserve(m.records.size());
  for (const auto& r : m.records) {
    Image img = load_ppm((root / r.raw_file).string());
    if (img.height != m.image_size.height || img.width != m.image_size.width) {
      fail(ErrorCode::shape, r.raw_file + ": image size differs from the manifest");
    }
    items.push_back({r.image_id, r.style, std::move(img), r.annotation});
  }
  return items;
}

void write_loss_csv(const std::string& path, const nn::TrainHistory& h) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open " + path + " for writing");
  out << "step,epoch,lr,mask_nll,seq_nll,combined,w_mask,w_seq\n";
  out.precision(9);
  for (const auto& s : h.steps) {
    out << s.step << ',' << s.epoch << ',' << s.lr << ',' << s.loss.mask_nll << ','
        << s.loss.seq_nll << ',' << s.loss.combined << ',' << s.loss.w_mask << ',' << s.loss.w_seq
        << '\n';
  }
}

struct FieldProvider {
  explicit FieldProvider(const FieldSource& src) : source(src) {
    if (!src.checkpoint.empty()) net = load_checkpoint(src.checkpoint).net;
  }
  bool available() const { return !source.checkpoint.empty() || !source.fields_dir.empty(); }
  HeadField get(const std::string& image_id, const Image* image) {
    if (!source.checkpoint.empty()) {
      if (!image) fail(ErrorCode::invalid_argument, "checkpoint input needs images");
      return nn::predict(net, *image, ws);
    }
    return load_field((fs::path(source.fields_dir) / (image_id + ".fdt")).string());
  }

  FieldSource source;
  nn::MicroNet<float> net;
  nn::Workspace<float> ws;
};

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, const std::string& manifest_path,
                      const std::string& out_dir, const std::string& holdout_manifest) {
  ensure_dir(out_dir);
  const auto items = load_items(manifest_path);
  const auto samples = to_train_samples(items);
  nn::MicroNet<float> net(cfg.arch, cfg.seed, cfg.init);
  auto opt = nn::AdamState<float>::zeros_like(net);
  TrainResult result;
  result.history = nn::train(
      net, opt, samples, cfg.train, cfg.perturb,
      [&](const nn::EpochRecord& rec, const nn::MicroNet<float>& n, const nn::AdamState<float>& o) {
        std::ostringstream name;
        name << "checkpoint_epoch" << rec.epoch + 1 << ".fdck";  // epochs completed
        save_checkpoint((fs::path(out_dir) / name.str()).string(), n, o, rec.epoch);
      });
  result.checkpoint_path = (fs::path(out_dir) / "final.fdck").string();
  save_checkpoint(result.checkpoint_path, net, opt, cfg.train.epochs - 1);
  result.loss_csv = (fs::path(out_dir) / "loss.csv").string();
  write_loss_csv(result.loss_csv, result.history);
  if (!holdout_manifest.empty()) {
    result.has_holdout = true;
    result.holdout = evaluate_model(net, load_items(holdout_manifest), cfg).totals;
  }
  return result;
}

DecodeResult cmd_decode(const RunConfig& cfg, const DecodeRequest& req) {
  if (req.output.empty()) fail(ErrorCode::invalid_argument, "decode needs an output path");
  if (!req.overlay_dir.empty()) ensure_dir(req.overlay_dir);
  if (!req.save_fields_dir.empty()) ensure_dir(req.save_fields_dir);
  FieldProvider provider(req.source);

  struct Input {
    std::string id;
    std::string raw_file;
    std::optional<Image> image;
    std::optional<HeadField> field;
  };
  std::vector<Input> inputs;
  if (!req.field_files.empty()) {
    for (const auto& f : req.field_files) {
      inputs.push_back({fs::path(f).stem().string(), f, std::nullopt, load_field(f)});
    }
  } else {
    if (req.manifest.empty()) fail(ErrorCode::invalid_argument, "decode needs a manifest or field files");
    if (!provider.available()) fail(ErrorCode::invalid_argument, "decode needs a checkpoint or fields");
    const Manifest m = load_manifest(req.manifest);
    const fs::path root = fs::path(req.manifest).parent_path();
    for (const auto& r : m.records) {
      Input in{r.image_id, r.raw_file, std::nullopt, std::nullopt};
      const fs::path img_path = root / r.raw_file;
      if (!req.source.checkpoint.empty() || (!req.overlay_dir.empty() && fs::exists(img_path))) {
        in.image = load_ppm(img_path.string());
      }
      inputs.push_back(std::move(in));
    }
  }

  DecodeResult result;
  std::vector<PredictionRecord> preds;
  for (auto& in : inputs) {
    HeadField field = in.field ? std::move(*in.field)
                               : provider.get(in.id, in.image ? &*in.image : nullptr);
    const auto t0 = std::chrono::steady_clock::now();
    const auto lanes = decode_all(field, cfg.decode);
    const auto t1 = std::chrono::steady_clock::now();
    PredictionRecord rec;
    rec.image_id = in.id;
    rec.raw_file = in.raw_file;
    rec.lanes.image_id = in.id;
    rec.lanes.image_size = {field.height(), field.width()};
    for (const auto& l : lanes) {
      rec.lanes.lanes.push_back(l.polyline);
      rec.per_row_std.push_back(l.per_row_std);
    }
    rec.run_time_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    result.lanes += lanes.size();
    if (!req.overlay_dir.empty()) {
      Image bg;
      if (in.image) {
        bg = *in.image;
      } else {
        bg = Image(field.height(), field.width());
        for (int h = 0; h < field.height(); ++h) {
          for (int w = 0; w < field.width(); ++w) {
            for (int c = 0; c < 3; ++c) bg.at(c, h, w) = 0.5f * field.lane_prob(h, w);
          }
        }
      }
      save_ppm((fs::path(req.overlay_dir) / (in.id + ".ppm")).string(), render_overlay(bg, lanes));
      ++result.overlays;
    }
    if (!req.save_fields_dir.empty()) {
      save_field((fs::path(req.save_fields_dir) / (in.id + ".fdt")).string(), field);
    }
    preds.push_back(std::move(rec));
    ++result.images;
  }
  save_predictions(req.output, preds);
  return result;
}

namespace {

void write_metrics(const std::string& prefix, const EvalResult& r) {
  json j;
  const auto& t = r.totals;
  j["images"] = t.images;
  j["accuracy"] = t.accuracy();
  j["fp"] = t.fp_rate();
  j["fn"] = t.fn_rate();
  j["precision"] = t.precision();
  j["recall"] = t.recall();
  j["f1"] = t.f1();
  j["iou_precision"] = t.iou_precision();
  j["iou_recall"] = t.iou_recall();
  j["iou_f1"] = t.iou_f1();
  json curve = json::array();
  for (const auto& p : r.pr_curve) {
    curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
  }
  j["pr_curve"] = curve;
  if (r.has_agreement) {
    json rows = json::array();
    for (std::size_t i = 0; i < 3; ++i) {
      rows.push_back({{"below_px", AgreementReport::thresholds[i]},
                      {"fraction", r.agreement.fractions[i]}});
    }
    j["agreement"] = {{"steps", r.agreement.steps}, {"rows", rows}};
  }
  {
    std::ofstream out(prefix + ".json", std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + prefix + ".json");
    out << j.dump(2) << "\n";
  }
  {
    std::ofstream out(prefix + ".csv", std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + prefix + ".csv");
    out << "metric,value\n";
    for (const char* key : {"accuracy", "fp", "fn", "precision", "recall", "f1", "iou_precision",
                            "iou_recall", "iou_f1"}) {
      out << key << ',' << j[key].get<double>() << '\n';
    }
    for (const auto& p : r.pr_curve) {
      out << "pr_precision@" << p.threshold << ',' << p.precision << '\n';
      out << "pr_recall@" << p.threshold << ',' << p.recall << '\n';
    }
  }
  if (!r.pr_curve.empty()) {
    std::ofstream out(prefix + "_pr.txt", std::ios::trunc);
    if (!out) fail(ErrorCode::io, "cannot write " + prefix + "_pr.txt");
    out << "# recall precision (one row per p_min threshold)\n";
    for (const auto& p : r.pr_curve) out << p.recall << ' ' << p.precision << '\n';
  }
}

void write_agreement(const std::string& path, const AgreementReport& a) {
  json rows = json::array();
  for (std::size_t i = 0; i < 3; ++i) {
    rows.push_back({{"below_px", AgreementReport::thresholds[i]}, {"fraction", a.fractions[i]}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path);
  out << json{{"steps", a.steps}, {"rows", rows}}.dump(2) << "\n";
  std::ofstream csv(fs::path(path).replace_extension(".csv"), std::ios::trunc);
  csv << "below_px,fraction\n";
  for (std::size_t i = 0; i < 3; ++i) {
    csv << AgreementReport::thresholds[i] << ',' << a.fractions[i] << '\n';
  }
}

}  // namespace

EvalResult cmd_eval(const RunConfig& cfg, const EvalRequest& req) {
  const auto preds = load_predictions(req.predictions);
  const Manifest gt = load_manifest(req.gt_manifest);
  std::map<std::string, const DatasetRecord*> by_id;
  for (const auto& r : gt.records) by_id[r.image_id] = &r;
  std::map<std::string, const PredictionRecord*> pred_by_id;
  for (const auto& p : preds) {
    if (!by_id.contains(p.image_id)) {
      fail(ErrorCode::mismatch, "prediction for unknown image id '" + p.image_id + "'");
    }
    pred_by_id[p.image_id] = &p;
  }
  for (const auto& r : gt.records) {
    if (!pred_by_id.contains(r.image_id)) {
      fail(ErrorCode::mismatch, "no prediction for image id '" + r.image_id + "'");
    }
  }

  EvalResult result;
  const int W = gt.image_size.width;
  for (const auto& r : gt.records) {
    const auto& pred = *pred_by_id.at(r.image_id);
    result.totals.add(tusimple_score(pred.lanes.lanes, r.annotation, cfg.eval.point_tolerance(W),
                                     cfg.eval.lane_tol_frac));
    result.totals.add(iou_f1(pred.lanes.lanes, r.annotation, cfg.eval.stroke_width(W),
                             cfg.eval.iou_threshold));
  }

  FieldProvider provider(req.source);
  if (!req.pr_thresholds.empty() && !provider.available()) {
    fail(ErrorCode::invalid_argument, "--pr-sweep needs a checkpoint or a fields directory");
  }
  if (provider.available()) {
    const fs::path root = fs::path(req.gt_manifest).parent_path();
    std::vector<HeadField> fields;
    fields.reserve(gt.records.size());
    for (const auto& r : gt.records) {
      std::optional<Image> img;
      if (!req.source.checkpoint.empty()) img = load_ppm((root / r.raw_file).string());
      fields.push_back(provider.get(r.image_id, img ? &*img : nullptr));
      result.agreement += heuristic_agreement(fields.back(), decode_all(fields.back(), cfg.decode));
    }
    result.agreement.finalize();
    result.has_agreement = true;
    if (!req.pr_thresholds.empty()) {
      std::vector<EvalSample> samples;
      for (std::size_t i = 0; i < fields.size(); ++i) {
        samples.push_back({&fields[i], &gt.records[i].annotation});
      }
      result.pr_curve = pr_sweep(samples, req.pr_thresholds, cfg.decode,
                                 cfg.eval.point_tolerance(W), cfg.eval.lane_tol_frac);
    }
  }
  if (!req.output_prefix.empty()) write_metrics(req.output_prefix, result);
  return result;
}

AgreementReport cmd_agreement(const RunConfig& cfg, const AgreementRequest& req) {
  FieldProvider provider(req.source);
  if (!provider.available()) fail(ErrorCode::invalid_argument, "agreement needs a checkpoint or fields");
  const Manifest m = load_manifest(req.manifest);
  const fs::path root = fs::path(req.manifest).parent_path();
  AgreementReport report;
  for (const auto& r : m.records) {
    std::optional<Image> img;
    if (!req.source.checkpoint.empty()) img = load_ppm((root / r.raw_file).string());
    const HeadField field = provider.get(r.image_id, img ? &*img : nullptr);
    report += heuristic_agreement(field, decode_all(field, cfg.decode));
  }
  report.finalize();
  if (!req.output.empty()) write_agreement(req.output, report);
  return report;
}

std::vector<double> parse_sweep(const std::string& spec) {
  double a = 0.0, b = 0.0, step = 0.0;
  char c1 = 0, c2 = 0;
  std::istringstream in(spec);
  if (!(in >> a >> c1 >> b >> c2 >> step) || c1 != ':' || c2 != ':' || !(step > 0.0) || b < a) {
    fail(ErrorCode::invalid_argument, "sweep must look like start:stop:step, got '" + spec + "'");
  }
  std::vector<double> out;
  const auto n = static_cast<int>(std::floor((b - a) / step + 1e-9));
  for (int i = 0; i <= n; ++i) out.push_back(std::round((a + i * step) * 1e9) / 1e9);
  return out;
}

}  // namespace fastdraw
