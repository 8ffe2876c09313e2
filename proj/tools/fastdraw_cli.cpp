// Command-line front end; talks to the engine only through the C API.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "fastdraw/fastdraw.h"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--set", c.overrides, "override, e.g. decode.p_min=0.4")->take_all();
}

int report(fd_status st, char* summary) {
  if (st != FD_OK) {
    std::fprintf(stderr, "fastdraw: error (%s): %s\n", fd_status_name(st), fd_last_error());
    return static_cast<int>(st);
  }
  if (summary) {
    std::cout << nlohmann::json::parse(summary).dump(2) << "\n";
    fd_string_free(summary);
  }
  return 0;
}

// Owns the config handle for the duration of one command.
struct Config {
  fd_config* handle = nullptr;
  ~Config() { fd_config_free(handle); }
};

fd_status make_config(const Common& c, const std::vector<std::string>& extra, Config& out) {
  fd_status st = fd_config_load(c.config.empty() ? nullptr : c.config.c_str(), &out.handle);
  if (st != FD_OK) return st;
  for (const auto& o : c.overrides) {
    if ((st = fd_config_set(out.handle, o.c_str())) != FD_OK) return st;
  }
  for (const auto& o : extra) {
    if ((st = fd_config_set(out.handle, o.c_str())) != FD_OK) return st;
  }
  return FD_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fastdraw: lane detection by greedy drawing on per-pixel head fields"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(fd_version()));

  Common common;
  std::string out, manifest, holdout, checkpoint, fields_dir, overlay, save_fields, preds, gt, sweep;
  std::string styles;
  int count = -1;
  std::vector<std::string> field_files;

  auto* gen = app.add_subcommand("generate", "synthesize scenes and a ground-truth manifest");
  add_common(gen, common);
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--count", count, "number of base scenes");
  gen->add_option("--styles", styles, "comma-separated extra styles, e.g. night,rain");

  auto* train = app.add_subcommand("train", "train the network on a manifest");
  add_common(train, common);
  train->add_option("--manifest", manifest, "training manifest")->required();
  train->add_option("--out", out, "output directory for checkpoints and loss.csv");
  train->add_option("--holdout", holdout, "manifest evaluated after training");

  auto* dec = app.add_subcommand("decode", "decode lanes from a checkpoint or head fields");
  add_common(dec, common);
  dec->add_option("--checkpoint", checkpoint, "trained checkpoint");
  dec->add_option("--fields-dir", fields_dir, "directory of <image_id>.fdt head fields");
  dec->add_option("--field", field_files, "explicit FDT1 field files")->take_all();
  dec->add_option("--manifest", manifest, "images to decode");
  dec->add_option("--out", out, "predictions (JSON lines)")->required();
  dec->add_option("--overlay", overlay, "write uncertainty overlays to this directory");
  dec->add_option("--save-fields", save_fields, "save head fields to this directory");

  auto* ev = app.add_subcommand("eval", "score predictions against ground truth");
  add_common(ev, common);
  ev->add_option("--pred", preds, "predictions (JSON lines)")->required();
  ev->add_option("--gt", gt, "ground-truth manifest")->required();
  ev->add_option("--out", out, "output prefix for .json/.csv/_pr.txt")->required();
  ev->add_option("--pr-sweep", sweep, "p_min sweep start:stop:step");
  ev->add_option("--checkpoint", checkpoint, "checkpoint for the sweep and agreement");
  ev->add_option("--fields-dir", fields_dir, "head fields for the sweep and agreement");

  auto* agr = app.add_subcommand("agreement", "compare drawn steps with the lane-probability argmax");
  add_common(agr, common);
  agr->add_option("--checkpoint", checkpoint, "trained checkpoint");
  agr->add_option("--fields-dir", fields_dir, "directory of <image_id>.fdt head fields");
  agr->add_option("--manifest", manifest, "images")->required();
  agr->add_option("--out", out, "JSON report (CSV written alongside)");

  CLI11_PARSE(app, argc, argv);

  std::vector<std::string> extra;
  if (count >= 0) extra.push_back("generate.count=" + std::to_string(count));
  if (!styles.empty()) extra.push_back("generate.styles=" + styles);

  Config cfg;
  if (fd_status st = make_config(common, extra, cfg); st != FD_OK) return report(st, nullptr);

  nlohmann::json req;
  if (!checkpoint.empty()) req["checkpoint"] = checkpoint;
  if (!fields_dir.empty()) req["fields_dir"] = fields_dir;
  char* summary = nullptr;
  fd_status st = FD_OK;
  if (*gen) {
    st = fd_cmd_generate(cfg.handle, out.c_str(), &summary);
  } else if (*train) {
    req["manifest"] = manifest;
    req["out_dir"] = out;
    req["holdout"] = holdout;
    st = fd_cmd_train(cfg.handle, req.dump().c_str(), &summary);
  } else if (*dec) {
    req["manifest"] = manifest;
    req["fields"] = field_files;
    req["output"] = out;
    req["overlay_dir"] = overlay;
    req["save_fields_dir"] = save_fields;
    st = fd_cmd_decode(cfg.handle, req.dump().c_str(), &summary);
  } else if (*ev) {
    req["predictions"] = preds;
    req["gt"] = gt;
    req["output_prefix"] = out;
    if (!sweep.empty()) req["pr_sweep"] = sweep;
    st = fd_cmd_eval(cfg.handle, req.dump().c_str(), &summary);
  } else if (*agr) {
    req["manifest"] = manifest;
    req["output"] = out;
    st = fd_cmd_agreement(cfg.handle, req.dump().c_str(), &summary);
  }
  return report(st, summary);
}
