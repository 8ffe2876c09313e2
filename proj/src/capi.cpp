#include "fastdraw/fastdraw.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <exception>
#include <new>
#include <string>

#include "fastdraw/error.hpp"
#include "fastdraw/pipeline.hpp"

using nlohmann::json;

struct fd_config {
  fastdraw::RunConfig cfg;
};
struct fd_field {
  fastdraw::HeadField field;
};
struct fd_lanes {
  std::vector<fastdraw::DecodedLane> lanes;
};
struct fd_net {
  fastdraw::nn::MicroNet<float> net;
};

namespace {

thread_local std::string g_last_error;

fd_status set_error(fd_status status, const char* what) {
  g_last_error = what ? what : "";
  return status;
}

template <class F>
fd_status guarded(F&& body) {
  try {
    body();
    g_last_error.clear();
    return FD_OK;
  } catch (const fastdraw::Error& e) {
    return set_error(static_cast<fd_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return set_error(FD_ERR_FORMAT, e.what());
  } catch (const std::bad_alloc&) {
    return set_error(FD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return set_error(FD_ERR_INTERNAL, e.what());
  } catch (...) {
    return set_error(FD_ERR_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* name) {
  if (!p) fastdraw::fail(fastdraw::ErrorCode::invalid_argument, std::string(name) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const json& j) {
  if (out) *out = dup_string(j.dump());
}

json parse_request(const char* request_json) {
  require(request_json, "request_json");
  json j = json::parse(request_json);
  if (!j.is_object()) fastdraw::fail(fastdraw::ErrorCode::invalid_argument, "request must be a JSON object");
  return j;
}

std::string str(const json& j, const char* key) { return j.value(key, std::string()); }

fastdraw::FieldSource source_of(const json& j) { return {str(j, "checkpoint"), str(j, "fields_dir")}; }

json totals_json(const fastdraw::MetricTotals& t) {
  return {{"images", t.images},           {"accuracy", t.accuracy()},
          {"fp", t.fp_rate()},            {"fn", t.fn_rate()},
          {"f1", t.f1()},                 {"iou_f1", t.iou_f1()}};
}

json agreement_json(const fastdraw::AgreementReport& a) {
  json rows = json::array();
  for (std::size_t i = 0; i < a.fractions.size(); ++i) {
    rows.push_back({{"below_px", fastdraw::AgreementReport::thresholds[i]}, {"fraction", a.fractions[i]}});
  }
  return {{"steps", a.steps}, {"rows", rows}};
}

}  // namespace

extern "C" {

const char* fd_version(void) { return "0.1.0"; }

const char* fd_last_error(void) { return g_last_error.c_str(); }

const char* fd_status_name(fd_status status) {
  if (status == FD_OK) return "ok";
  if (status == FD_ERR_INTERNAL) return "internal";
  return fastdraw::to_string(static_cast<fastdraw::ErrorCode>(status));
}

void fd_string_free(char* s) { std::free(s); }

fd_status fd_config_load(const char* path, fd_config** out) {
  return guarded([&] {
    require(out, "out");
    auto c = std::make_unique<fd_config>();
    if (path && *path) {
      c->cfg = fastdraw::load_run_config(path);
    } else {
      c->cfg = fastdraw::default_run_config();
    }
    *out = c.release();
  });
}

fd_status fd_config_set(fd_config* cfg, const char* assignment) {
  return guarded([&] {
    require(cfg, "cfg");
    require(assignment, "assignment");
    fastdraw::RunConfig next = cfg->cfg;
    fastdraw::apply_override(next, assignment);
    next.finalize();
    cfg->cfg = std::move(next);
  });
}

fd_status fd_config_to_json(const fd_config* cfg, char** out_json) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_json, "out_json");
    *out_json = dup_string(fastdraw::to_json(cfg->cfg).dump(2));
  });
}

void fd_config_free(fd_config* cfg) { delete cfg; }

fd_status fd_field_load(const char* path, fd_field** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new fd_field{fastdraw::load_field(path)};
  });
}

fd_status fd_field_save(const fd_field* field, const char* path) {
  return guarded([&] {
    require(field, "field");
    require(path, "path");
    fastdraw::save_field(path, field->field);
  });
}

fd_status fd_field_shape(const fd_field* field, int* height, int* width, int* L) {
  return guarded([&] {
    require(field, "field");
    if (height) *height = field->field.height();
    if (width) *width = field->field.width();
    if (L) *L = field->field.L();
  });
}

fd_status fd_field_lane_prob(const fd_field* field, int h, int w, float* out) {
  return guarded([&] {
    require(field, "field");
    require(out, "out");
    if (!field->field.contains(h, w)) fastdraw::fail(fastdraw::ErrorCode::index, "pixel outside the field");
    *out = field->field.lane_prob(h, w);
  });
}

void fd_field_free(fd_field* field) { delete field; }

fd_status fd_decode(const fd_field* field, const fd_config* cfg, fd_lanes** out) {
  return guarded([&] {
    require(field, "field");
    require(out, "out");
    const fastdraw::DecodeConfig dc = cfg ? cfg->cfg.decode : fastdraw::DecodeConfig{};
    *out = new fd_lanes{fastdraw::decode_all(field->field, dc)};
  });
}

size_t fd_lanes_count(const fd_lanes* lanes) { return lanes ? lanes->lanes.size() : 0; }

fd_status fd_lanes_points(const fd_lanes* lanes, size_t i, int* rows, double* cols, double* stds,
                          size_t capacity, size_t* n) {
  return guarded([&] {
    require(lanes, "lanes");
    if (i >= lanes->lanes.size()) fastdraw::fail(fastdraw::ErrorCode::index, "lane index out of range");
    const auto& lane = lanes->lanes[i];
    const std::size_t len = lane.polyline.size();
    if (n) *n = len;
    for (std::size_t k = 0; k < len && k < capacity; ++k) {
      if (rows) rows[k] = lane.polyline[k].h;
      if (cols) cols[k] = lane.polyline[k].w;
      if (stds) stds[k] = lane.per_row_std[k];
    }
  });
}

void fd_lanes_free(fd_lanes* lanes) { delete lanes; }

fd_status fd_uncertainty(const fd_field* field, int h, int w, fd_direction d, double* out) {
  return guarded([&] {
    require(field, "field");
    require(out, "out");
    if (d != FD_UP && d != FD_DOWN) fastdraw::fail(fastdraw::ErrorCode::invalid_argument, "bad direction");
    *out = fastdraw::uncertainty_at(field->field, h, w, static_cast<fastdraw::Direction>(d));
  });
}

fd_status fd_net_load(const char* checkpoint, fd_net** out) {
  return guarded([&] {
    require(checkpoint, "checkpoint");
    require(out, "out");
    *out = new fd_net{fastdraw::load_checkpoint(checkpoint).net};
  });
}

fd_status fd_net_predict_ppm(const fd_net* net, const char* ppm_path, fd_field** out) {
  return guarded([&] {
    require(net, "net");
    require(ppm_path, "ppm_path");
    require(out, "out");
    fastdraw::nn::Workspace<float> ws;
    *out = new fd_field{fastdraw::nn::predict(net->net, fastdraw::load_ppm(ppm_path), ws)};
  });
}

void fd_net_free(fd_net* net) { delete net; }

fd_status fd_cmd_generate(const fd_config* cfg, const char* out_dir, char** out_summary) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out_dir, "out_dir");
    const auto r = fastdraw::cmd_generate(cfg->cfg, out_dir);
    emit(out_summary, {{"manifest", r.manifest_path}, {"images", r.images}});
  });
}

fd_status fd_cmd_train(const fd_config* cfg, const char* request_json, char** out_summary) {
  return guarded([&] {
    require(cfg, "cfg");
    const json req = parse_request(request_json);
    std::string out_dir = str(req, "out_dir");
    if (out_dir.empty()) out_dir = cfg->cfg.output_dir;
    const auto r = fastdraw::cmd_train(cfg->cfg, str(req, "manifest"), out_dir, str(req, "holdout"));
    json epochs = json::array();
    for (const auto& e : r.history.epochs) {
      epochs.push_back({{"epoch", e.epoch}, {"lr", e.lr}, {"combined", e.combined},
                        {"mask_nll", e.mask_nll}, {"seq_nll", e.seq_nll}});
    }
    json s = {{"checkpoint", r.checkpoint_path}, {"loss_csv", r.loss_csv}, {"epochs", epochs}};
    if (r.has_holdout) s["holdout"] = totals_json(r.holdout);
    emit(out_summary, s);
  });
}

fd_status fd_cmd_decode(const fd_config* cfg, const char* request_json, char** out_summary) {
  return guarded([&] {
    require(cfg, "cfg");
    const json req = parse_request(request_json);
    fastdraw::DecodeRequest d;
    d.source = source_of(req);
    d.manifest = str(req, "manifest");
    d.field_files = req.value("fields", std::vector<std::string>{});
    d.output = str(req, "output");
    d.overlay_dir = str(req, "overlay_dir");
    d.save_fields_dir = str(req, "save_fields_dir");
    const auto r = fastdraw::cmd_decode(cfg->cfg, d);
    emit(out_summary, {{"images", r.images}, {"lanes", r.lanes}, {"overlays", r.overlays},
                       {"output", d.output}});
  });
}

fd_status fd_cmd_eval(const fd_config* cfg, const char* request_json, char** out_summary) {
  return guarded([&] {
    require(cfg, "cfg");
    const json req = parse_request(request_json);
    fastdraw::EvalRequest e;
    e.predictions = str(req, "predictions");
    e.gt_manifest = str(req, "gt");
    e.output_prefix = str(req, "output_prefix");
    e.source = source_of(req);
    if (req.contains("pr_sweep")) {
      const auto& sw = req.at("pr_sweep");
      e.pr_thresholds = sw.is_string() ? fastdraw::parse_sweep(sw.get<std::string>())
                                       : sw.get<std::vector<double>>();
    }
    const auto r = fastdraw::cmd_eval(cfg->cfg, e);
    json s = totals_json(r.totals);
    json curve = json::array();
    for (const auto& p : r.pr_curve) {
      curve.push_back({{"threshold", p.threshold}, {"precision", p.precision}, {"recall", p.recall}});
    }
    s["pr_curve"] = curve;
    if (r.has_agreement) {
      auto a = r.agreement;
      a.finalize();
      s["agreement"] = agreement_json(a);
    }
    emit(out_summary, s);
  });
}

fd_status fd_cmd_agreement(const fd_config* cfg, const char* request_json, char** out_summary) {
  return guarded([&] {
    require(cfg, "cfg");
    const json req = parse_request(request_json);
    fastdraw::AgreementRequest a;
    a.source = source_of(req);
    a.manifest = str(req, "manifest");
    a.output = str(req, "output");
    emit(out_summary, agreement_json(fastdraw::cmd_agreement(cfg->cfg, a)));
  });
}

}  // extern "C"
