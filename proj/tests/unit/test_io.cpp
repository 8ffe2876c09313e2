#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fastdraw/annotation_json.hpp"
#include "fastdraw/checkpoint.hpp"
#include "fastdraw/error.hpp"
#include "fastdraw/pipeline.hpp"
#include "fastdraw/run_config.hpp"

using namespace fastdraw;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("fastdraw_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("checkpoint round-trip") {
  const auto dir = scratch_dir("ckpt");
  nn::Architecture arch;
  arch.head_hidden = 8;
  nn::MicroNet<float> net(arch, 5);
  net.w_mask = 0.25;
  net.w_seq = -0.5;
  auto opt = nn::AdamState<float>::zeros_like(net);
  opt.step = 17;
  opt.m_weight[3][2] = 0.125f;
  opt.v_w_seq = 0.03;
  save_checkpoint((dir / "a.fdck").string(), net, opt, 4);
  const auto ck = load_checkpoint((dir / "a.fdck").string());
  CHECK(ck.epoch == 4);
  CHECK(ck.net.arch() == arch);
  CHECK(ck.net.w_mask == 0.25);
  CHECK(ck.net.w_seq == -0.5);
  for (int l = 0; l < nn::kLayerCount; ++l) {
    CHECK(ck.net.layers()[l].weight == net.layers()[l].weight);
    CHECK(ck.net.layers()[l].bias == net.layers()[l].bias);
  }
  CHECK(ck.optimizer.step == 17);
  CHECK(ck.optimizer.m_weight[3][2] == 0.125f);
  CHECK(ck.optimizer.v_w_seq == doctest::Approx(0.03));

  {
    std::ofstream out(dir / "bad.fdck", std::ios::binary);
    out << "NOPE" << std::string(64, '\0');
  }
  try {
    load_checkpoint((dir / "bad.fdck").string());
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::format);
  }
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.fdck").string()), Error);
}

TEST_CASE("run configuration overrides") {
  auto cfg = load_run_config("", {"L=4", "decode.p_min=0.3", "generate.styles=[\"night\"]",
                                  "arch.init=fan_in_uniform", "decode.seed_isolated=false"});
  CHECK(cfg.L == 4);
  CHECK(cfg.arch.L == 4);
  CHECK(cfg.perturb.L == 4);
  CHECK(cfg.scene.L == 4);
  CHECK(cfg.decode.p_min == 0.3);
  CHECK(cfg.generate.styles == std::vector<std::string>{"night"});
  CHECK(cfg.init == nn::InitMode::fan_in_uniform);
  CHECK_FALSE(cfg.decode.seed_isolated);

  auto expect_config_error = [](std::vector<std::string> o) {
    try {
      load_run_config("", o);
      FAIL("expected config error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::config);
    }
  };
  expect_config_error({"decode.bogus=1"});
  expect_config_error({"arch.init=random"});
  expect_config_error({"no_equals_sign"});
  expect_config_error({"train.lr=-1"});

  const auto dir = scratch_dir("cfg");
  {
    std::ofstream out(dir / "c.json");
    out << to_json(cfg).dump();
  }
  const auto back = load_run_config((dir / "c.json").string());
  CHECK(to_json(back) == to_json(cfg));
}

TEST_CASE("generate writes a manifest and images reproducibly") {
  const auto dir = scratch_dir("gen");
  auto cfg = load_run_config("", {"generate.count=6"});
  const auto r = cmd_generate(cfg, (dir / "a").string());
  CHECK(r.images == 6);
  const auto m = load_manifest(r.manifest_path);
  REQUIRE(m.records.size() == 6);
  for (const auto& rec : m.records) {
    CHECK(fs::exists(dir / "a" / rec.raw_file));
    CHECK(rec.annotation.image_size == m.image_size);
  }
  cmd_generate(cfg, (dir / "b").string());
  CHECK(slurp(dir / "a" / "manifest.json") == slurp(dir / "b" / "manifest.json"));
  CHECK(slurp(dir / "a" / m.records[3].raw_file) == slurp(dir / "b" / m.records[3].raw_file));

  auto styled = load_run_config("", {"generate.count=4", "generate.styles=[\"night\",\"fog\"]"});
  CHECK(cmd_generate(styled, (dir / "c").string()).images == 12);
}

TEST_CASE("tusimple JSON round-trip") {
  AnnotationSet ann{"x", {20, 30}, {Polyline({{3, 4.5}, {4, 5.0}, {5, 6.25}})}};
  const auto j = to_tusimple_json(ann, "x.ppm");
  const auto back = annotation_from_json(j);
  REQUIRE(back.lanes.size() == 1);
  CHECK(back.lanes[0] == ann.lanes[0]);
  CHECK(back.image_size == ann.image_size);
}

TEST_CASE("parse_sweep") {
  const auto s = parse_sweep("0.1:0.5:0.2");
  REQUIRE(s.size() == 3);
  CHECK(s[2] == doctest::Approx(0.5));
  CHECK_THROWS_AS(parse_sweep("0.1:0.5"), Error);
  CHECK_THROWS_AS(parse_sweep("0.5:0.1:0.1"), Error);
}
