#include <doctest.h>

#include <cmath>

#include "fastdraw/error.hpp"
#include "fastdraw/pipeline.hpp"
#include "fastdraw/scenes.hpp"

using namespace fastdraw;

TEST_CASE("no lanes gives a plain background") {
  SceneConfig cfg;
  cfg.lanes_min = cfg.lanes_max = 0;
  const auto s = generate_scene(cfg, 3);
  CHECK(s.annotation.lanes.empty());
  CHECK(s.image.height == 64);
  CHECK(s.image.width == 128);
  for (float v : s.image.data) {
    CHECK(v >= 0.0f);
    CHECK(v <= 1.0f);
  }
}

TEST_CASE("straight roads have a constant step per lane") {
  SceneConfig cfg;
  cfg.curvature = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto s = generate_scene(cfg, seed);
    for (const auto& lane : s.annotation.lanes) {
      const double d0 = lane[1].w - lane[0].w;
      for (std::size_t i = 1; i + 1 < lane.size(); ++i) {
        CHECK(lane[i + 1].w - lane[i].w == doctest::Approx(d0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("generated lanes respect the image, the step bound and the row minimum") {
  SceneConfig cfg;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto s = generate_scene(cfg, seed);
    CHECK_NOTHROW(validate(s.annotation));
    for (const auto& lane : s.annotation.lanes) {
      CHECK(static_cast<int>(lane.size()) >= cfg.min_lane_rows);
      for (std::size_t i = 0; i + 1 < lane.size(); ++i) {
        CHECK(std::abs(std::lround(lane[i + 1].w) - std::lround(lane[i].w)) <= cfg.L);
      }
    }
  }
}

TEST_CASE("scenes are a pure function of the seed") {
  SceneConfig cfg;
  const auto a = generate_scene(cfg, 42);
  const auto b = generate_scene(cfg, 42);
  CHECK(a.image == b.image);
  CHECK(a.annotation.lanes == b.annotation.lanes);
  const auto c = generate_scene(cfg, 43);
  CHECK(!(a.image == c.image));
}

TEST_CASE("styles change appearance only") {
  SceneConfig cfg;
  const auto s = generate_scene(cfg, 7);
  const auto& presets = builtin_presets();
  CHECK(stylize(s.image, find_preset(presets, "base"), 1) == s.image);

  const auto night = stylize(s.image, find_preset(presets, "night"), 1);
  CHECK(night.height == s.image.height);
  CHECK(night.width == s.image.width);
  // Red has no bias under the night preset, so it is exactly the gain.
  for (std::size_t i = 0; i < s.image.plane(); i += 97) {
    CHECK(night.data[i] == doctest::Approx(0.3 * s.image.data[i]).epsilon(1e-6));
  }
  CHECK(night.mean() < 0.5 * s.image.mean());

  for (const auto& p : presets) {
    const auto a = stylize(s.image, p, 5);
    CHECK(a == stylize(s.image, p, 5));
    for (float v : a.data) {
      REQUIRE(v >= 0.0f);
      REQUIRE(v <= 1.0f);
    }
  }
  CHECK_THROWS_AS(find_preset(presets, "snow"), Error);
}

TEST_CASE("styled dataset copies reuse the base labels") {
  SceneConfig cfg;
  const auto items = make_dataset(cfg, 3, 11, {"night", "rain"});
  REQUIRE(items.size() == 9);
  for (int i = 0; i < 3; ++i) {
    const auto& base = items[static_cast<std::size_t>(3 * i)];
    CHECK(base.style == "base");
    for (int k = 1; k <= 2; ++k) {
      const auto& copy = items[static_cast<std::size_t>(3 * i + k)];
      CHECK(copy.image_id == base.image_id + "_" + copy.style);
      CHECK(copy.annotation.lanes == base.annotation.lanes);
      CHECK(!(copy.image == base.image));
    }
  }
  const auto dusk = restyle(items, cfg, "dusk", 11);
  CHECK(dusk.size() == items.size());
  CHECK(dusk[0].annotation.lanes == items[0].annotation.lanes);
  CHECK_THROWS_AS(make_dataset(cfg, 1, 1, {"snow"}), Error);
}
