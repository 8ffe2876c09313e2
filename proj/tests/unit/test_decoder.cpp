#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "field_builder.hpp"
#include "fastdraw/decoder.hpp"
#include "fastdraw/error.hpp"
#include "fastdraw/targets.hpp"

using namespace fastdraw;
using testing::make_field;

namespace {

DecodeConfig no_center_mask() {
  DecodeConfig cfg;
  cfg.center_mask_fraction = 0.0;
  return cfg;
}

int end_of(int L) { return end_class(L); }

}  // namespace

TEST_CASE("propose_initial_points: empty field has no seeds") {
  const int L = 2;
  const auto f = make_field(8, 16, L, [](int, int) { return 0.0f; },
                            [&](int, int) { return end_of(L); }, [&](int, int) { return end_of(L); });
  CHECK(propose_initial_points(f, DecodeConfig{}).empty());
  CHECK(decode_all(f, DecodeConfig{}).empty());
}

TEST_CASE("propose_initial_points: two stripes give two seeds") {
  const int L = 2, H = 20, W = 64;
  auto prob = [](int, int w) { return (w == 5 || w == 50) ? 1.0f : 0.0f; };
  const auto f = make_field(H, W, L, prob, [&](int, int) { return L; }, [&](int, int) { return L; });
  const auto seeds = propose_initial_points(f, DecodeConfig{});
  CHECK(seeds.size() == 2);

  std::vector<oracle::Pixel> px;
  for (int h = 0; h < H; ++h)
    for (int w : {5, 50}) px.push_back({h, w});
  CHECK(oracle::count_components(oracle::eps_components(px, 5.0, 3)) == 2);
}

TEST_CASE("propose_initial_points: one seed at the stripe maximum") {
  const int L = 2;
  auto prob = [](int h, int w) { return w == 5 ? (h == 7 ? 0.95f : 0.8f) : 0.0f; };
  const auto f = make_field(20, 64, L, prob, [&](int, int) { return L; }, [&](int, int) { return L; });
  const auto seeds = propose_initial_points(f, DecodeConfig{});
  REQUIRE(seeds.size() == 1);
  CHECK(seeds[0].h == 7);
  CHECK(seeds[0].w == 5);
}

TEST_CASE("propose_initial_points: centered band is ignored") {
  const int L = 2;
  auto prob = [](int, int w) { return w == 32 ? 1.0f : 0.0f; };
  const auto f = make_field(20, 64, L, prob, [&](int, int) { return L; }, [&](int, int) { return L; });
  CHECK(propose_initial_points(f, DecodeConfig{}).empty());
  CHECK(propose_initial_points(f, no_center_mask()).size() == 1);
}

TEST_CASE("propose_initial_points matches brute-force eps-connectivity") {
  std::mt19937_64 rng(11);
  const int L = 1, H = 24, W = 40;
  for (int trial = 0; trial < 60; ++trial) {
    std::bernoulli_distribution on(std::uniform_real_distribution<double>(0.03, 0.25)(rng));
    std::uniform_real_distribution<float> hi(0.5f, 1.0f);
    std::vector<float> probs(static_cast<std::size_t>(H) * W, 0.0f);
    for (auto& p : probs) p = on(rng) ? hi(rng) : 0.1f;
    const auto f = make_field(H, W, L, [&](int h, int w) { return probs[h * W + w]; },
                              [&](int, int) { return L; }, [&](int, int) { return L; });
    const auto seeds = propose_initial_points(f, no_center_mask());
    std::vector<oracle::Pixel> px;
    for (int h = 0; h < H; ++h)
      for (int w = 0; w < W; ++w)
        if (probs[h * W + w] >= 0.5f) px.push_back({h, w});
    const auto labels = oracle::eps_components(px, 5.0, 3);
    REQUIRE(seeds.size() == static_cast<std::size_t>(oracle::count_components(labels)));
    for (std::size_t i = 1; i < seeds.size(); ++i) CHECK(seeds[i - 1].prob >= seeds[i].prob);
  }
}

TEST_CASE("draw_lane: immediate end is rejected") {
  const int L = 2;
  const auto f = make_field(6, 6, L, [](int, int) { return 1.0f; }, [&](int, int) { return end_of(L); },
                            [&](int, int) { return end_of(L); });
  CHECK_FALSE(draw_lane(f, {2, 2, 1.0f}, DecodeConfig{}).has_value());
  CHECK(decode_all(f, no_center_mask()).empty());
}

TEST_CASE("draw_lane: constructed diagonal") {
  const int L = 2;
  const auto f = make_field(4, 6, L, [](int, int) { return 1.0f; }, [&](int, int) { return L + 1; },
                            [&](int, int) { return end_of(L); });
  const auto lane = draw_lane(f, {0, 0, 1.0f}, DecodeConfig{});
  REQUIRE(lane.has_value());
  CHECK(lane->polyline == Polyline({{0, 0.0}, {1, 1.0}, {2, 2.0}, {3, 3.0}}));
  CHECK(lane->per_row_std.size() == 4);
}

TEST_CASE("draw_lane: seed outside the field") {
  const int L = 1;
  const auto f = make_field(4, 4, L, [](int, int) { return 0.0f; }, [&](int, int) { return L; },
                            [&](int, int) { return L; });
  try {
    draw_lane(f, {4, 0, 0.0f}, DecodeConfig{});
    FAIL("expected seed error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::seed);
  }
}

TEST_CASE("draw_lane: max_steps bounds each direction") {
  const int L = 1;
  const auto f = make_field(50, 4, L, [](int, int) { return 1.0f; }, [&](int, int) { return L; },
                            [&](int, int) { return L; });
  DecodeConfig cfg;
  cfg.max_steps = 3;
  const auto lane = draw_lane(f, {20, 1, 1.0f}, cfg);
  REQUIRE(lane.has_value());
  CHECK(lane->polyline.size() == 7);
}

TEST_CASE("argmax_class tie-breaking") {
  const int L = 2;
  // classes: -2 -1 0 +1 +2 end
  CHECK(argmax_class(std::vector<float>{0.2f, 0.2f, 0.2f, 0.2f, 0.2f, 0.0f}, L) == L);
  CHECK(argmax_class(std::vector<float>{0.0f, 0.4f, 0.0f, 0.4f, 0.0f, 0.2f}, L) == L - 1);
  CHECK(argmax_class(std::vector<float>{0.3f, 0.0f, 0.0f, 0.0f, 0.3f, 0.4f}, L) == end_class(L));
  CHECK(argmax_class(std::vector<float>{0.0f, 0.0f, 0.0f, 0.0f, 0.5f, 0.5f}, L) == L + 2);
}

TEST_CASE("uncertainty_at examples") {
  const int L = 2;
  const int k = num_classes(L);
  auto field_with = [&](std::vector<float> dist) {
    return testing::make_field_dist(1, 1, L, [](int, int) { return 0.5f; },
                                    [=](int, int) { return dist; }, [=](int, int) { return dist; });
  };
  std::vector<float> point(k, 0.0f);
  point[L] = 1.0f;
  CHECK(uncertainty_at(field_with(point), 0, 0, Direction::up) == 0.0);

  std::vector<float> uni(k, 0.0f);
  uni[L - 1] = uni[L] = uni[L + 1] = 1.0f / 3.0f;
  CHECK(uncertainty_at(field_with(uni), 0, 0, Direction::down) ==
        doctest::Approx(std::sqrt(2.0 / 3.0)).epsilon(1e-6));

  std::vector<float> half(k, 0.0f);
  half[end_class(L)] = 0.5f;
  half[L + 2] = 0.5f;
  CHECK(uncertainty_at(field_with(half), 0, 0, Direction::up) == 0.0);

  std::vector<float> end_only(k, 0.0f);
  end_only[end_class(L)] = 1.0f;
  CHECK(uncertainty_at(field_with(end_only), 0, 0, Direction::up) == 0.0);
}

TEST_CASE("uncertainty_at matches brute-force moments") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const int L = std::uniform_int_distribution<int>(1, 8)(rng);
    const int k = num_classes(L);
    std::vector<float> p(k);
    std::gamma_distribution<float> g(0.3f, 1.0f);
    float s = 0.0f;
    for (auto& v : p) s += (v = g(rng) + 1e-6f);
    for (auto& v : p) v /= s;
    const auto f = testing::make_field_dist(1, 1, L, [](int, int) { return 0.0f; },
                                            [&](int, int) { return p; }, [&](int, int) { return p; });
    const std::vector<double> pd(f.up(0, 0).begin(), f.up(0, 0).end());
    CHECK(std::abs(uncertainty_at(f, 0, 0, Direction::up) - oracle::conditional_std(pd, L)) < 1e-9);
  }
}

TEST_CASE("decode_all: two seeds on one stripe give one lane") {
  const int L = 2, H = 30, W = 64;
  // Two bright spots far apart on one vertical stripe form two clusters.
  auto prob = [](int h, int w) {
    if (w != 5) return 0.0f;
    return (h < 5 || h > 24) ? 0.9f : 0.2f;
  };
  auto up = [&](int h, int) { return h == H - 1 ? end_of(L) : L; };
  auto down = [&](int h, int) { return h == 0 ? end_of(L) : L; };
  const auto f = make_field(H, W, L, prob, up, down);
  CHECK(propose_initial_points(f, DecodeConfig{}).size() == 2);
  const auto lanes = decode_all(f, DecodeConfig{});
  REQUIRE(lanes.size() == 1);
  CHECK(lanes[0].polyline.size() == static_cast<std::size_t>(H));
}

TEST_CASE("decode_all recovers oracle fields") {
  SUBCASE("single vertical lane") {
    AnnotationSet ann{"v", {16, 32}, {Polyline({{2, 4.0}, {3, 4.0}, {4, 4.0}, {5, 4.0}})}};
    const auto lanes = decode_all(oracle_field(ann, 6), DecodeConfig{});
    REQUIRE(lanes.size() == 1);
    CHECK(lanes[0].polyline == ann.lanes[0]);
    for (double s : lanes[0].per_row_std) CHECK(s == 0.0);
  }
  SUBCASE("three disjoint lanes") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 50; ++trial) {
      auto ann = oracle::random_annotation(rng, 40, 80, 6, 3, 3, 7);
      const auto lanes = decode_all(oracle_field(ann, 6), no_center_mask());
      std::vector<Polyline> got;
      for (const auto& l : lanes) got.push_back(l.polyline);
      CHECK(oracle::lane_set(got) == oracle::lane_set(ann.lanes));
    }
  }
}

TEST_CASE("any seed on an oracle lane reproduces the full lane") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    auto ann = oracle::random_annotation(rng, 30, 60, 4, 1, 4, 7);
    REQUIRE(ann.lanes.size() == 1);
    const auto f = oracle_field(ann, 4);
    for (const auto& p : ann.lanes[0].points()) {
      const auto lane = draw_lane(f, {p.h, static_cast<int>(p.w), 1.0f}, DecodeConfig{});
      REQUIRE(lane.has_value());
      CHECK(lane->polyline == ann.lanes[0]);
    }
  }
}

TEST_CASE("decoded lanes on random fields satisfy the invariants") {
  std::mt19937_64 rng(13);
  const int L = 3, H = 24, W = 32;
  std::gamma_distribution<float> g(0.5f, 1.0f);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (int trial = 0; trial < 30; ++trial) {
    auto dist = [&](int, int) {
      std::vector<float> p(num_classes(L));
      float s = 0.0f;
      for (auto& v : p) s += (v = g(rng) + 1e-4f);
      for (auto& v : p) v /= s;
      return p;
    };
    std::vector<float> probs(H * W);
    for (auto& v : probs) v = u(rng);
    const auto f = testing::make_field_dist(H, W, L, [&](int h, int w) { return probs[h * W + w]; },
                                            dist, dist);
    for (const auto& lane : decode_all(f, no_center_mask())) {
      const auto& pts = lane.polyline.points();
      CHECK(pts.size() >= 2);
      CHECK(lane.per_row_std.size() == pts.size());
      for (std::size_t i = 1; i < pts.size(); ++i) {
        CHECK(pts[i].h == pts[i - 1].h + 1);
        CHECK(std::abs(pts[i].w - pts[i - 1].w) <= L);
      }
    }
  }
}

TEST_CASE("heuristic_agreement on constructed fields") {
  const int L = 6, H = 10, W = 20;
  auto up = [&](int h, int) { return h == H - 1 ? end_of(L) : L; };
  auto down = [&](int, int) { return end_of(L); };
  auto run = [&](const testing::ProbFn& prob) {
    const auto f = make_field(H, W, L, prob, up, down);
    const auto lane = draw_lane(f, {0, 5, f.lane_prob(0, 5)}, DecodeConfig{});
    REQUIRE(lane.has_value());
    REQUIRE(lane->polyline.size() == static_cast<std::size_t>(H));
    return heuristic_agreement(f, {*lane});
  };

  SUBCASE("perfect agreement") {
    const auto r = run([](int, int w) { return w == 5 ? 1.0f : 0.0f; });
    CHECK(r.steps == 9);
    CHECK(r.fractions == std::array<double, 3>{1.0, 1.0, 1.0});
  }
  SUBCASE("constant 2 px disagreement") {
    const auto r = run([](int, int w) { return w == 7 ? 1.0f : (w == 5 ? 0.6f : 0.0f); });
    CHECK(r.fractions == std::array<double, 3>{0.0, 1.0, 1.0});
  }
  SUBCASE("half 0 px, half 4 px") {
    // Scored rows are 1..9 for nine steps; make it eight by ending at row 8.
    auto up8 = [&](int h, int) { return h >= 8 ? end_of(L) : L; };
    const auto f = make_field(
        H, W, L,
        [](int h, int w) {
          const int peak = h % 2 == 0 ? 9 : 5;
          return w == peak ? 1.0f : (w == 5 ? 0.6f : 0.0f);
        },
        up8, down);
    const auto lane = draw_lane(f, {0, 5, 0.6f}, DecodeConfig{});
    REQUIRE(lane.has_value());
    const auto r = heuristic_agreement(f, {*lane});
    CHECK(r.steps == 8);
    CHECK(r.fractions == std::array<double, 3>{0.5, 0.5, 1.0});
  }
}

TEST_CASE("heuristic_agreement fractions are cumulative") {
  std::mt19937_64 rng(17);
  const int L = 4, H = 20, W = 30;
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::uniform_int_distribution<int> cls(0, 2 * L);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<float> probs(H * W);
    std::vector<int> ups(H * W), downs(H * W);
    for (auto& v : probs) v = u(rng);
    for (auto& v : ups) v = cls(rng);
    for (auto& v : downs) v = cls(rng);
    const auto f = make_field(H, W, L, [&](int h, int w) { return probs[h * W + w]; },
                              [&](int h, int w) { return ups[h * W + w]; },
                              [&](int h, int w) { return downs[h * W + w]; });
    const auto r = heuristic_agreement(f, decode_all(f, no_center_mask()));
    CHECK(r.fractions[0] <= r.fractions[1]);
    CHECK(r.fractions[1] <= r.fractions[2]);
  }
}

TEST_CASE("steep lanes are found through isolated pixels") {
  std::vector<LanePoint> pts;
  for (int h = 2; h < 12; ++h) pts.push_back({h, 3.0 + 6.0 * (h - 2)});
  AnnotationSet ann{"s", {16, 80}, {Polyline(pts)}};
  const auto f = oracle_field(ann, 6);
  auto cfg = no_center_mask();
  // Consecutive pixels are sqrt(37) apart, so no pixel is a core point.
  CHECK(propose_initial_points(f, cfg).empty());
  const auto lanes = decode_all(f, cfg);
  REQUIRE(lanes.size() == 1);
  CHECK(lanes[0].polyline == ann.lanes[0]);
  cfg.seed_isolated = false;
  CHECK(decode_all(f, cfg).empty());
}

TEST_CASE("uncertainty of a single far step is exactly zero") {
  const int L = 6, k = num_classes(L);
  for (int c = 0; c < 2 * L + 1; ++c) {
    const auto f = testing::make_field_dist(
        1, 1, L, [](int, int) { return 1.0f; },
        [&](int, int) {
          std::vector<float> v(k, 0.0f);
          v[c] = 0.349455f;
          v[k - 1] = 1.0f - v[c];
          return v;
        },
        [&](int, int) { return std::vector<float>(k, 1.0f / k); });
    CHECK(uncertainty_at(f, 0, 0, Direction::up) == 0.0);
  }
}
