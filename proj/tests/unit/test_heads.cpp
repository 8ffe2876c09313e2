#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fastdraw/error.hpp"
#include "fastdraw/heads.hpp"
#include "fastdraw/tensor_io.hpp"

using namespace fastdraw;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("fastdraw_unit_" + name)).string();
}

}  // namespace

TEST_CASE("index_to_dw maps the support and the end token") {
  CHECK(index_to_dw({0}, 6) == -6);
  CHECK(index_to_dw({6}, 6) == 0);
  CHECK_FALSE(index_to_dw({13}, 6).has_value());
  CHECK_THROWS_AS(index_to_dw({14}, 6), Error);
  CHECK_THROWS_AS(index_to_dw({-1}, 6), Error);
  for (int L : {1, 3, 6, 16}) {
    for (int dw = -L; dw <= L; ++dw) CHECK(index_to_dw(dw_to_index(dw, L), L) == dw);
  }
}

TEST_CASE("from_logits: zeros give 0.5 and uniform categoricals") {
  const int L = 1;
  std::vector<float> raw(2 * 3 * head_channels(L), 0.0f);
  const auto f = from_logits(raw, 2, 3, L);
  for (int h = 0; h < 2; ++h) {
    for (int w = 0; w < 3; ++w) {
      CHECK(f.lane_prob(h, w) == doctest::Approx(0.5));
      for (float p : f.up(h, w)) CHECK(p == doctest::Approx(0.25));
      for (float p : f.down(h, w)) CHECK(p == doctest::Approx(0.25));
    }
  }
}

TEST_CASE("from_logits: saturated end logit") {
  const int L = 1;
  std::vector<float> raw(head_channels(L), 0.0f);
  raw[1 + end_class(L)] = 1e9f;
  const auto f = from_logits(raw, 1, 1, L);
  CHECK(f.up(0, 0)[end_class(L)] == doctest::Approx(1.0));
  CHECK(f.up(0, 0)[0] == doctest::Approx(0.0));
}

TEST_CASE("from_logits: softmax by hand") {
  const int L = 1;
  std::vector<float> raw(head_channels(L), 0.0f);
  raw[2] = static_cast<float>(std::log(2.0));
  const auto f = from_logits(raw, 1, 1, L);
  const auto up = f.up(0, 0);
  CHECK(up[0] == doctest::Approx(0.2));
  CHECK(up[1] == doctest::Approx(0.4));
  CHECK(up[2] == doctest::Approx(0.2));
  CHECK(up[3] == doctest::Approx(0.2));
}

TEST_CASE("from_planar_logits agrees with from_logits") {
  const int L = 2, H = 3, W = 4, C = head_channels(L);
  std::mt19937 rng(5);
  std::normal_distribution<float> n(0.0f, 3.0f);
  std::vector<float> hwc(static_cast<std::size_t>(H * W * C));
  for (auto& v : hwc) v = n(rng);
  std::vector<float> chw(hwc.size());
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      for (int c = 0; c < C; ++c) chw[(c * H + h) * W + w] = hwc[(h * W + w) * C + c];
  CHECK(from_logits(hwc, H, W, L).data() == from_planar_logits(chw, H, W, L).data());
}

TEST_CASE("HeadField rejects invalid categoricals") {
  const int L = 1;
  std::vector<float> data(head_channels(L), 0.25f);
  data[0] = 0.5f;
  CHECK_NOTHROW(HeadField(1, 1, L, data));
  auto bad = data;
  bad[1] = 0.5f;  // up block sums to 1.25
  CHECK_THROWS_AS(HeadField(1, 1, L, bad), Error);
  bad = data;
  bad[0] = 1.5f;
  CHECK_THROWS_AS(HeadField(1, 1, L, bad), Error);
  CHECK_THROWS_AS(HeadField(1, 2, L, data), Error);
}

TEST_CASE("tensor save/load is bitwise") {
  const int L = 2, H = 3, W = 5;
  std::mt19937 rng(9);
  std::normal_distribution<float> n(0.0f, 2.0f);
  std::vector<float> raw(static_cast<std::size_t>(H * W * head_channels(L)));
  for (auto& v : raw) v = n(rng);
  const auto f = from_logits(raw, H, W, L);
  const auto path = temp_path("field.fdt");
  save_field(path, f);
  const auto g = load_field(path);
  CHECK(g.height() == H);
  CHECK(g.width() == W);
  CHECK(g.L() == L);
  CHECK(std::memcmp(g.data().data(), f.data().data(), f.data().size() * sizeof(float)) == 0);
  std::filesystem::remove(path);
}

TEST_CASE("tensor loading rejects a wrong magic and truncation") {
  RawTensor t{{1, 1, 9}, 1, std::vector<float>(9, 0.0f)};
  std::stringstream ss;
  write_tensor(ss, t);
  std::string bytes = ss.str();
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream in1(bad);
  try {
    read_tensor(in1);
    FAIL("expected format error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::format);
  }
  std::istringstream in2(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_tensor(in2), Error);
  std::istringstream in3(bytes);
  const auto back = read_tensor(in3);
  CHECK(back.dims == t.dims);
  CHECK(back.L == 1u);
}

TEST_CASE("FDT1 fields: L is inferred from channels and checked against the header") {
  // 2 x 3 x 17: 1 + 2(2L+2) = 17 gives L = 3.
  const int L = 3;
  std::vector<float> probs;
  for (int i = 0; i < 6; ++i) {
    probs.push_back(0.5f);
    for (int c = 0; c < 2 * num_classes(L); ++c) probs.push_back(1.0f / num_classes(L));
  }
  RawTensor ok{{2, 3, 17}, 3, probs};
  const auto f = from_raw_tensor(ok);
  CHECK(f.L() == 3);

  RawTensor wrong_header = ok;
  wrong_header.L = 7;
  CHECK_THROWS_AS(from_raw_tensor(wrong_header), Error);

  // 16 channels cannot be 1 + 2(2L+2) for any integer L.
  RawTensor sixteen{{2, 3, 16}, 7, std::vector<float>(2 * 3 * 16, 0.0f)};
  try {
    from_raw_tensor(sixteen);
    FAIL("expected shape error");
  } catch (const Error& e) {
    CHECK((e.code() == ErrorCode::shape || e.code() == ErrorCode::format));
  }
}

TEST_CASE("with_scaled_lane_prob scales only the mask") {
  const int L = 1;
  std::vector<float> data(head_channels(L), 0.25f);
  data[0] = 0.8f;
  const HeadField f(1, 1, L, data);
  const auto g = f.with_scaled_lane_prob(0.5f);
  CHECK(g.lane_prob(0, 0) == doctest::Approx(0.4));
  CHECK(g.up(0, 0)[0] == doctest::Approx(0.25));
}
