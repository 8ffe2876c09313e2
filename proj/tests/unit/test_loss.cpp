#include <doctest.h>

#include <cmath>
#include <random>

#include "../oracles.hpp"
#include "fastdraw/error.hpp"
#include "fastdraw/loss.hpp"

using namespace fastdraw;

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> softmax_rows(const std::vector<double>& z, int k) {
  std::vector<double> p(z.size());
  for (std::size_t r = 0; r < z.size() / k; ++r) {
    double mx = -1e300, s = 0.0;
    for (int c = 0; c < k; ++c) mx = std::max(mx, z[r * k + c]);
    for (int c = 0; c < k; ++c) s += (p[r * k + c] = std::exp(z[r * k + c] - mx));
    for (int c = 0; c < k; ++c) p[r * k + c] /= s;
  }
  return p;
}

}  // namespace

TEST_CASE("mask_nll examples") {
  std::vector<std::uint8_t> t{1, 0, 1, 0};
  CHECK(mask_nll(std::vector<double>{1, 0, 1, 0}, t).loss == doctest::Approx(1e-7).epsilon(0.01));
  CHECK(mask_nll(std::vector<double>(4, 0.5), t).loss == doctest::Approx(std::log(2.0)));
  const auto r = mask_nll(std::vector<double>{0.9, 0.1, 0.8, 0.2}, t);
  CHECK(r.loss == doctest::Approx((-2 * std::log(0.9) - 2 * std::log(0.8)) / 4));
  CHECK(r.loss == doctest::Approx(0.16425).epsilon(1e-4));
  CHECK(r.grad_logit[0] == doctest::Approx((0.9 - 1.0) / 4));
}

TEST_CASE("seq_nll examples") {
  const int L = 6, k = 2 * L + 2;
  std::vector<double> uni(k, 1.0 / k);
  std::vector<std::int16_t> idx{3}, ign{-1};
  CHECK(seq_nll(uni, uni, idx, idx, k).loss == doctest::Approx(std::log(14.0)));
  const auto none = seq_nll(uni, uni, ign, ign, k);
  CHECK(none.loss == 0.0);
  CHECK(none.supervised == 0);
  for (double g : none.grad_up) CHECK(g == 0.0);

  std::vector<double> p(k, 0.0);
  p[0] = 0.7;
  p[1] = 0.2;
  p[2] = 0.1;
  std::vector<std::int16_t> one{1};
  CHECK(seq_nll(p, uni, one, ign, k).loss == doctest::Approx(-std::log(0.2)));
  CHECK(seq_nll(p, uni, one, ign, k).loss == doctest::Approx(1.6094).epsilon(1e-4));

  std::vector<std::int16_t> bad{static_cast<std::int16_t>(k)};
  CHECK_THROWS_AS(seq_nll(p, uni, bad, ign, k), Error);
}

TEST_CASE("seq_nll ignores values at IGNORE positions") {
  std::mt19937_64 rng(3);
  const int k = 6, n = 5;
  std::normal_distribution<double> nd;
  std::vector<double> z(n * k);
  for (auto& v : z) v = nd(rng);
  auto p = softmax_rows(z, k);
  std::vector<std::int16_t> idx{0, -1, 5, -1, 2};
  const auto a = seq_nll(p, p, idx, idx, k);
  for (int c = 0; c < k; ++c) p[1 * k + c] = c == 0 ? 1.0 : 0.0;
  const auto b = seq_nll(p, p, idx, idx, k);
  CHECK(a.loss == b.loss);
  CHECK(a.supervised == 6);
}

TEST_CASE("combined_loss examples") {
  auto r = combined_loss(0.3, 0.5, 0.0, 0.0);
  CHECK(r.combined == doctest::Approx(0.8));
  r = combined_loss(2.0, 0.0, std::log(2.0), 0.0);
  CHECK(r.combined == doctest::Approx(1.0 + std::log(2.0)));
  CHECK(r.combined == doctest::Approx(1.6931).epsilon(1e-4));
  CHECK(combined_loss(1.0, 0.7, 0.0, 0.3).d_w_mask == doctest::Approx(0.0));
}

TEST_CASE("mask_nll gradient matches central differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 1.5);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 6;
    std::vector<double> z(n);
    std::vector<std::uint8_t> t(n);
    for (int i = 0; i < n; ++i) {
      z[i] = nd(rng);
      t[i] = static_cast<std::uint8_t>(rng() % 2);
    }
    auto f = [&] {
      std::vector<double> p(n);
      for (int i = 0; i < n; ++i) p[i] = sigmoid(z[i]);
      return mask_nll(p, t).loss;
    };
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[i] = sigmoid(z[i]);
    const auto g = mask_nll(p, t).grad_logit;
    for (int i = 0; i < n; ++i) {
      CHECK(oracle::relative_error(g[i], oracle::central_difference(f, z[i], 1e-4)) < 1e-4);
    }
  }
}

TEST_CASE("seq_nll gradient matches central differences") {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> nd(0.0, 1.5);
  const int k = 8, n = 4;
  for (int trial = 0; trial < 25; ++trial) {
    std::vector<double> zu(n * k), zd(n * k);
    for (auto& v : zu) v = nd(rng);
    for (auto& v : zd) v = nd(rng);
    std::vector<std::int16_t> iu(n), id(n);
    for (int i = 0; i < n; ++i) {
      iu[i] = static_cast<std::int16_t>(static_cast<int>(rng() % (k + 1)) - 1);
      id[i] = static_cast<std::int16_t>(static_cast<int>(rng() % (k + 1)) - 1);
    }
    iu[0] = 2;  // at least one supervised entry
    auto f = [&] { return seq_nll(softmax_rows(zu, k), softmax_rows(zd, k), iu, id, k).loss; };
    const auto r = seq_nll(softmax_rows(zu, k), softmax_rows(zd, k), iu, id, k);
    for (int i = 0; i < n * k; ++i) {
      CHECK(oracle::relative_error(r.grad_up[i], oracle::central_difference(f, zu[i], 1e-4)) < 1e-4);
      CHECK(oracle::relative_error(r.grad_down[i], oracle::central_difference(f, zd[i], 1e-4)) < 1e-4);
    }
  }
}

TEST_CASE("combined_loss derivatives and convexity in w") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> L(0.05, 3.0), W(-2.0, 2.0);
  for (int trial = 0; trial < 25; ++trial) {
    double lm = L(rng), ls = L(rng), wm = W(rng), ws = W(rng);
    const auto r = combined_loss(lm, ls, wm, ws);
    auto f = [&] { return combined_loss(lm, ls, wm, ws).combined; };
    CHECK(oracle::relative_error(r.d_w_mask, oracle::central_difference(f, wm, 1e-4)) < 1e-4);
    CHECK(oracle::relative_error(r.d_w_seq, oracle::central_difference(f, ws, 1e-4)) < 1e-4);
    CHECK(oracle::relative_error(r.mask_scale, oracle::central_difference(f, lm, 1e-4)) < 1e-4);
    CHECK(oracle::relative_error(r.seq_scale, oracle::central_difference(f, ls, 1e-4)) < 1e-4);
    const double h = 1e-3;
    const double second = (combined_loss(lm, ls, wm + h, ws).combined - 2 * r.combined +
                           combined_loss(lm, ls, wm - h, ws).combined) / (h * h);
    CHECK(second > 0.0);
    CHECK(second == doctest::Approx(std::exp(-wm) * lm).epsilon(1e-4));
  }
}
