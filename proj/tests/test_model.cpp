// Copyright 2026  The einv2-seld authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "seld/diffcore/gradcheck.hpp"
#include "seld/diffcore/primitive_suite.hpp"
#include "seld/model/decode.hpp"
#include "seld/model/einv2.hpp"

using namespace seld;
using namespace seld::model;
using diff::Tensor;

namespace {

Tensor<double> rnd(diff::Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 g(seed);
  return diff::random_tensor(std::move(s), g, false, lo, hi);
}

// Straight-line reference for one MHSA layer without residual/LN on a single
// sequence x [T, D] using explicit loops.
std::vector<double> brute_mhsa(const std::vector<double>& x, std::size_t T, std::size_t D,
                               std::size_t H, const std::vector<double>& wq,
                               const std::vector<double>& wk, const std::vector<double>& wv,
                               const std::vector<double>& wo, const std::vector<double>& bo,
                               bool use_pe) {
  const std::size_t Dh = D / H;
  std::vector<double> xp = x;
  if (use_pe)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t j = 0; j < D; ++j) {
        const double r = t / std::pow(10.0, 8.0 * (j / 2) / D);
        xp[t * D + j] += 0.1 * (j % 2 ? std::cos(r) : std::sin(r));
      }
  std::vector<double> concat(T * D, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    for (std::size_t t = 0; t < T; ++t) {
      std::vector<double> logit(T, 0.0);
      for (std::size_t s = 0; s < T; ++s) {
        double acc = 0;
        for (std::size_t a = 0; a < Dh; ++a) {
          double q = 0, k = 0;
          for (std::size_t j = 0; j < D; ++j) {
            q += xp[t * D + j] * wq[j * D + h * Dh + a];
            k += xp[s * D + j] * wk[j * D + h * Dh + a];
          }
          acc += q * k;
        }
        logit[s] = acc;
      }
      const double mx = *std::max_element(logit.begin(), logit.end());
      double z = 0;
      for (auto& l : logit) z += (l = std::exp(l - mx));
      for (std::size_t a = 0; a < Dh; ++a) {
        double acc = 0;
        for (std::size_t s = 0; s < T; ++s) {
          double v = 0;
          for (std::size_t j = 0; j < D; ++j) v += x[s * D + j] * wv[j * D + h * Dh + a];
          acc += logit[s] / z * v;
        }
        concat[t * D + h * Dh + a] = acc;
      }
    }
  }
  std::vector<double> y(T * D);
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t o = 0; o < D; ++o) {
      double acc = bo[o];
      for (std::size_t j = 0; j < D; ++j) acc += concat[t * D + j] * wo[j * D + o];
      y[t * D + o] = acc;
    }
  return y;
}

std::vector<double> to_vec(const Tensor<double>& t) { return {t.data().begin(), t.data().end()}; }

ModelConfig bare_mhsa(int heads, int d) {
  ModelConfig c;
  c.d_model = d;
  c.n_heads = heads;
  c.mhsa_residual = false;
  c.mhsa_layer_norm = false;
  return c;
}

}  // namespace

TEST(PositionalEncoding, Values) {
  const auto p = positional_encoding<double>(6, 10);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(p.at({0, 2 * i}), 0.0);
    EXPECT_EQ(p.at({0, 2 * i + 1}), 0.1);
  }
  // 0.1 * sin(3) from an independent high-precision evaluation.
  EXPECT_NEAR(p.at({3, 0}), 0.01411200080598672, 1e-15);
  EXPECT_NEAR(positional_encoding<double>(4, 64).at({3, 0}), 0.01411200080598672, 1e-15);
  const auto big = positional_encoding<double>(160, 512);
  for (double v : big.data()) {
    ASSERT_LE(v, 0.1);
    ASSERT_GE(v, -0.1);
  }
}

TEST(SelfAttention, ZeroQueryKeyGivesUniformAttention) {
  const auto x = rnd({5, 4}, 1), wv = rnd({4, 3}, 2);
  const Tensor<double> z({4, 4});
  Tensor<double> a;
  const auto y = self_attention(x, positional_encoding<double>(5, 4), z, z, wv, false, &a);
  const auto xv = diff::matmul(x, wv);
  for (std::size_t j = 0; j < 3; ++j) {
    double mean = 0;
    for (std::size_t t = 0; t < 5; ++t) mean += xv.at({t, j}) / 5;
    for (std::size_t t = 0; t < 5; ++t) EXPECT_NEAR(y.at({t, j}), mean, 1e-12);
  }
  for (double v : a.data()) EXPECT_NEAR(v, 0.2, 1e-15);
}

TEST(SelfAttention, SingletonAndPermutationEquivariance) {
  const auto x1 = rnd({1, 4}, 3), wq = rnd({4, 4}, 4), wk = rnd({4, 4}, 5), wv = rnd({4, 2}, 6);
  const auto y1 = self_attention(x1, Tensor<double>(), wq, wk, wv);
  const auto ref = diff::matmul(x1, wv);
  for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(y1.at({0, j}), ref.at({0, j}), 1e-14);

  const auto x = rnd({6, 4}, 7);
  const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  std::vector<Tensor<double>> rows;
  for (auto p : perm) rows.push_back(diff::slice(x, 0, p, p + 1));
  const auto xp = diff::concat(rows, 0);
  Tensor<double> a;
  const auto y = self_attention(x, Tensor<double>(), wq, wk, wv, false, &a);
  const auto yp = self_attention(xp, Tensor<double>(), wq, wk, wv);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_NEAR(yp.at({i, j}), y.at({perm[i], j}), 1e-12);
  for (std::size_t t = 0; t < 6; ++t) {
    double s = 0;
    for (std::size_t u = 0; u < 6; ++u) s += a.at({t, u});
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(Mhsa, MatchesBruteForceReference) {
  for (bool pe : {false, true}) {
    auto cfg = bare_mhsa(2, 8);
    cfg.positional_encoding = pe;
    diff::ParameterStore<double> store(3);
    MhsaLayer<double> layer(store, "m", cfg);
    const auto x = rnd({1, 5, 8}, 11);
    const auto y = layer(x);
    const auto ref = brute_mhsa(to_vec(x), 5, 8, 2, to_vec(store.at("m.w_qry")),
                                to_vec(store.at("m.w_key")), to_vec(store.at("m.w_val")),
                                to_vec(store.at("m.w_out")), to_vec(store.at("m.b_out")), pe);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref[i], 1e-12);
  }
}

TEST(Mhsa, SingleHeadIsAttentionPlusProjection) {
  auto cfg = bare_mhsa(1, 6);
  diff::ParameterStore<double> store(4);
  MhsaLayer<double> layer(store, "m", cfg);
  const auto x = rnd({1, 4, 6}, 2);
  const auto y = layer(x);
  const auto x2 = diff::reshape(x, {4, 6});
  const auto sa = self_attention(x2, positional_encoding<double>(4, 6), store.at("m.w_qry"),
                                 store.at("m.w_key"), store.at("m.w_val"));
  const auto ref = diff::linear(sa, store.at("m.w_out"), store.at("m.b_out"));
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.data()[i], ref.data()[i], 1e-13);
}

TEST(Mhsa, ZeroInputGivesBias) {
  auto cfg = bare_mhsa(2, 8);
  diff::ParameterStore<double> store(5);
  MhsaLayer<double> layer(store, "m", cfg);
  auto& b = store.at("m.b_out");
  for (auto& v : b.mutable_data()) v = 0.75;
  const auto y = layer(Tensor<double>({2, 5, 8}));
  for (double v : y.data()) EXPECT_EQ(v, 0.75);
}

TEST(Mhsa, AttentionRowsSumToOne) {
  auto cfg = tiny_config();
  diff::ParameterStore<double> store(6);
  MhsaStack<double> stack(store, "s", cfg);
  std::vector<Tensor<double>> att;
  stack(rnd({2, 10, 64}, 3), &att);
  ASSERT_EQ(att.size(), 2u);
  for (const auto& a : att) {
    ASSERT_EQ(a.shape(), (diff::Shape{2, 2, 10, 10}));
    for (std::size_t r = 0; r < a.size() / 10; ++r) {
      double s = 0;
      for (std::size_t j = 0; j < 10; ++j) s += a.data()[r * 10 + j];
      EXPECT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(CrossStitch, IdentitySwapAndHandExample) {
  const auto a = rnd({3, 4, 5}, 1), b = rnd({3, 4, 5}, 2);
  const Tensor<double> id({3, 2, 2}, std::vector<double>{1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1});
  auto [i1, i2] = cross_stitch(a, b, id, 0);
  EXPECT_EQ(to_vec(i1), to_vec(a));
  EXPECT_EQ(to_vec(i2), to_vec(b));
  const Tensor<double> sw({3, 2, 2}, std::vector<double>{0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0});
  auto [s1, s2] = cross_stitch(a, b, sw, 0);
  EXPECT_EQ(to_vec(s1), to_vec(b));
  EXPECT_EQ(to_vec(s2), to_vec(a));
  const Tensor<double> two({2, 3, 3}, 2.0), four({2, 3, 3}, 4.0);
  const Tensor<double> mix({2, 2, 2}, std::vector<double>{0.9, 0.1, 0.1, 0.9, 0.9, 0.1, 0.1, 0.9});
  auto [h1, h2] = cross_stitch(two, four, mix, 0);
  for (double v : h1.data()) EXPECT_NEAR(v, 2.2, 1e-15);
  for (double v : h2.data()) EXPECT_NEAR(v, 3.8, 1e-15);
  EXPECT_THROW(cross_stitch(a, b, mix, 0), DimensionError);
  EXPECT_THROW(cross_stitch(a, rnd({3, 4, 6}, 1), id, 0), DimensionError);
}

TEST(CrossStitch, LinearInInputs) {
  const auto x = rnd({2, 3, 4, 2}, 1), y = rnd({2, 3, 4, 2}, 2), z = rnd({2, 3, 4, 2}, 3);
  const auto al = rnd({3, 2, 2}, 4);
  const double ca = 0.7, cb = -1.3;
  const auto lhs = cross_stitch(diff::add(diff::scale(x, ca), diff::scale(y, cb)), z, al, 1);
  // z enters linearly too, so compare against the full affine expansion.
  const auto cx = cross_stitch(x, z, al, 1), cy = cross_stitch(y, z, al, 1);
  const auto cz = cross_stitch(Tensor<double>(x.shape()), z, al, 1);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r1 = ca * (cx.first.data()[i] - cz.first.data()[i]) +
                      cb * (cy.first.data()[i] - cz.first.data()[i]) + cz.first.data()[i];
    EXPECT_NEAR(lhs.first.data()[i], r1, 1e-10);
  }
}

TEST(CrossStitch, GradCheck) {
  const auto a = rnd({2, 3, 4}, 1), b = rnd({2, 3, 4}, 2), al = rnd({4, 2, 2}, 3);
  const auto r = diff::grad_check(
      [&] {
        auto [p, q] = cross_stitch(a, b, al, -1);
        return diff::add(diff::contract(p, 5), diff::contract(q, 6));
      },
      {a, b, al});
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(ConvBlock, ShapesAndZeroWeights) {
  diff::ParameterStore<float> store(1);
  ConvBlock<float> block(store, "b", 4, 64, {2, 2});
  diff::NoGradScope<float> ng;
  const auto y = block(Tensor<float>({1, 4, 160, 256}, 0.5f), Mode::train);
  EXPECT_EQ(y.shape(), (diff::Shape{1, 64, 80, 128}));

  diff::ParameterStore<double> zs(2);
  ConvBlock<double> zb(zs, "z", 3, 5, {1, 2});
  for (auto& [n, p] : zs.params())
    if (n.find("weight") != std::string::npos || n.find("beta") != std::string::npos)
      for (auto& v : p.tensor.mutable_data()) v = 0;
  const auto z = zb(rnd({2, 3, 4, 8}, 9), Mode::train);
  EXPECT_EQ(z.shape(), (diff::Shape{2, 5, 4, 4}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
}

TEST(Einv2, ShapeLawsForWidthDivisors) {
  for (int div : {8, 4, 1}) {
    ModelConfig c;
    c.width_divisor = div;
    c.d_model = 512 / div;
    c.n_heads = div == 8 ? 2 : 8;
    Einv2<float> net(c, 1);
    diff::NoGradScope<float> ng;
    std::mt19937_64 g(1);
    std::normal_distribution<float> n(0, 1);
    Tensor<float> s({1, 4, 160, 256}), d({1, 7, 160, 256});
    for (auto& v : s.mutable_data()) v = n(g);
    for (auto& v : d.mutable_data()) v = n(g);
    const auto out = net.forward(s, d, Mode::eval);
    EXPECT_EQ(out.sed.shape(), (diff::Shape{1, 40, 2, 14})) << div;
    EXPECT_EQ(out.doa.shape(), (diff::Shape{1, 40, 2, 3})) << div;
    for (float v : out.sed.data()) {
      ASSERT_GT(v, 0.0f);
      ASSERT_LT(v, 1.0f);
    }
    for (float v : out.doa.data()) {
      ASSERT_GT(v, -1.0f);
      ASSERT_LT(v, 1.0f);
    }
  }
}

TEST(Einv2, AllModesAndFormats) {
  const auto s = rnd({2, 4, 16, 32}, 1), d = rnd({2, 7, 16, 32}, 2);
  for (auto ps : {PsMode::none, PsMode::hard, PsMode::soft}) {
    Einv2<double> tw(tiny_config(ps, OutputFormat::trackwise), 3);
    const auto a = tw.forward(s, d, Mode::train);
    EXPECT_EQ(a.sed.shape(), (diff::Shape{2, 4, 2, 14}));
    EXPECT_EQ(a.doa.shape(), (diff::Shape{2, 4, 2, 3}));
    Einv2<double> sn(tiny_config(ps, OutputFormat::seldnet), 3);
    const auto b = sn.forward(s, d, Mode::train);
    EXPECT_EQ(b.sed.shape(), (diff::Shape{2, 4, 14}));
    EXPECT_EQ(b.doa.shape(), (diff::Shape{2, 4, 14, 3}));
  }
  Einv2<double> net(tiny_config(), 3);
  EXPECT_THROW(net.forward(rnd({1, 4, 16, 30}, 1), rnd({1, 7, 16, 30}, 1), Mode::train),
               ConfigError);
  EXPECT_THROW(net.forward(rnd({1, 3, 16, 32}, 1), rnd({1, 7, 16, 32}, 1), Mode::train),
               ConfigError);
  auto bad = tiny_config();
  bad.n_heads = 3;
  EXPECT_THROW(Einv2<double>(bad, 1), ConfigError);
  bad = tiny_config();
  bad.width_divisor = 3;
  EXPECT_THROW(Einv2<double>(bad, 1), ConfigError);
}

TEST(Einv2, SoftWithIdentityStitchEqualsNone) {
  auto soft = tiny_config(PsMode::soft);
  soft.stitch_self = 1.0;
  soft.stitch_cross = 0.0;
  soft.train_stitch = false;
  Einv2<double> a(soft, 42), b(tiny_config(PsMode::none), 42);
  const auto s = rnd({1, 4, 160, 256}, 5), d = rnd({1, 7, 160, 256}, 6);
  const auto ya = a.forward(s, d, Mode::train), yb = b.forward(s, d, Mode::train);
  EXPECT_EQ(to_vec(ya.sed), to_vec(yb.sed));
  EXPECT_EQ(to_vec(ya.doa), to_vec(yb.doa));
}

TEST(Einv2, FullTinyModelGradCheck) {
  Einv2<double> net(tiny_config(PsMode::soft), 9);
  const auto s = rnd({2, 4, 16, 32}, 1), d = rnd({2, 7, 16, 32}, 2);
  std::vector<Tensor<double>> inputs;
  std::vector<std::string> names;
  for (auto& [n, p] : net.parameters().params()) {
    inputs.push_back(p.tensor);
    names.push_back(n);
  }
  const auto r = diff::grad_check(
      [&] {
        const auto o = net.forward(s, d, Mode::train);
        return diff::add(diff::contract(o.sed, 3), diff::contract(o.doa, 4));
      },
      inputs, 1e-5, 400, 7);
  EXPECT_LT(r.max_rel_error, 1e-4) << names[r.worst_input] << "[" << r.worst_coord << "]";
  EXPECT_EQ(r.coords_checked, 400u);
}

TEST(Decode, Trackwise) {
  std::vector<double> sed(2 * 14, 0.4), doa{1, 0, 0, 0, 1, 0};
  EXPECT_TRUE(decode_trackwise<double>(sed, doa, 1, 2, 14)[0].empty());
  sed[3] = 0.9;
  sed[14 + 3] = 0.8;
  const auto ev = decode_trackwise<double>(sed, doa, 1, 2, 14)[0];
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].cls, 3);
  EXPECT_EQ(ev[1].cls, 3);
  EXPECT_NEAR(ev[0].azimuth, 0, 1e-12);
  EXPECT_NEAR(ev[1].azimuth, 90, 1e-12);
  std::vector<double> d2{0.5, 0.5, std::sqrt(0.5), 0, 0, 0};
  const auto e2 = decode_trackwise<double>(sed, d2, 1, 2, 14)[0];
  EXPECT_NEAR(e2[0].azimuth, 45, 1e-9);
  EXPECT_NEAR(e2[0].elevation, 45, 1e-9);
  EXPECT_FALSE(e2[0].degenerate);
  EXPECT_TRUE(e2[1].degenerate);
  EXPECT_EQ(e2[1].azimuth, 0);
}

TEST(Decode, SeldnetFormat) {
  std::vector<double> sed(14, 0.2), doa(42, 0.0);
  EXPECT_TRUE(decode_seldnet_format<double>(sed, doa, 1, 14)[0].empty());
  sed[5] = 0.7;
  doa[5 * 3 + 2] = 1;
  auto ev = decode_seldnet_format<double>(sed, doa, 1, 14)[0];
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0].cls, 5);
  EXPECT_NEAR(ev[0].elevation, 90, 1e-12);
  sed[9] = 0.6;
  doa[9 * 3] = -1;
  ev = decode_seldnet_format<double>(sed, doa, 1, 14)[0];
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[1].azimuth, -180, 1e-12);
}
