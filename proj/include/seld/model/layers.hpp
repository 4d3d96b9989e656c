// seld/model/layers.hpp

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

// Building blocks of the network: positional encoding, self-attention,
// multi-head self-attention layers, cross-stitch units and conv blocks.

#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "seld/diffcore/parameters.hpp"
#include "seld/model/config.hpp"

namespace seld::model {

using diff::Mode;
using diff::Shape;
using diff::Tensor;

/// P(t, 2i) = 0.1 sin(t / 10^(8i/D)), P(t, 2i+1) = 0.1 cos(t / 10^(8i/D)).
template <class T>
Tensor<T> positional_encoding(std::size_t frames, std::size_t dim) {
  Tensor<T> p(Shape{frames, dim});
  auto v = p.mutable_data();
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t j = 0; j < dim; ++j) {
      const std::size_t i = j / 2;
      const double r = static_cast<double>(t) /
                       std::pow(10.0, 8.0 * static_cast<double>(i) / static_cast<double>(dim));
      v[t * dim + j] = static_cast<T>(0.1 * (j % 2 == 0 ? std::sin(r) : std::cos(r)));
    }
  return p;
}

/// One attention head on [..., T, D_in]:
///   softmax((X+P) Wq ((X+P) Wk)^T) (X Wv).
/// `attention`, when given, receives the [..., T, T] weights.
template <class T>
Tensor<T> self_attention(const Tensor<T>& x, const Tensor<T>& p, const Tensor<T>& wq,
                         const Tensor<T>& wk, const Tensor<T>& wv, bool scaled = false,
                         Tensor<T>* attention = nullptr) {
  const Tensor<T> xp = p.defined() ? diff::add(x, p) : x;
  Tensor<T> logits = diff::matmul(diff::matmul(xp, wq), diff::transpose_last2(diff::matmul(xp, wk)));
  if (scaled) logits = diff::scale(logits, T(1) / std::sqrt(static_cast<T>(wq.dim(-1))));
  const Tensor<T> a = diff::softmax_lastdim(logits);
  if (attention) *attention = a;
  return diff::matmul(a, diff::matmul(x, wv));
}

// ------------------------------------------------------------- cross-stitch

namespace detail {

// y = alpha[c, row, 0] * a + alpha[c, row, 1] * b with c indexed along `axis`.
template <class T>
Tensor<T> stitch_row(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& alpha,
                     std::size_t row, std::size_t axis) {
  const Shape& s = a.shape();
  const std::size_t C = s[axis];
  std::size_t inner = 1;
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = a.size();
  Tensor<T> out(s);
  auto av = a.data(), bv = b.data(), al = alpha.data();
  auto ov = out.mutable_data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = (i / inner) % C;
    ov[i] = al[c * 4 + row * 2] * av[i] + al[c * 4 + row * 2 + 1] * bv[i];
  }
  if (diff::detail::recording<T>({&a, &b, &alpha})) {
    auto pa = a.impl(), pb = b.impl(), pal = alpha.impl(), po = out.impl();
    diff::detail::attach<T>("cross_stitch", out, {&a, &b, &alpha},
                            [pa, pb, pal, po, C, inner, n, row]() {
      const auto& g = po->grad;
      const auto& al = pal->value;
      if (pa->requires_grad) {
        auto& ga = pa->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) ga[i] += al[((i / inner) % C) * 4 + row * 2] * g[i];
      }
      if (pb->requires_grad) {
        auto& gb = pb->grad_buffer();
        for (std::size_t i = 0; i < n; ++i)
          gb[i] += al[((i / inner) % C) * 4 + row * 2 + 1] * g[i];
      }
      if (pal->requires_grad) {
        auto& gal = pal->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t c = (i / inner) % C;
          gal[c * 4 + row * 2] += g[i] * pa->value[i];
          gal[c * 4 + row * 2 + 1] += g[i] * pb->value[i];
        }
      }
    });
  }
  return out;
}

}  // namespace detail

/// Cross-stitch unit: per channel c (indexed along `channel_axis`),
///   [x_sed', x_doa'] = alpha[c] [x_sed, x_doa], alpha of shape [C, 2, 2].
template <class T>
std::pair<Tensor<T>, Tensor<T>> cross_stitch(const Tensor<T>& x_sed, const Tensor<T>& x_doa,
                                             const Tensor<T>& alpha, int channel_axis) {
  if (x_sed.shape() != x_doa.shape())
    throw DimensionError(diff::detail::shapes_msg("cross_stitch", x_sed.shape(), x_doa.shape()));
  const std::size_t axis = diff::detail::norm_axis(channel_axis, x_sed.ndim());
  const std::size_t C = x_sed.dim(static_cast<int>(axis));
  if (alpha.shape() != Shape{C, 2, 2})
    throw DimensionError("cross_stitch: alpha must be [" + std::to_string(C) + ",2,2], got " +
                         diff::to_string(alpha.shape()));
  return {detail::stitch_row(x_sed, x_doa, alpha, 0, axis),
          detail::stitch_row(x_sed, x_doa, alpha, 1, axis)};
}

// ------------------------------------------------------------------- layers

template <class T>
using Store = diff::ParameterStore<T>;

/// Adds a [C, 2, 2] cross-stitch parameter initialized from the config.
template <class T>
Tensor<T>& add_stitch(Store<T>& store, const std::string& name, int channels,
                      const ModelConfig& cfg) {
  Tensor<T>& a = store.add(name, Shape{static_cast<std::size_t>(channels), 2, 2},
                           diff::InitSpec::tiled({cfg.stitch_self, cfg.stitch_cross,
                                                  cfg.stitch_cross, cfg.stitch_self}));
  if (!cfg.train_stitch) a.set_requires_grad(false);
  return a;
}

/// (conv3x3 -> BN -> ReLU) x 2, then average pooling.
template <class T>
class ConvBlock {
 public:
  ConvBlock() = default;
  ConvBlock(Store<T>& store, const std::string& name, int in, int width, std::pair<int, int> pool)
      : pool_(pool) {
    const auto ci = static_cast<std::size_t>(in), co = static_cast<std::size_t>(width);
    for (int s = 0; s < 2; ++s) {
      const std::size_t cin = s == 0 ? ci : co;
      const std::string base = name + ".conv" + std::to_string(s + 1);
      w_[s] = store.add(base + ".weight", Shape{co, cin, 3, 3}, diff::InitSpec::uniform(cin * 9));
      gamma_[s] = store.add(base + ".bn.gamma", Shape{co}, diff::InitSpec::fill(1.0));
      beta_[s] = store.add(base + ".bn.beta", Shape{co}, diff::InitSpec::fill(0.0));
      bn_[s] = &store.add_bn(base + ".bn", co);
    }
    // The conv bias is redundant ahead of batch norm and stays at zero.
    zero_bias_ = Tensor<T>(Shape{co});
  }

  Tensor<T> operator()(const Tensor<T>& x, Mode mode) const {
    Tensor<T> h = x;
    for (int s = 0; s < 2; ++s) {
      h = diff::conv2d(h, w_[s], zero_bias_);
      h = diff::batchnorm2d(h, gamma_[s], beta_[s], *bn_[s], mode);
      h = diff::relu(h);
    }
    return diff::pool2d(h, static_cast<std::size_t>(pool_.first),
                        static_cast<std::size_t>(pool_.second), diff::PoolKind::avg);
  }

 private:
  std::pair<int, int> pool_{1, 1};
  std::array<Tensor<T>, 2> w_, gamma_, beta_;
  std::array<diff::BatchNormState<T>*, 2> bn_{nullptr, nullptr};
  Tensor<T> zero_bias_;
};

/// One MHSA layer on [B, T, D]:
///   y = concat_h SA_h(x) W_out + b_out, then optionally LN(x + y).
/// The per-head projections are stored fused as [D, D] matrices; head h uses
/// columns [h*D_h, (h+1)*D_h).
template <class T>
class MhsaLayer {
 public:
  MhsaLayer() = default;
  MhsaLayer(Store<T>& store, const std::string& name, const ModelConfig& cfg)
      : heads_(cfg.n_heads),
        scaled_(cfg.scaled_logits),
        pe_(cfg.positional_encoding),
        residual_(cfg.mhsa_residual),
        norm_(cfg.mhsa_layer_norm) {
    const auto d = static_cast<std::size_t>(cfg.d_model);
    if (cfg.d_model % cfg.n_heads != 0) throw ConfigError("d_model not divisible by n_heads");
    wq_ = store.add(name + ".w_qry", Shape{d, d}, diff::InitSpec::uniform(d));
    wk_ = store.add(name + ".w_key", Shape{d, d}, diff::InitSpec::uniform(d));
    wv_ = store.add(name + ".w_val", Shape{d, d}, diff::InitSpec::uniform(d));
    wo_ = store.add(name + ".w_out", Shape{d, d}, diff::InitSpec::uniform(d));
    bo_ = store.add(name + ".b_out", Shape{d}, diff::InitSpec::uniform(d));
    if (norm_) {
      ln_g_ = store.add(name + ".ln.gamma", Shape{d}, diff::InitSpec::fill(1.0));
      ln_b_ = store.add(name + ".ln.beta", Shape{d}, diff::InitSpec::fill(0.0));
    }
  }

  /// x is [B, T, D]. `attention`, when given, receives [B, H, T, T].
  Tensor<T> operator()(const Tensor<T>& x, Tensor<T>* attention = nullptr) const {
    using namespace diff;
    const std::size_t B = x.dim(0), Tn = x.dim(1), D = x.dim(2);
    const std::size_t H = static_cast<std::size_t>(heads_), Dh = D / H;
    const Tensor<T> xp = pe_ ? add(x, positional_encoding<T>(Tn, D)) : x;
    auto split = [&](const Tensor<T>& y) {  // [B,T,D] -> [B,H,T,Dh]
      return permute(reshape(y, {B, Tn, H, Dh}), {0, 2, 1, 3});
    };
    const Tensor<T> q = split(matmul(xp, wq_));
    const Tensor<T> k = split(matmul(xp, wk_));
    const Tensor<T> v = split(matmul(x, wv_));
    Tensor<T> logits = matmul(q, transpose_last2(k));
    if (scaled_) logits = scale(logits, T(1) / std::sqrt(static_cast<T>(Dh)));
    const Tensor<T> a = softmax_lastdim(logits);
    if (attention) *attention = a;
    const Tensor<T> heads = reshape(permute(matmul(a, v), {0, 2, 1, 3}), {B, Tn, D});
    Tensor<T> y = linear(heads, wo_, bo_);
    if (residual_) y = add(x, y);
    if (norm_) y = layer_norm(y, ln_g_, ln_b_);
    return y;
  }

 private:
  int heads_ = 1;
  bool scaled_ = false, pe_ = true, residual_ = true, norm_ = true;
  Tensor<T> wq_, wk_, wv_, wo_, bo_, ln_g_, ln_b_;
};

template <class T>
class MhsaStack {
 public:
  MhsaStack() = default;
  MhsaStack(Store<T>& store, const std::string& name, const ModelConfig& cfg) {
    for (int l = 0; l < cfg.mhsa_layers; ++l)
      layers_.emplace_back(store, name + ".mhsa" + std::to_string(l + 1), cfg);
  }
  Tensor<T> operator()(const Tensor<T>& x, std::vector<Tensor<T>>* attention = nullptr) const {
    Tensor<T> h = x;
    for (const auto& layer : layers_) {
      Tensor<T> a;
      h = layer(h, attention ? &a : nullptr);
      if (attention) attention->push_back(a);
    }
    return h;
  }

 private:
  std::vector<MhsaLayer<T>> layers_;
};

template <class T>
struct LinearHead {
  Tensor<T> w, b;
  LinearHead() = default;
  LinearHead(Store<T>& store, const std::string& name, int in, int out) {
    const auto i = static_cast<std::size_t>(in), o = static_cast<std::size_t>(out);
    w = store.add(name + ".weight", Shape{i, o}, diff::InitSpec::uniform(i));
    b = store.add(name + ".bias", Shape{o}, diff::InitSpec::uniform(i));
  }
  Tensor<T> operator()(const Tensor<T>& x) const { return diff::linear(x, w, b); }
};

}  // namespace seld::model
