// seld/model/einv2.hpp

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

// The dual-branch network.
//
//   sed [B,4,T,F] --conv blocks 1..4--> mean over F --> [B,T/4,D]
//   doa [B,7,T,F] --conv blocks 1..4--> mean over F --> [B,T/4,D]
//
// ps_mode soft puts a cross-stitch unit after blocks 1-3 and one between the
// SED and DoA MHSA outputs of every track; none keeps the branches apart;
// hard runs a single conv stack on the 7-channel DoA input and feeds its
// output to both tasks. Each track has its own MHSA stacks and FC heads.
//
// Trackwise output: sed [B,T',M,K] (sigmoid), doa [B,T',M,3] (tanh).
// SELDnet output:   sed [B,T',K],   doa [B,T',K,3].

#pragma once

#include <array>
#include <string>
#include <vector>

#include "seld/model/layers.hpp"

namespace seld::model {

template <class T>
struct ModelOutput {
  Tensor<T> sed;
  Tensor<T> doa;
  // Attention weights per MHSA layer, filled when requested.
  std::vector<Tensor<T>> attention;
};

template <class T>
class Einv2 {
 public:
  explicit Einv2(ModelConfig cfg, std::uint64_t seed = 0) : cfg_(cfg), store_(seed) {
    cfg_.validate();
    build();
  }
  Einv2(const Einv2&) = delete;
  Einv2& operator=(const Einv2&) = delete;
  Einv2(Einv2&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  diff::ParameterStore<T>& parameters() { return store_; }
  const diff::ParameterStore<T>& parameters() const { return store_; }

  /// sed_in [B,4,T,F], doa_in [B,7,T,F]; T divisible by 4 and F by 16
  /// under the default pooling schedule.
  ModelOutput<T> forward(const Tensor<T>& sed_in, const Tensor<T>& doa_in, Mode mode,
                         bool keep_attention = false) const {
    check_inputs(sed_in, doa_in);
    ModelOutput<T> out;
    std::vector<Tensor<T>>* att = keep_attention ? &out.attention : nullptr;

    Tensor<T> hs, hd;
    if (cfg_.ps_mode == PsMode::hard) {
      Tensor<T> h = doa_in;
      for (int b = 0; b < 4; ++b) h = shared_[b](h, mode);
      hs = hd = to_sequence(h);
    } else {
      Tensor<T> s = sed_in, d = doa_in;
      for (int b = 0; b < 4; ++b) {
        s = sed_blocks_[b](s, mode);
        d = doa_blocks_[b](d, mode);
        if (cfg_.ps_mode == PsMode::soft && b < 3)
          std::tie(s, d) = cross_stitch(s, d, conv_stitch_[b], 1);
      }
      hs = to_sequence(s);
      hd = to_sequence(d);
    }

    const std::size_t B = sed_in.dim(0), To = hs.dim(1);
    const auto K = static_cast<std::size_t>(cfg_.n_classes);
    if (cfg_.output_format == OutputFormat::seldnet) {
      Tensor<T> ys = sed_mhsa_[0](hs, att), yd = doa_mhsa_[0](hd, att);
      if (cfg_.ps_mode == PsMode::soft) std::tie(ys, yd) = cross_stitch(ys, yd, track_stitch_[0], -1);
      out.sed = diff::sigmoid(sed_fc_[0](ys));
      out.doa = diff::reshape(diff::tanh(doa_fc_[0](yd)), {B, To, K, 3});
      return out;
    }
    std::vector<Tensor<T>> sed_tracks, doa_tracks;
    for (int m = 0; m < cfg_.n_tracks; ++m) {
      Tensor<T> ys = sed_mhsa_[m](hs, att), yd = doa_mhsa_[m](hd, att);
      if (cfg_.ps_mode == PsMode::soft) std::tie(ys, yd) = cross_stitch(ys, yd, track_stitch_[m], -1);
      sed_tracks.push_back(diff::reshape(diff::sigmoid(sed_fc_[m](ys)), {B, To, 1, K}));
      doa_tracks.push_back(diff::reshape(diff::tanh(doa_fc_[m](yd)), {B, To, 1, 3}));
    }
    out.sed = diff::concat(sed_tracks, 2);
    out.doa = diff::concat(doa_tracks, 2);
    return out;
  }

 private:
  void build() {
    const auto& c = cfg_;
    auto blocks = [&](std::array<ConvBlock<T>, 4>& dst, const std::string& prefix, int in) {
      for (int b = 0; b < 4; ++b) {
        dst[b] = ConvBlock<T>(store_, prefix + ".block" + std::to_string(b + 1),
                              b == 0 ? in : c.width(b - 1), c.width(b), c.pools[b]);
      }
    };
    if (c.ps_mode == PsMode::hard) {
      blocks(shared_, "shared", c.doa_in_channels);
    } else {
      blocks(sed_blocks_, "sed", c.sed_in_channels);
      blocks(doa_blocks_, "doa", c.doa_in_channels);
      if (c.ps_mode == PsMode::soft)
        for (int b = 0; b < 3; ++b)
          conv_stitch_[b] = add_stitch(store_, "stitch.block" + std::to_string(b + 1), c.width(b), c);
    }
    const bool trackwise = c.output_format == OutputFormat::trackwise;
    const int heads = trackwise ? c.n_tracks : 1;
    for (int m = 0; m < heads; ++m) {
      const std::string t = trackwise ? ".track" + std::to_string(m + 1) : "";
      sed_mhsa_.emplace_back(store_, "sed" + t, c);
      doa_mhsa_.emplace_back(store_, "doa" + t, c);
      if (c.ps_mode == PsMode::soft)
        track_stitch_.push_back(add_stitch(store_, "stitch" + (trackwise ? t : ".heads"), c.d_model, c));
      sed_fc_.emplace_back(store_, "sed" + t + ".fc", c.d_model, c.n_classes);
      doa_fc_.emplace_back(store_, "doa" + t + ".fc", c.d_model, trackwise ? 3 : 3 * c.n_classes);
    }
  }

  // [B,C,T,F] -> mean over F -> [B,T,C]
  static Tensor<T> to_sequence(const Tensor<T>& h) {
    return diff::permute(diff::mean_axis(h, 3), {0, 2, 1});
  }

  void check_inputs(const Tensor<T>& s, const Tensor<T>& d) const {
    if (s.ndim() != 4 || d.ndim() != 4)
      throw ConfigError("model inputs must be [B,C,T,F], got " + diff::to_string(s.shape()) +
                        " and " + diff::to_string(d.shape()));
    if (s.dim(1) != static_cast<std::size_t>(cfg_.sed_in_channels) ||
        d.dim(1) != static_cast<std::size_t>(cfg_.doa_in_channels))
      throw ConfigError("model expects " + std::to_string(cfg_.sed_in_channels) + " SED and " +
                        std::to_string(cfg_.doa_in_channels) + " DoA input channels, got " +
                        diff::to_string(s.shape()) + " and " + diff::to_string(d.shape()));
    if (s.dim(0) != d.dim(0) || s.dim(2) != d.dim(2) || s.dim(3) != d.dim(3))
      throw ConfigError("SED and DoA inputs disagree: " + diff::to_string(s.shape()) + " vs " +
                        diff::to_string(d.shape()));
    if (s.dim(2) % static_cast<std::size_t>(cfg_.time_pool()) != 0 ||
        s.dim(3) % static_cast<std::size_t>(cfg_.freq_pool()) != 0)
      throw ConfigError("input [T,F] = [" + std::to_string(s.dim(2)) + "," +
                        std::to_string(s.dim(3)) + "] not divisible by the pooling schedule (" +
                        std::to_string(cfg_.time_pool()) + "," + std::to_string(cfg_.freq_pool()) +
                        ")");
  }

  ModelConfig cfg_;
  diff::ParameterStore<T> store_;
  std::array<ConvBlock<T>, 4> sed_blocks_, doa_blocks_, shared_;
  std::array<Tensor<T>, 3> conv_stitch_;
  std::vector<MhsaStack<T>> sed_mhsa_, doa_mhsa_;
  std::vector<Tensor<T>> track_stitch_;
  std::vector<LinearHead<T>> sed_fc_, doa_fc_;
};

}  // namespace seld::model
