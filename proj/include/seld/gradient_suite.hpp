// seld/gradient_suite.hpp

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

// Finite-difference suite over the primitives, the model layers, the losses
// and whole tiny-model losses. Run by `seld gradcheck` and the acceptance
// binary. Every check is in double precision.

#pragma once

#include <random>
#include <string>
#include <vector>

#include "seld/data/foa.hpp"
#include "seld/diffcore/primitive_suite.hpp"
#include "seld/losses/pit.hpp"
#include "seld/losses/seldnet.hpp"
#include "seld/model/einv2.hpp"

namespace seld {

inline constexpr double kGradTolerance = 1e-4;

namespace detail {

inline std::vector<data::FrameEvents> random_events(std::mt19937_64& g, std::size_t clips,
                                                    std::size_t frames, int classes, int tracks) {
  std::vector<data::FrameEvents> out(clips, data::FrameEvents(frames));
  std::uniform_int_distribution<int> cls(0, classes - 1), az(-180, 179), el(-45, 45);
  for (auto& clip : out)
    for (int m = 0; m < tracks; ++m) {
      data::Event e{cls(g), m, static_cast<double>(az(g)), static_cast<double>(el(g))};
      for (auto& f : clip) {
        if (g() % 4 == 0) e = {cls(g), m, static_cast<double>(az(g)), static_cast<double>(el(g))};
        if (g() % 5 != 0) f.push_back(e);
      }
    }
  return out;
}

}  // namespace detail

/// Rows: every primitive, then attention, cross-stitch, MHSA, the losses and
/// tiny EINV2 losses in three sharing/format configurations. `model_coords`
/// bounds the parameter coordinates sampled per model row.
inline std::vector<diff::GradSuiteRow> gradient_suite(std::size_t trials = 3,
                                                      std::size_t model_coords = 400,
                                                      std::uint64_t seed = 2024) {
  using diff::Tensor;
  auto rows = diff::primitive_gradient_suite(trials, seed);
  std::mt19937_64 rng(mix_seed(seed, 7));
  auto run = [&](const std::string& name, std::size_t n,
                 const std::function<diff::GradCheckResult(std::uint64_t)>& one) {
    diff::GradSuiteRow row{name, 0, 0, 0, 0};
    for (std::size_t t = 0; t < n; ++t) {
      const auto r = one(rng());
      row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
      row.coords += r.coords_checked;
      row.kink_retries += r.kink_retries;
      ++row.trials;
    }
    rows.push_back(row);
  };

  run("self_attention", trials, [](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = diff::random_tensor({2, 5, 6}, g), wq = diff::random_tensor({6, 3}, g),
         wk = diff::random_tensor({6, 3}, g), wv = diff::random_tensor({6, 4}, g);
    const auto p = model::positional_encoding<double>(5, 6);
    return diff::grad_check([&] { return diff::contract(model::self_attention(x, p, wq, wk, wv), s); },
                            {x, wq, wk, wv});
  });
  run("cross_stitch", trials, [](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto a = diff::random_tensor({2, 3, 4, 2}, g), b = diff::random_tensor({2, 3, 4, 2}, g),
         al = diff::random_tensor({3, 2, 2}, g);
    return diff::grad_check(
        [&] {
          auto [p, q] = model::cross_stitch(a, b, al, 1);
          return diff::add(diff::contract(p, s), diff::contract(q, s + 1));
        },
        {a, b, al});
  });
  run("mhsa", trials, [](std::uint64_t s) {
    std::mt19937_64 g(s);
    model::ModelConfig c;
    c.d_model = 8;
    c.n_heads = 2;
    diff::ParameterStore<double> store(s);
    const model::MhsaLayer<double> layer(store, "m", c);
    auto x = diff::random_tensor({2, 5, 8}, g);
    std::vector<Tensor<double>> in{x};
    for (auto& [n, p] : store.params()) in.push_back(p.tensor);
    return diff::grad_check([&] { return diff::contract(layer(x), s); }, in);
  });
  run("sed_bce", trials, [](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto p = diff::random_tensor({6}, g, false, 0.05, 0.95);
    std::vector<double> y(6, 0.0);
    y[s % 6] = 1.0;
    return diff::grad_check([&] { return losses::sed_loss(p, y); }, {p});
  });
  run("doa_mse", trials, [](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto d = diff::random_tensor({3}, g);
    return diff::grad_check([&] { return losses::doa_loss(d, data::to_cartesian(30, 10), true); }, {d});
  });
  auto pit_row = [&](const char* name, losses::PitKind kind) {
    run(name, trials, [kind](std::uint64_t s) {
      std::mt19937_64 g(s);
      const std::size_t B = 2, T = 6, M = 3, K = 4;
      auto sed = diff::random_tensor({B, T, M, K}, g, false, 0.05, 0.95);
      auto doa = diff::random_tensor({B, T, M, 3}, g, false, -0.9, 0.9);
      const auto y = losses::track_targets(detail::random_events(g, B, T, K, static_cast<int>(M)), T, M, K);
      return diff::grad_check([&] { return losses::pit_loss(kind, sed, doa, y, 0.7); }, {sed, doa});
    });
  };
  pit_row("tpit_loss", losses::PitKind::tpit);
  pit_row("cpit_loss", losses::PitKind::cpit);
  run("seldnet_loss", trials, [](std::uint64_t s) {
    std::mt19937_64 g(s);
    const std::size_t B = 2, T = 5, K = 4;
    auto sed = diff::random_tensor({B, T, K}, g, false, 0.05, 0.95);
    auto doa = diff::random_tensor({B, T, K, 3}, g, false, -0.9, 0.9);
    const auto y = losses::class_targets(detail::random_events(g, B, T, K, 2), T, K);
    return diff::grad_check([&] { return losses::seldnet_loss(sed, doa, y); }, {sed, doa});
  });

  auto model_row = [&](const std::string& name, model::PsMode ps, model::OutputFormat fmt) {
    run(name, 1, [&, ps, fmt](std::uint64_t s) {
      std::mt19937_64 g(s);
      model::Einv2<double> net(model::tiny_config(ps, fmt), s);
      auto& store = net.parameters();
      const auto si = diff::random_tensor({2, 4, 16, 32}, g), di = diff::random_tensor({2, 7, 16, 32}, g);
      const auto labels = detail::random_events(g, 2, 4, data::kNumClasses, 2);
      const auto K = static_cast<std::size_t>(net.config().n_classes);
      std::vector<Tensor<double>> in;
      for (auto& [n, p] : store.params())
        if (p.tensor.requires_grad()) in.push_back(p.tensor);
      return diff::grad_check(
          [&] {
            const auto o = net.forward(si, di, diff::Mode::train);
            if (fmt == model::OutputFormat::trackwise)
              return losses::tpit_loss(o.sed, o.doa, losses::track_targets(labels, 4, 2, K));
            return losses::seldnet_loss(o.sed, o.doa, losses::class_targets(labels, 4, K));
          },
          in, 1e-5, model_coords, s, kGradTolerance);
    });
  };
  model_row("einv2_soft_trackwise_tpit", model::PsMode::soft, model::OutputFormat::trackwise);
  model_row("einv2_hard_trackwise_tpit", model::PsMode::hard, model::OutputFormat::trackwise);
  model_row("einv2_none_seldnet", model::PsMode::none, model::OutputFormat::seldnet);
  return rows;
}

}  // namespace seld
