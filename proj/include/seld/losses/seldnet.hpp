// seld/losses/seldnet.hpp

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

// Class-wise loss for the SELDnet output format: per frame, the mean BCE
// over K classes against the multi-hot target plus beta times the summed
// xyz-MSE of every active class. No permutation is involved.

#pragma once

#include <string>
#include <vector>

#include "seld/losses/pit.hpp"

namespace seld::losses {

struct ClassTargets {
  std::size_t batch = 0, frames = 0, classes = 0;
  std::vector<char> active;  // [B,T,K]
  std::vector<double> doa;   // [B,T,K,3]

  ClassTargets() = default;
  ClassTargets(std::size_t b, std::size_t t, std::size_t k)
      : batch(b), frames(t), classes(k), active(b * t * k, 0), doa(b * t * k * 3, 0.0) {}
  std::size_t index(std::size_t b, std::size_t t, std::size_t k) const {
    return (b * frames + t) * classes + k;
  }
};

/// When two events of the same class overlap, the lower track id supplies
/// the class DoA target.
inline ClassTargets class_targets(const std::vector<data::FrameEvents>& clips, std::size_t frames,
                                  std::size_t classes) {
  ClassTargets y(clips.size(), frames, classes);
  for (std::size_t b = 0; b < clips.size(); ++b) {
    if (clips[b].size() != frames)
      throw DimensionError("class_targets: clip " + std::to_string(b) + " has " +
                           std::to_string(clips[b].size()) + " frames, expected " +
                           std::to_string(frames));
    for (std::size_t t = 0; t < frames; ++t) {
      std::vector<int> owner(classes, -1);
      for (const auto& e : clips[b][t]) {
        if (e.cls < 0 || static_cast<std::size_t>(e.cls) >= classes)
          throw ContractError("class_targets: class " + std::to_string(e.cls) + " out of range");
        const auto k = static_cast<std::size_t>(e.cls);
        if (owner[k] >= 0 && owner[k] < e.track) continue;
        owner[k] = e.track;
        const std::size_t i = y.index(b, t, k);
        y.active[i] = 1;
        const auto d = e.direction();
        for (int j = 0; j < 3; ++j) y.doa[i * 3 + j] = d[j];
      }
    }
  }
  return y;
}

/// sed [B,T,K], doa [B,T,K,3]; mean over B*T frames.
template <class T>
Tensor<T> seldnet_loss(const Tensor<T>& sed, const Tensor<T>& doa, const ClassTargets& y,
                       double beta = 1.0) {
  const Shape ws{y.batch, y.frames, y.classes}, wd{y.batch, y.frames, y.classes, 3};
  if (sed.shape() != ws || doa.shape() != wd)
    throw DimensionError("seldnet_loss: predictions " + diff::to_string(sed.shape()) + " / " +
                         diff::to_string(doa.shape()) + " do not match targets " +
                         diff::to_string(ws) + " / " + diff::to_string(wd));
  const std::size_t K = y.classes, frames = y.batch * y.frames;
  auto sv = sed.data(), dv = doa.data();
  double total = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    double bce = 0, mse = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const std::size_t i = f * K + k;
      const double q = detail::clamp_prob(static_cast<double>(sv[i]));
      bce -= y.active[i] ? std::log(q) : std::log1p(-q);
      if (y.active[i]) mse += detail::mse3(dv.data() + i * 3, y.doa.data() + i * 3);
    }
    total += bce / static_cast<double>(K) + beta * mse;
  }
  Tensor<T> out(Shape{1}, static_cast<T>(total / static_cast<double>(frames)));
  if (diff::detail::recording<T>({&sed, &doa})) {
    auto ps = sed.impl(), pd = doa.impl(), po = out.impl();
    diff::detail::attach<T>("seldnet_loss", out, {&sed, &doa}, [ps, pd, po, y, beta, K, frames]() {
      const double go = static_cast<double>(po->grad[0]) / static_cast<double>(frames);
      const std::size_t n = frames * K;
      if (ps->requires_grad) {
        auto& g = ps->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          const double p = static_cast<double>(ps->value[i]);
          if (p <= kProbClamp || p >= 1 - kProbClamp) continue;
          const double t = y.active[i] ? 1.0 : 0.0;
          g[i] += static_cast<T>(go / static_cast<double>(K) * (p - t) / (p * (1 - p)));
        }
      }
      if (pd->requires_grad) {
        auto& g = pd->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          if (!y.active[i]) continue;
          for (int j = 0; j < 3; ++j)
            g[i * 3 + j] += static_cast<T>(
                go * beta * 2.0 / 3.0 * (static_cast<double>(pd->value[i * 3 + j]) - y.doa[i * 3 + j]));
        }
      }
    });
  }
  return out;
}

}  // namespace seld::losses
