// seld/losses/pit.hpp

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

// Track-wise SED/DoA losses and their permutation-invariant combination.
//
// For a frame, pred track m paired with label track l costs
//   c(m, l) = BCE(sed_m, y_l) + beta * [active_l] * MSE(doa_m, d_l)
// where BCE and MSE are means over classes and over xyz. A permutation
// alpha costs sum_m c(m, alpha(m)). tPIT picks the cheapest permutation per
// frame, cPIT per chunk (run of frames with an unchanged set of active
// label events). Both return the mean over all frames of the batch.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "seld/assignment.hpp"
#include "seld/data/labels.hpp"
#include "seld/diffcore/ops.hpp"

namespace seld::losses {

using diff::Shape;
using diff::Tensor;

inline constexpr double kProbClamp = 1e-7;

/// Ground truth laid out per (batch, frame, label track).
struct TrackTargets {
  std::size_t batch = 0, frames = 0, tracks = 0, classes = 0;
  std::vector<int> cls;        // [B,T,M], -1 where inactive
  std::vector<double> doa;     // [B,T,M,3], zero where inactive

  TrackTargets() = default;
  TrackTargets(std::size_t b, std::size_t t, std::size_t m, std::size_t k)
      : batch(b), frames(t), tracks(m), classes(k), cls(b * t * m, -1), doa(b * t * m * 3, 0.0) {}

  std::size_t index(std::size_t b, std::size_t t, std::size_t l) const {
    return (b * frames + t) * tracks + l;
  }
  bool active(std::size_t b, std::size_t t, std::size_t l) const { return cls[index(b, t, l)] >= 0; }
  void set(std::size_t b, std::size_t t, std::size_t l, int k, const data::Vec3& d) {
    const std::size_t i = index(b, t, l);
    cls[i] = k;
    for (int j = 0; j < 3; ++j) doa[i * 3 + j] = d[j];
  }
  void clear(std::size_t b, std::size_t t, std::size_t l) {
    const std::size_t i = index(b, t, l);
    cls[i] = -1;
    for (int j = 0; j < 3; ++j) doa[i * 3 + j] = 0;
  }
};

/// Builds targets from per-clip event lists; an event lands on its own
/// track id, which must be below `tracks`.
inline TrackTargets track_targets(const std::vector<data::FrameEvents>& clips, std::size_t frames,
                                  std::size_t tracks, std::size_t classes) {
  TrackTargets y(clips.size(), frames, tracks, classes);
  for (std::size_t b = 0; b < clips.size(); ++b) {
    if (clips[b].size() != frames)
      throw DimensionError("track_targets: clip " + std::to_string(b) + " has " +
                           std::to_string(clips[b].size()) + " frames, expected " +
                           std::to_string(frames));
    for (std::size_t t = 0; t < frames; ++t)
      for (const auto& e : clips[b][t]) {
        if (e.track < 0 || static_cast<std::size_t>(e.track) >= tracks)
          throw ContractError("track_targets: track id " + std::to_string(e.track) +
                              " outside [0," + std::to_string(tracks) + ")");
        if (e.cls < 0 || static_cast<std::size_t>(e.cls) >= classes)
          throw ContractError("track_targets: class " + std::to_string(e.cls) + " out of range");
        if (y.active(b, t, static_cast<std::size_t>(e.track)))
          throw ContractError("track_targets: two events on track " + std::to_string(e.track) +
                              " at frame " + std::to_string(t));
        y.set(b, t, static_cast<std::size_t>(e.track), e.cls, e.direction());
      }
  }
  return y;
}

namespace detail {

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

// BCE of K probabilities against the one-hot (or all-zero when cls < 0) target.
template <class T>
double bce_onehot(const T* p, std::size_t K, int cls) {
  double s = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const double q = clamp_prob(static_cast<double>(p[k]));
    s -= static_cast<int>(k) == cls ? std::log(q) : std::log1p(-q);
  }
  return s / static_cast<double>(K);
}

template <class T>
double mse3(const T* p, const double* y) {
  double s = 0;
  for (int j = 0; j < 3; ++j) {
    const double e = static_cast<double>(p[j]) - y[j];
    s += e * e;
  }
  return s / 3.0;
}

inline void check_track_shapes(const Shape& sed, const Shape& doa, const TrackTargets& y) {
  const Shape want_sed{y.batch, y.frames, y.tracks, y.classes};
  const Shape want_doa{y.batch, y.frames, y.tracks, 3};
  if (sed != want_sed || doa != want_doa)
    throw DimensionError("pit loss: predictions " + diff::to_string(sed) + " / " +
                         diff::to_string(doa) + " do not match targets " +
                         diff::to_string(want_sed) + " / " + diff::to_string(want_doa));
}

}  // namespace detail

/// Mean BCE over classes against a target vector in [0,1]; predictions are
/// clamped to [1e-7, 1-1e-7], with zero gradient where the clamp is active.
template <class T>
Tensor<T> sed_loss(const Tensor<T>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size())
    throw DimensionError("sed_loss: prediction has " + std::to_string(pred.size()) +
                         " classes, target " + std::to_string(target.size()));
  const std::size_t K = pred.size();
  double s = 0;
  auto pv = pred.data();
  for (std::size_t k = 0; k < K; ++k) {
    const double q = detail::clamp_prob(static_cast<double>(pv[k]));
    s -= target[k] * std::log(q) + (1 - target[k]) * std::log1p(-q);
  }
  Tensor<T> out(Shape{1}, static_cast<T>(s / static_cast<double>(K)));
  if (diff::detail::recording<T>({&pred})) {
    auto pp = pred.impl(), po = out.impl();
    diff::detail::attach<T>("sed_loss", out, {&pred}, [pp, po, target, K]() {
      auto& g = pp->grad_buffer();
      const double go = static_cast<double>(po->grad[0]) / static_cast<double>(K);
      for (std::size_t k = 0; k < K; ++k) {
        const double p = static_cast<double>(pp->value[k]);
        if (p <= kProbClamp || p >= 1 - kProbClamp) continue;
        g[k] += static_cast<T>(go * (p - target[k]) / (p * (1 - p)));
      }
    });
  }
  return out;
}

/// Mean squared error over xyz, zero (with zero gradient) when inactive.
template <class T>
Tensor<T> doa_loss(const Tensor<T>& pred, const data::Vec3& target, bool active) {
  if (pred.size() != 3)
    throw DimensionError("doa_loss: prediction must have 3 components, got " +
                         diff::to_string(pred.shape()));
  const double s = active ? detail::mse3(pred.data().data(), target.data()) : 0.0;
  Tensor<T> out(Shape{1}, static_cast<T>(s));
  if (active && diff::detail::recording<T>({&pred})) {
    auto pp = pred.impl(), po = out.impl();
    diff::detail::attach<T>("doa_loss", out, {&pred}, [pp, po, target]() {
      auto& g = pp->grad_buffer();
      const double go = static_cast<double>(po->grad[0]);
      for (int j = 0; j < 3; ++j)
        g[j] += static_cast<T>(go * 2.0 * (static_cast<double>(pp->value[j]) - target[j]) / 3.0);
    });
  }
  return out;
}

/// Pair costs c(m, l) for every frame as a row-major [B,T,M,M] array
/// (values only, nothing is recorded).
template <class T>
std::vector<double> pairwise_costs(const Tensor<T>& sed, const Tensor<T>& doa,
                                   const TrackTargets& y, double beta = 1.0) {
  detail::check_track_shapes(sed.shape(), doa.shape(), y);
  const std::size_t M = y.tracks, K = y.classes, frames = y.batch * y.frames;
  std::vector<double> c(frames * M * M);
  auto sv = sed.data(), dv = doa.data();
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t l = 0; l < M; ++l) {
        const std::size_t pm = f * M + m, yl = f * M + l;
        double v = detail::bce_onehot(sv.data() + pm * K, K, y.cls[yl]);
        if (y.cls[yl] >= 0) v += beta * detail::mse3(dv.data() + pm * 3, y.doa.data() + yl * 3);
        c[(f * M + m) * M + l] = v;
      }
  return c;
}

/// Loss under a fixed assignment: assign[(b*T + t)*M + m] is the label track
/// paired with prediction track m. Returns the mean over B*T frames of the
/// summed pair costs; gradients flow through the given pairs only.
template <class T>
Tensor<T> assigned_loss(const Tensor<T>& sed, const Tensor<T>& doa, const TrackTargets& y,
                        const std::vector<int>& assign, double beta = 1.0) {
  detail::check_track_shapes(sed.shape(), doa.shape(), y);
  const std::size_t M = y.tracks, K = y.classes, frames = y.batch * y.frames;
  if (assign.size() != frames * M)
    throw DimensionError("assigned_loss: assignment has " + std::to_string(assign.size()) +
                         " entries, expected " + std::to_string(frames * M));
  auto sv = sed.data(), dv = doa.data();
  double total = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    double frame = 0;
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t pm = f * M + m, yl = f * M + static_cast<std::size_t>(assign[pm]);
      double v = detail::bce_onehot(sv.data() + pm * K, K, y.cls[yl]);
      if (y.cls[yl] >= 0) v += beta * detail::mse3(dv.data() + pm * 3, y.doa.data() + yl * 3);
      frame += v;
    }
    total += frame;
  }
  Tensor<T> out(Shape{1}, static_cast<T>(total / static_cast<double>(frames)));
  if (diff::detail::recording<T>({&sed, &doa})) {
    auto ps = sed.impl(), pd = doa.impl(), po = out.impl();
    diff::detail::attach<T>("pit_loss", out, {&sed, &doa},
                            [ps, pd, po, y, assign, beta, M, K, frames]() {
      const double go = static_cast<double>(po->grad[0]) / static_cast<double>(frames);
      if (ps->requires_grad) {
        auto& g = ps->grad_buffer();
        const double gk = go / static_cast<double>(K);
        for (std::size_t pm = 0; pm < frames * M; ++pm) {
          const int cls = y.cls[(pm / M) * M + static_cast<std::size_t>(assign[pm])];
          for (std::size_t k = 0; k < K; ++k) {
            const double p = static_cast<double>(ps->value[pm * K + k]);
            if (p <= kProbClamp || p >= 1 - kProbClamp) continue;
            const double t = static_cast<int>(k) == cls ? 1.0 : 0.0;
            g[pm * K + k] += static_cast<T>(gk * (p - t) / (p * (1 - p)));
          }
        }
      }
      if (pd->requires_grad) {
        auto& g = pd->grad_buffer();
        const double gd = go * beta * 2.0 / 3.0;
        for (std::size_t pm = 0; pm < frames * M; ++pm) {
          const std::size_t yl = (pm / M) * M + static_cast<std::size_t>(assign[pm]);
          if (y.cls[yl] < 0) continue;
          for (int j = 0; j < 3; ++j)
            g[pm * 3 + j] += static_cast<T>(
                gd * (static_cast<double>(pd->value[pm * 3 + j]) - y.doa[yl * 3 + j]));
        }
      }
    });
  }
  return out;
}

// ----------------------------------------------------------------- chunks

struct Chunk {
  std::size_t begin = 0, end = 0;  // frames [begin, end)
};

/// Splits clip b into runs of frames whose active (track, class) set is
/// unchanged. A silent clip is one chunk.
inline std::vector<Chunk> chunk_segmentation(const TrackTargets& y, std::size_t b) {
  std::vector<Chunk> out;
  if (y.frames == 0) return out;
  auto same = [&](std::size_t t0, std::size_t t1) {
    for (std::size_t l = 0; l < y.tracks; ++l)
      if (y.cls[y.index(b, t0, l)] != y.cls[y.index(b, t1, l)]) return false;
    return true;
  };
  std::size_t start = 0;
  for (std::size_t t = 1; t < y.frames; ++t)
    if (!same(t - 1, t)) {
      out.push_back({start, t});
      start = t;
    }
  out.push_back({start, y.frames});
  return out;
}

inline std::vector<std::vector<Chunk>> chunk_segmentation(const TrackTargets& y) {
  std::vector<std::vector<Chunk>> out;
  for (std::size_t b = 0; b < y.batch; ++b) out.push_back(chunk_segmentation(y, b));
  return out;
}

// -------------------------------------------------------------------- PIT

/// Per-frame minimizing assignment (lexicographic tie-break).
inline std::vector<int> tpit_assignment(const std::vector<double>& costs, std::size_t frames,
                                        std::size_t M) {
  std::vector<int> assign(frames * M);
  for (std::size_t f = 0; f < frames; ++f) {
    const auto p = min_cost_permutation(std::span(costs).subspan(f * M * M, M * M), M);
    std::copy(p.begin(), p.end(), assign.begin() + static_cast<std::ptrdiff_t>(f * M));
  }
  return assign;
}

/// Per-chunk minimizing assignment, applied to every frame of the chunk.
inline std::vector<int> cpit_assignment(const std::vector<double>& costs, const TrackTargets& y,
                                        const std::vector<std::vector<Chunk>>& chunks) {
  const std::size_t M = y.tracks;
  if (chunks.size() != y.batch)
    throw DimensionError("cpit: chunk lists for " + std::to_string(chunks.size()) +
                         " clips, batch is " + std::to_string(y.batch));
  std::vector<int> assign(y.batch * y.frames * M, -1);
  std::vector<double> sum(M * M);
  for (std::size_t b = 0; b < y.batch; ++b) {
    std::size_t covered = 0;
    for (const auto& ch : chunks[b]) {
      if (ch.begin != covered || ch.end <= ch.begin || ch.end > y.frames)
        throw ContractError("cpit: chunks of clip " + std::to_string(b) +
                            " do not partition its frames");
      covered = ch.end;
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::size_t t = ch.begin; t < ch.end; ++t) {
        const std::size_t f = b * y.frames + t;
        for (std::size_t i = 0; i < M * M; ++i) sum[i] += costs[f * M * M + i];
      }
      const auto p = min_cost_permutation(sum, M);
      for (std::size_t t = ch.begin; t < ch.end; ++t)
        std::copy(p.begin(), p.end(),
                  assign.begin() + static_cast<std::ptrdiff_t>((b * y.frames + t) * M));
    }
    if (covered != y.frames)
      throw ContractError("cpit: chunks of clip " + std::to_string(b) + " stop at frame " +
                          std::to_string(covered) + " of " + std::to_string(y.frames));
  }
  return assign;
}

template <class T>
Tensor<T> tpit_loss(const Tensor<T>& sed, const Tensor<T>& doa, const TrackTargets& y,
                    double beta = 1.0) {
  const auto c = pairwise_costs(sed, doa, y, beta);
  return assigned_loss(sed, doa, y, tpit_assignment(c, y.batch * y.frames, y.tracks), beta);
}

template <class T>
Tensor<T> cpit_loss(const Tensor<T>& sed, const Tensor<T>& doa, const TrackTargets& y,
                    const std::vector<std::vector<Chunk>>& chunks, double beta = 1.0) {
  const auto c = pairwise_costs(sed, doa, y, beta);
  return assigned_loss(sed, doa, y, cpit_assignment(c, y, chunks), beta);
}

template <class T>
Tensor<T> cpit_loss(const Tensor<T>& sed, const Tensor<T>& doa, const TrackTargets& y,
                    double beta = 1.0) {
  return cpit_loss(sed, doa, y, chunk_segmentation(y), beta);
}

enum class PitKind { tpit, cpit };

inline std::string to_string(PitKind k) { return k == PitKind::tpit ? "tPIT" : "cPIT"; }

inline PitKind parse_pit_kind(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "tpit") return PitKind::tpit;
  if (s == "cpit") return PitKind::cpit;
  throw ConfigError("loss must be tPIT or cPIT (got '" + s + "')");
}

template <class T>
Tensor<T> pit_loss(PitKind kind, const Tensor<T>& sed, const Tensor<T>& doa,
                   const TrackTargets& y, double beta = 1.0) {
  return kind == PitKind::tpit ? tpit_loss(sed, doa, y, beta) : cpit_loss(sed, doa, y, beta);
}

}  // namespace seld::losses
