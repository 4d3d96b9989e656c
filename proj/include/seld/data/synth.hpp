// seld/data/synth.hpp

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

// Synthetic FOA scenes with static point sources on the 100 ms label grid.
//
// Class k sounds like a harmonic stack at f0 = 220 * 2^(k/7) Hz (amplitudes
// 1/h) plus a noise band of 16 random-phase sinusoids within +-100 Hz of
// 500 + 400k Hz. Events start on label-frame boundaries, so the labels are
// exact. Diffuse noise is white Gaussian on W only.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "seld/data/foa.hpp"

namespace seld::data {

inline constexpr double kEventRms = 0.05;
inline constexpr int kLabelFramesPerSecond = kSampleRate / kLabelHopSamples;

struct SceneSpec {
  int n_clips = 10;
  double clip_seconds = 60.0;
  int n_classes = kNumClasses;
  int max_polyphony = 2;
  double min_duration = 0.5;  // seconds
  double max_duration = 4.0;
  double event_rate = 0.5;  // onsets per second
  double snr_lo = 10.0;     // dB, event RMS over W-channel noise RMS
  double snr_hi = 30.0;
  int azimuth_lo = -180, azimuth_hi = 179;  // inclusive integer degrees
  int elevation_lo = -45, elevation_hi = 45;
  // Linear source motion in degrees of azimuth per second. Only 0 (static)
  // is implemented.
  double azimuth_velocity = 0.0;
  std::uint64_t seed = 1;

  int frames_per_clip() const {
    return static_cast<int>(std::lround(clip_seconds * kLabelFramesPerSecond));
  }
};

/// One placed event: `n_frames` label frames starting at `onset_frame`.
struct SceneEvent {
  int cls = 0;
  int onset_frame = 0;
  int n_frames = 0;
  int azimuth = 0;
  int elevation = 0;
  int track = 0;
};

inline double class_f0(int k) { return 220.0 * std::pow(2.0, k / 7.0); }
inline double class_band_center(int k) { return 500.0 + 400.0 * k; }

/// Mono signature of class k, `n` samples, normalized to kEventRms with
/// 5 ms linear fades.
inline std::vector<float> class_signature(int k, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> band(-100.0, 100.0);
  struct Partial {
    double freq, amp, phase;
  };
  std::vector<Partial> parts;
  const double f0 = class_f0(k);
  for (int h = 1; h <= 8 && h * f0 < 0.45 * kSampleRate; ++h)
    parts.push_back({h * f0, 1.0 / h, phase(rng)});
  const double fc = class_band_center(k);
  for (int i = 0; i < 16; ++i) {
    const double f = fc + band(rng);
    parts.push_back({f, 0.25, phase(rng)});
  }
  std::vector<double> s(n, 0.0);
  const double w = 2.0 * std::numbers::pi / kSampleRate;
  for (const auto& p : parts)
    for (std::size_t i = 0; i < n; ++i) s[i] += p.amp * std::sin(w * p.freq * i + p.phase);
  const std::size_t fade = std::min<std::size_t>(kSampleRate / 200, n / 2);
  for (std::size_t i = 0; i < fade; ++i) {
    const double g = static_cast<double>(i) / fade;
    s[i] *= g;
    s[n - 1 - i] *= g;
  }
  double e = 0;
  for (double v : s) e += v * v;
  const double gain = n > 0 && e > 0 ? kEventRms / std::sqrt(e / n) : 0.0;
  std::vector<float> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<float>(s[i] * gain);
  return out;
}

/// Label rows of the given events (one per active frame), frames < n_frames.
inline std::vector<LabelRow> event_labels(const std::vector<SceneEvent>& events, int n_frames) {
  std::vector<LabelRow> rows;
  for (const auto& e : events)
    for (int f = e.onset_frame; f < std::min(e.onset_frame + e.n_frames, n_frames); ++f)
      rows.push_back({f, e.cls, e.track, e.azimuth, e.elevation});
  std::sort(rows.begin(), rows.end(), [](const LabelRow& a, const LabelRow& b) {
    return std::tie(a.frame, a.track) < std::tie(b.frame, b.track);
  });
  return rows;
}

/// Renders explicit events into an FOA clip of `n_frames` label frames.
/// `snr_db` < 0 disables the diffuse noise.
inline FoaClip render_scene(const std::vector<SceneEvent>& events, int n_frames,
                            std::uint64_t seed, double snr_db = -1.0, std::string id = "clip") {
  FoaClip clip;
  clip.id = std::move(id);
  clip.n_frames = n_frames;
  const std::size_t n = static_cast<std::size_t>(n_frames) * kLabelHopSamples;
  for (auto& ch : clip.audio) ch.assign(n, 0.0f);
  std::mt19937_64 rng(seed);
  for (const auto& e : events) {
    if (e.onset_frame < 0 || e.n_frames <= 0 || e.onset_frame >= n_frames)
      throw ContractError("render_scene: event outside the clip");
    if (e.cls < 0 || e.cls >= kNumClasses) throw ContractError("render_scene: bad class index");
    const int end = std::min(e.onset_frame + e.n_frames, n_frames);
    const std::size_t len = static_cast<std::size_t>(end - e.onset_frame) * kLabelHopSamples;
    const std::size_t off = static_cast<std::size_t>(e.onset_frame) * kLabelHopSamples;
    const auto mono = class_signature(e.cls, len, rng);
    const auto foa = foa_encode(mono, e.azimuth, e.elevation);
    for (std::size_t c = 0; c < 4; ++c)
      for (std::size_t i = 0; i < len; ++i) clip.audio[c][off + i] += foa[c][i];
  }
  if (snr_db >= 0.0 && !events.empty()) {
    std::normal_distribution<double> gauss(0.0, kEventRms / std::pow(10.0, snr_db / 20.0));
    for (auto& v : clip.audio[0]) v += static_cast<float>(gauss(rng));
  }
  clip.labels = event_labels(events, n_frames);
  return clip;
}

struct PlacementResult {
  std::vector<SceneEvent> events;
  int attempts = 0;
  int rejected = 0;
};

/// Poisson onsets on the frame grid; an event that would push polyphony past
/// the cap is dropped. Track ids are first-free over the event's span.
inline PlacementResult place_events(const SceneSpec& spec, std::mt19937_64& rng) {
  PlacementResult r;
  const int n_frames = spec.frames_per_clip();
  if (spec.event_rate <= 0.0) return r;
  std::exponential_distribution<double> gap(spec.event_rate);
  const int dmin = std::max(1, static_cast<int>(std::lround(spec.min_duration * 10)));
  const int dmax = std::max(dmin, static_cast<int>(std::lround(spec.max_duration * 10)));
  std::uniform_int_distribution<int> dur(dmin, dmax);
  std::uniform_int_distribution<int> cls(0, spec.n_classes - 1);
  std::uniform_int_distribution<int> az(spec.azimuth_lo, spec.azimuth_hi);
  std::uniform_int_distribution<int> el(spec.elevation_lo, spec.elevation_hi);
  // busy[f] is a bitmask of occupied tracks.
  std::vector<unsigned> busy(static_cast<std::size_t>(n_frames), 0u);
  double t = 0.0;
  while (true) {
    t += gap(rng);
    const int onset = static_cast<int>(std::floor(t * kLabelFramesPerSecond));
    if (onset >= n_frames) break;
    SceneEvent e;
    e.onset_frame = onset;
    e.n_frames = std::min(dur(rng), n_frames - onset);
    e.cls = cls(rng);
    e.azimuth = az(rng);
    e.elevation = el(rng);
    ++r.attempts;
    unsigned used = 0;
    int peak = 0;
    for (int f = onset; f < onset + e.n_frames; ++f) {
      used |= busy[static_cast<std::size_t>(f)];
      peak = std::max(peak, std::popcount(busy[static_cast<std::size_t>(f)]));
    }
    if (peak + 1 > spec.max_polyphony) {
      ++r.rejected;
      continue;
    }
    int track = 0;
    while (used & (1u << track)) ++track;
    e.track = track;
    for (int f = onset; f < onset + e.n_frames; ++f) busy[static_cast<std::size_t>(f)] |= 1u << track;
    r.events.push_back(e);
  }
  return r;
}

struct SynthClip {
  FoaClip clip;
  PlacementResult placement;
  double snr_db = 0.0;
};

/// Clip `index` of a split; the clip's RNG stream depends only on
/// (spec.seed, split, index).
inline SynthClip synth_clip(const SceneSpec& spec, const std::string& split, int index) {
  if (spec.azimuth_velocity != 0.0)
    throw ConfigError("moving sources are not supported (azimuth_velocity must be 0)");
  if (spec.max_polyphony < 1 || spec.max_polyphony > 2)
    throw ConfigError("max_polyphony must be 1 or 2");
  if (spec.n_classes < 1 || spec.n_classes > kNumClasses)
    throw ConfigError("n_classes must be in [1, 14]");
  if (spec.elevation_lo < -45 || spec.elevation_hi > 45 || spec.azimuth_lo < -180 ||
      spec.azimuth_hi > 179 || spec.azimuth_lo > spec.azimuth_hi ||
      spec.elevation_lo > spec.elevation_hi)
    throw ConfigError("DoA sampling range outside azimuth [-180, 180), elevation [-45, 45]");
  std::mt19937_64 rng(mix_seed(mix_seed(spec.seed, fnv1a(split)), static_cast<std::uint64_t>(index)));
  SynthClip out;
  out.placement = place_events(spec, rng);
  std::uniform_real_distribution<double> snr(spec.snr_lo, spec.snr_hi);
  out.snr_db = snr(rng);
  char id[64];
  std::snprintf(id, sizeof id, "%s_%04d", split.c_str(), index);
  out.clip = render_scene(out.placement.events, spec.frames_per_clip(), rng(), out.snr_db, id);
  return out;
}

}  // namespace seld::data
