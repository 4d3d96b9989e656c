// seld/data/foa.hpp

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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "seld/common.hpp"

namespace seld::data {

inline constexpr int kSampleRate = 24000;
inline constexpr int kLabelHopSamples = 2400;  // 100 ms label grid
inline constexpr int kSegmentSeconds = 4;
inline constexpr int kSegmentSamples = kSampleRate * kSegmentSeconds;
inline constexpr int kSegmentFrames = kSegmentSamples / kLabelHopSamples;  // 40
inline constexpr int kNumClasses = 14;
inline constexpr int kFoaChannels = 4;

using Vec3 = std::array<double, 3>;

/// One label row: an active event instance at one 100 ms frame.
struct LabelRow {
  int frame = 0;
  int cls = 0;
  int track = 0;
  int azimuth = 0;    // degrees, [-180, 180)
  int elevation = 0;  // degrees, [-45, 45]

  bool operator==(const LabelRow&) const = default;
};

/// Four-channel first-order-ambisonics clip plus its frame labels.
/// Channels are stored (W, X, Y, Z).
struct FoaClip {
  std::string id;
  std::array<std::vector<float>, kFoaChannels> audio;
  std::vector<LabelRow> labels;
  int n_frames = 0;  // label frames covered by the clip

  std::size_t num_samples() const { return audio[0].size(); }
};

// Degree-valued trig with exact quadrant symmetry: sin_deg(a + 180) ==
// -sin_deg(a) and cos_deg(a) == sin_deg(a + 90) hold bit-for-bit for integer
// angles, which keeps rotated encodings sample-exact.
inline double sin_deg(int a) {
  int r = ((a % 360) + 360) % 360;
  auto s = [](int d) { return std::sin(d * std::numbers::pi / 180.0); };
  if (r <= 90) return s(r);
  if (r <= 180) return s(180 - r);
  if (r <= 270) return -s(r - 180);
  return -s(360 - r);
}

inline double cos_deg(int a) { return sin_deg(a + 90); }

/// Wraps to [-180, 180).
inline int wrap_azimuth(int a) { return ((a + 180) % 360 + 360) % 360 - 180; }

inline Vec3 to_cartesian(double azimuth_deg, double elevation_deg) {
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const double el = elevation_deg * std::numbers::pi / 180.0;
  return {std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el)};
}

inline Vec3 to_cartesian(int azimuth_deg, int elevation_deg) {
  return {cos_deg(azimuth_deg) * cos_deg(elevation_deg),
          sin_deg(azimuth_deg) * cos_deg(elevation_deg), sin_deg(elevation_deg)};
}

/// Cartesian -> (azimuth in [-180, 180), elevation in [-90, 90]) degrees.
/// Returns false and (0, 0) when the vector has zero norm.
inline bool to_spherical(const Vec3& v, double& azimuth, double& elevation) {
  const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  if (n == 0.0 || !std::isfinite(n)) {
    azimuth = elevation = 0.0;
    return false;
  }
  azimuth = std::atan2(v[1], v[0]) * 180.0 / std::numbers::pi;
  if (azimuth >= 180.0) azimuth -= 360.0;
  elevation = std::asin(std::clamp(v[2] / n, -1.0, 1.0)) * 180.0 / std::numbers::pi;
  return true;
}

/// SN3D gains (W, X, Y, Z) for a static plane-wave source.
inline std::array<double, 4> foa_gains(int azimuth_deg, int elevation_deg) {
  return {1.0, cos_deg(azimuth_deg) * cos_deg(elevation_deg),
          sin_deg(azimuth_deg) * cos_deg(elevation_deg), sin_deg(elevation_deg)};
}

/// Encodes a mono signal as FOA: W = s, X = s cos(az) cos(el),
/// Y = s sin(az) cos(el), Z = s sin(el).
inline std::array<std::vector<float>, 4> foa_encode(std::span<const float> mono, int azimuth_deg,
                                                    int elevation_deg) {
  const auto g = foa_gains(azimuth_deg, elevation_deg);
  std::array<std::vector<float>, 4> out;
  for (std::size_t c = 0; c < 4; ++c) {
    out[c].resize(mono.size());
    const float gc = static_cast<float>(g[c]);
    for (std::size_t i = 0; i < mono.size(); ++i) out[c][i] = mono[i] * gc;
  }
  return out;
}

}  // namespace seld::data
