// seld/data/augment.hpp

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

// The 16-element FOA rotation group: azimuth reflection (Y -> -Y), then
// azimuth rotation by k * 90 degrees, then optional elevation flip (Z -> -Z).
// On audio each element is a signed permutation of (X, Y, Z).

#pragma once

#include <array>
#include <string>
#include <vector>

#include "seld/data/foa.hpp"

namespace seld::data {

struct Rotation {
  int quarter_turns = 0;  // k in 0..3
  bool reflect = false;   // azimuth -> -azimuth
  bool flip_z = false;    // elevation -> -elevation

  static constexpr int kGroupSize = 16;

  static Rotation from_index(int i) {
    if (i < 0 || i >= kGroupSize) throw ContractError("rotation index must be in [0, 16)");
    return {i % 4, (i / 4) % 2 == 1, i / 8 == 1};
  }
  int index() const { return quarter_turns + 4 * reflect + 8 * flip_z; }
  bool is_identity() const { return quarter_turns == 0 && !reflect && !flip_z; }

  int azimuth(int az) const { return wrap_azimuth((reflect ? -az : az) + 90 * quarter_turns); }
  int elevation(int el) const { return flip_z ? -el : el; }

  /// Source index and sign for each output axis: out[a] = sign[a] * in[src[a]].
  struct AxisMap {
    std::array<int, 3> src;
    std::array<int, 3> sign;
  };
  AxisMap axes() const {
    // After reflection the input is (x, s*y); each quarter turn maps
    // (x, y) -> (-y, x).
    const int sy = reflect ? -1 : 1;
    AxisMap m{{0, 1, 2}, {1, sy, flip_z ? -1 : 1}};
    for (int k = 0; k < quarter_turns; ++k) {
      const AxisMap prev = m;
      m.src[0] = prev.src[1];
      m.sign[0] = -prev.sign[1];
      m.src[1] = prev.src[0];
      m.sign[1] = prev.sign[0];
    }
    return m;
  }

  template <class V>
  std::array<V, 3> apply(const std::array<V, 3>& v) const {
    const auto m = axes();
    std::array<V, 3> out;
    for (int a = 0; a < 3; ++a) out[a] = m.sign[a] < 0 ? -v[m.src[a]] : v[m.src[a]];
    return out;
  }

  std::string describe() const {
    return "rot" + std::to_string(90 * quarter_turns) + (reflect ? "+refl" : "") +
           (flip_z ? "+flipz" : "");
  }
};

inline std::vector<LabelRow> rotate_labels(std::vector<LabelRow> rows, const Rotation& r) {
  for (auto& row : rows) {
    row.azimuth = r.azimuth(row.azimuth);
    row.elevation = r.elevation(row.elevation);
  }
  return rows;
}

/// W is untouched; (X, Y, Z) undergo the signed permutation of `r`.
inline std::array<std::vector<float>, 4> rotate_audio(const std::array<std::vector<float>, 4>& a,
                                                      const Rotation& r) {
  const auto m = r.axes();
  std::array<std::vector<float>, 4> out;
  out[0] = a[0];
  for (int ax = 0; ax < 3; ++ax) {
    out[1 + ax] = a[1 + m.src[ax]];
    if (m.sign[ax] < 0)
      for (auto& v : out[1 + ax]) v = -v;
  }
  return out;
}

inline FoaClip rotate_foa_augment(const FoaClip& clip, const Rotation& r) {
  FoaClip out;
  out.id = clip.id;
  out.n_frames = clip.n_frames;
  out.audio = rotate_audio(clip.audio, r);
  out.labels = rotate_labels(clip.labels, r);
  return out;
}

}  // namespace seld::data
