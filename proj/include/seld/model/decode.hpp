// seld/model/decode.hpp

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

// Network outputs to per-frame event lists.

#pragma once

#include <span>

#include "seld/data/labels.hpp"
#include "seld/diffcore/tensor.hpp"

namespace seld::model {

/// Cartesian (x, y, z) to an event direction; a zero vector yields (0, 0)
/// and sets `degenerate`.
inline void set_direction(data::Event& e, double x, double y, double z) {
  e.degenerate = !data::to_spherical({x, y, z}, e.azimuth, e.elevation);
}

/// sed [T,M,K] probabilities, doa [T,M,3]. Per track and frame the argmax
/// class is emitted when its probability reaches `threshold`.
template <class T>
data::FrameEvents decode_trackwise(std::span<const T> sed, std::span<const T> doa, std::size_t frames,
                                   std::size_t tracks, std::size_t classes, double threshold = 0.5) {
  data::FrameEvents out(frames);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t m = 0; m < tracks; ++m) {
      const T* p = sed.data() + (t * tracks + m) * classes;
      std::size_t best = 0;
      for (std::size_t k = 1; k < classes; ++k)
        if (p[k] > p[best]) best = k;
      if (p[best] < threshold) continue;
      const T* v = doa.data() + (t * tracks + m) * 3;
      data::Event e;
      e.cls = static_cast<int>(best);
      e.track = static_cast<int>(m);
      set_direction(e, v[0], v[1], v[2]);
      out[t].push_back(e);
    }
  return out;
}

/// sed [T,K] probabilities, doa [T,K,3]. Every class at or above
/// `threshold` is emitted with its own DoA vector.
template <class T>
data::FrameEvents decode_seldnet_format(std::span<const T> sed, std::span<const T> doa,
                                        std::size_t frames, std::size_t classes,
                                        double threshold = 0.5) {
  data::FrameEvents out(frames);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < classes; ++k) {
      if (sed[t * classes + k] < threshold) continue;
      const T* v = doa.data() + (t * classes + k) * 3;
      data::Event e;
      e.cls = static_cast<int>(k);
      e.track = 0;
      set_direction(e, v[0], v[1], v[2]);
      out[t].push_back(e);
    }
  return out;
}

}  // namespace seld::model
