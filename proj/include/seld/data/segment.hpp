// seld/data/segment.hpp

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

#include <string>
#include <vector>

#include "seld/data/foa.hpp"

namespace seld::data {

/// Non-overlapping 4 s windows. The last window is zero-padded and keeps only
/// the labels inside the clip. Segment ids are "<clip id>#<index>".
inline std::vector<FoaClip> segment_clips(const FoaClip& clip) {
  const std::size_t n = clip.num_samples();
  const std::size_t count = n == 0 ? 0 : (n + kSegmentSamples - 1) / kSegmentSamples;
  std::vector<FoaClip> out(count);
  for (std::size_t s = 0; s < count; ++s) {
    FoaClip& seg = out[s];
    seg.id = clip.id + "#" + std::to_string(s);
    seg.n_frames = kSegmentFrames;
    const std::size_t begin = s * kSegmentSamples;
    const std::size_t end = std::min(n, begin + kSegmentSamples);
    for (std::size_t c = 0; c < 4; ++c) {
      seg.audio[c].assign(kSegmentSamples, 0.0f);
      std::copy(clip.audio[c].begin() + static_cast<std::ptrdiff_t>(begin),
                clip.audio[c].begin() + static_cast<std::ptrdiff_t>(end), seg.audio[c].begin());
    }
    const int f0 = static_cast<int>(s) * kSegmentFrames;
    for (const auto& r : clip.labels)
      if (r.frame >= f0 && r.frame < f0 + kSegmentFrames) {
        LabelRow q = r;
        q.frame -= f0;
        seg.labels.push_back(q);
      }
  }
  return out;
}

}  // namespace seld::data
