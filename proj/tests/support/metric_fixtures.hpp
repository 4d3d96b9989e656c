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

// Hand-built scoring fixtures shared by the unit tests and the acceptance run.

#pragma once

#include <random>

#include "seld/data/foa.hpp"
#include "seld/metrics/scores.hpp"

namespace seld::oracle {

/// Two 1 s segments; class 2 on track 0 throughout, class 5 on track 1 in
/// the second segment only.
inline data::FrameEvents reference_fixture() {
  data::FrameEvents f(20);
  for (int t = 0; t < 20; ++t) {
    f[t].push_back({2, 0, 40, 0});
    if (t >= 10) f[t].push_back({5, 1, -120, 0});
  }
  return f;
}

/// Same events, every azimuth moved by `offset` degrees (all at elevation 0,
/// so the great-circle offset equals `offset`).
inline data::FrameEvents offset_fixture(double offset) {
  auto f = reference_fixture();
  for (auto& fr : f)
    for (auto& e : fr) e.azimuth += offset;
  return f;
}

/// Random direction with elevation in [-45, 45], integer degrees.
inline data::Event random_event(std::mt19937_64& g, int cls, int track) {
  std::uniform_int_distribution<int> az(-180, 179), el(-45, 45);
  return {cls, track, static_cast<double>(az(g)), static_cast<double>(el(g))};
}

/// Random frame events: up to `max_per_class` tracks per class per frame.
inline data::FrameEvents random_frames(std::mt19937_64& g, int frames, int classes,
                                       int max_per_class) {
  data::FrameEvents f(static_cast<std::size_t>(frames));
  std::uniform_int_distribution<int> cls(0, classes - 1), count(0, max_per_class);
  for (auto& fr : f) {
    const int k = cls(g), n = count(g);
    for (int i = 0; i < n; ++i) fr.push_back(random_event(g, k, i));
  }
  return f;
}

}  // namespace seld::oracle
