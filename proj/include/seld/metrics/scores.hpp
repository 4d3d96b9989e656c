// seld/metrics/scores.hpp

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

// Joint detection/localization scores.
//
// Label frames (100 ms) are pooled into evaluation segments (10 frames by
// default). Within a segment a class is active if any of its frames is, and
// every (class, track) instance contributes one DoA: the normalized mean of
// its Cartesian directions. Per segment and class, predictions are matched
// to references by minimum total angular distance. A matched pair within
// the threshold is a TP; a matched pair beyond it is one FN plus one FP;
// leftovers are FN (refs) or FP (preds).
//
//   ER = (S + D + I) / N     S = min(FN, FP), D = max(0, FN - FP),
//                            I = max(0, FP - FN) per segment, N = #refs
//   F  = 2 TP / (2 TP + FP + FN)
//   LE = mean distance over all class-matched pairs
//   LR = class-matched pairs / N

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

#include "seld/assignment.hpp"
#include "seld/data/labels.hpp"

namespace seld::metrics {

using data::Vec3;

inline constexpr double kDefaultThreshold = 20.0;
inline constexpr int kSegmentFrames = 10;
inline constexpr double kUnitTolerance = 1e-3;

namespace detail {

// Sum of three terms in sorted order, so any reordering of the terms gives
// the same bits.
inline double sorted_sum3(double a, double b, double c) {
  if (a > b) std::swap(a, b);
  if (b > c) std::swap(b, c);
  if (a > b) std::swap(a, b);
  return (a + b) + c;
}

inline double norm(const Vec3& v) {
  return std::sqrt(sorted_sum3(v[0] * v[0], v[1] * v[1], v[2] * v[2]));
}

}  // namespace detail

/// Great-circle angle in degrees. Inputs are normalized first; `off_unit`
/// (when given) is set if either norm is more than 1e-3 away from 1.
inline double angular_distance(const Vec3& u, const Vec3& v, bool* off_unit = nullptr) {
  const double nu = detail::norm(u), nv = detail::norm(v);
  if (off_unit) *off_unit = std::abs(nu - 1) > kUnitTolerance || std::abs(nv - 1) > kUnitTolerance;
  if (nu == 0 || nv == 0) return 180.0;
  const double d =
      detail::sorted_sum3(u[0] * v[0], u[1] * v[1], u[2] * v[2]) / (nu * nv);
  return std::acos(std::clamp(d, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

struct MatchedPair {
  int pred = 0, ref = 0;
  double distance = 0;
};

struct Matching {
  std::vector<MatchedPair> pairs;
  int unmatched_preds = 0, unmatched_refs = 0;
  double total_distance() const {
    double s = 0;
    for (const auto& p : pairs) s += p.distance;
    return s;
  }
};

inline std::vector<double> distance_matrix(const std::vector<Vec3>& preds,
                                           const std::vector<Vec3>& refs) {
  std::vector<double> c(preds.size() * refs.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    for (std::size_t j = 0; j < refs.size(); ++j)
      c[i * refs.size() + j] = angular_distance(preds[i], refs[j]);
  return c;
}

/// Hungarian matching of same-class predictions and references.
inline Matching match_per_class(const std::vector<Vec3>& preds, const std::vector<Vec3>& refs) {
  Matching m;
  const auto c = distance_matrix(preds, refs);
  const auto col = hungarian(c, preds.size(), refs.size());
  for (std::size_t i = 0; i < col.size(); ++i)
    if (col[i] >= 0) m.pairs.push_back({static_cast<int>(i), col[i], c[i * refs.size() + col[i]]});
  m.unmatched_preds = static_cast<int>(preds.size() - m.pairs.size());
  m.unmatched_refs = static_cast<int>(refs.size() - m.pairs.size());
  return m;
}

/// Exhaustive reference for match_per_class (small inputs only).
inline Matching match_per_class_brute(const std::vector<Vec3>& preds,
                                      const std::vector<Vec3>& refs) {
  const auto c = distance_matrix(preds, refs);
  const std::size_t n = preds.size(), m = refs.size();
  const bool by_pred = n <= m;  // permute the larger side
  std::vector<int> p(by_pred ? m : n);
  std::iota(p.begin(), p.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> best_p = p;
  do {
    double s = 0;
    for (std::size_t i = 0; i < std::min(n, m); ++i)
      s += by_pred ? c[i * m + p[i]] : c[p[i] * m + i];
    if (s < best) {
      best = s;
      best_p = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  Matching out;
  for (std::size_t i = 0; i < std::min(n, m); ++i) {
    const int pi = by_pred ? static_cast<int>(i) : best_p[i];
    const int ri = by_pred ? best_p[i] : static_cast<int>(i);
    out.pairs.push_back({pi, ri, c[static_cast<std::size_t>(pi) * m + ri]});
  }
  out.unmatched_preds = static_cast<int>(n - out.pairs.size());
  out.unmatched_refs = static_cast<int>(m - out.pairs.size());
  return out;
}

// ------------------------------------------------------------ aggregation

/// Per segment: class -> instance DoAs (one per track seen in the segment).
using SegmentDoas = std::map<int, std::vector<Vec3>>;

inline std::vector<SegmentDoas> aggregate_segments(const data::FrameEvents& frames,
                                                   int segment_frames = kSegmentFrames) {
  if (segment_frames < 1) throw ConfigError("segment_frames must be >= 1");
  const std::size_t seg = static_cast<std::size_t>(segment_frames);
  const std::size_t n_seg = (frames.size() + seg - 1) / seg;
  std::vector<SegmentDoas> out(n_seg);
  for (std::size_t s = 0; s < n_seg; ++s) {
    // (class, track) -> running sum and first direction
    std::map<std::pair<int, int>, std::pair<Vec3, Vec3>> acc;
    for (std::size_t f = s * seg; f < std::min(frames.size(), (s + 1) * seg); ++f)
      for (const auto& e : frames[f]) {
        const Vec3 d = e.direction();
        auto [it, fresh] = acc.try_emplace({e.cls, e.track}, Vec3{0, 0, 0}, d);
        for (int j = 0; j < 3; ++j) it->second.first[j] += d[j];
      }
    for (const auto& [key, sums] : acc) {
      Vec3 v = sums.first;
      const double n = detail::norm(v);
      if (n > 0)
        for (auto& x : v) x /= n;
      else
        v = sums.second;
      out[s][key.first].push_back(v);
    }
  }
  return out;
}

// ----------------------------------------------------------------- scores

struct SeldScores {
  double er = 0, f = 0, le = 0, lr = 0;
  long tp = 0, fp = 0, fn = 0;
  long substitutions = 0, deletions = 0, insertions = 0, n_ref = 0;
  long matched = 0;
  double distance_sum = 0;
  // Set when the quantity had an empty denominator and holds a stand-in.
  bool er_undefined = false, f_undefined = false, le_undefined = false, lr_undefined = false;
};

/// Accumulates counts over any number of clips, then forms the ratios.
class ScoreAccumulator {
 public:
  explicit ScoreAccumulator(double threshold = kDefaultThreshold,
                            int segment_frames = kSegmentFrames)
      : threshold_(threshold), segment_frames_(segment_frames) {
    if (!(threshold >= 0)) throw ConfigError("distance threshold must be >= 0");
    if (segment_frames < 1) throw ConfigError("segment_frames must be >= 1");
  }

  void add(const data::FrameEvents& pred, const data::FrameEvents& ref) {
    if (pred.size() != ref.size())
      throw DimensionError("seld_scores: prediction has " + std::to_string(pred.size()) +
                           " frames, reference " + std::to_string(ref.size()));
    const auto ps = aggregate_segments(pred, segment_frames_);
    const auto rs = aggregate_segments(ref, segment_frames_);
    for (std::size_t s = 0; s < rs.size(); ++s) add_segment(ps[s], rs[s]);
  }

  void add_segment(const SegmentDoas& pred, const SegmentDoas& ref) {
    long fn = 0, fp = 0;
    static const std::vector<Vec3> none;
    std::vector<int> classes;
    for (const auto& [k, v] : ref) classes.push_back(k);
    for (const auto& [k, v] : pred)
      if (!ref.count(k)) classes.push_back(k);
    for (int k : classes) {
      const auto pi = pred.find(k), ri = ref.find(k);
      const auto& p = pi == pred.end() ? none : pi->second;
      const auto& r = ri == ref.end() ? none : ri->second;
      const auto m = match_per_class(p, r);
      for (const auto& pair : m.pairs) {
        ++s_.matched;
        s_.distance_sum += pair.distance;
        if (pair.distance <= threshold_) {
          ++s_.tp;
        } else {
          ++fn;
          ++fp;
        }
      }
      fn += m.unmatched_refs;
      fp += m.unmatched_preds;
      s_.n_ref += static_cast<long>(r.size());
    }
    s_.fn += fn;
    s_.fp += fp;
    s_.substitutions += std::min(fn, fp);
    s_.deletions += std::max(0L, fn - fp);
    s_.insertions += std::max(0L, fp - fn);
  }

  /// With no references ER falls back to (S+D+I) and LE to 180 degrees;
  /// the matching *_undefined flags are raised.
  SeldScores finish() const {
    SeldScores s = s_;
    const long errors = s.substitutions + s.deletions + s.insertions;
    s.er_undefined = s.n_ref == 0;
    s.er = static_cast<double>(errors) / static_cast<double>(std::max(s.n_ref, 1L));
    const long fden = 2 * s.tp + s.fp + s.fn;
    s.f_undefined = fden == 0;
    s.f = fden > 0 ? 2.0 * static_cast<double>(s.tp) / static_cast<double>(fden) : 0.0;
    s.le_undefined = s.matched == 0;
    s.le = s.matched > 0 ? s.distance_sum / static_cast<double>(s.matched) : 180.0;
    s.lr_undefined = s.n_ref == 0;
    s.lr = s.n_ref > 0 ? static_cast<double>(s.matched) / static_cast<double>(s.n_ref) : 0.0;
    return s;
  }

  double threshold() const { return threshold_; }
  int segment_frames() const { return segment_frames_; }

 private:
  double threshold_;
  int segment_frames_;
  SeldScores s_;
};

inline SeldScores seld_scores(const data::FrameEvents& pred, const data::FrameEvents& ref,
                              double threshold = kDefaultThreshold,
                              int segment_frames = kSegmentFrames) {
  ScoreAccumulator acc(threshold, segment_frames);
  acc.add(pred, ref);
  return acc.finish();
}

}  // namespace seld::metrics
