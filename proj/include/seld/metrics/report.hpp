// seld/metrics/report.hpp

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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "seld/metrics/scores.hpp"

namespace seld::metrics {

/// "ER 0.000, F 1.000, LE 0.0, LR 1.000"
inline std::string format_scores(const SeldScores& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "ER %.3f, F %.3f, LE %.1f, LR %.3f", s.er, s.f, s.le, s.lr);
  return buf;
}

/// One `name value` line per metric and count.
inline void write_report(std::ostream& os, const SeldScores& s, double threshold = kDefaultThreshold,
                         int segment_frames = kSegmentFrames) {
  char buf[64];
  auto num = [&](const char* k, double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    os << k << ' ' << buf << '\n';
  };
  os << "format seld-report-1\n";
  num("threshold_deg", threshold);
  os << "segment_frames " << segment_frames << '\n';
  num("ER", s.er);
  num("F", s.f);
  num("LE", s.le);
  num("LR", s.lr);
  os << "TP " << s.tp << "\nFP " << s.fp << "\nFN " << s.fn << "\nS " << s.substitutions
     << "\nD " << s.deletions << "\nI " << s.insertions << "\nN " << s.n_ref << "\nmatched "
     << s.matched << '\n';
  num("distance_sum", s.distance_sum);
  os << "ER_undefined " << s.er_undefined << "\nF_undefined " << s.f_undefined
     << "\nLE_undefined " << s.le_undefined << "\nLR_undefined " << s.lr_undefined << '\n';
}

inline void write_report(const std::filesystem::path& path, const SeldScores& s,
                         double threshold = kDefaultThreshold, int segment_frames = kSegmentFrames) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw MissingFileError("cannot write report " + path.string());
  write_report(os, s, threshold, segment_frames);
}

/// One row of a per-epoch history (loss plus the four scores).
struct HistoryRow {
  int epoch = 0;
  double loss = 0;
  SeldScores scores;
};

inline constexpr const char* kHistoryHeader = "epoch,loss,ER,F,LE,LR";

inline std::string history_line(const HistoryRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g", r.epoch, r.loss, r.scores.er,
                r.scores.f, r.scores.le, r.scores.lr);
  return buf;
}

inline void write_history(const std::filesystem::path& path, const std::vector<HistoryRow>& rows) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw MissingFileError("cannot write history " + path.string());
  os << kHistoryHeader << '\n';
  for (const auto& r : rows) os << history_line(r) << '\n';
}

}  // namespace seld::metrics
