// seld/data/labels.hpp

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

// Label CSV files: one row per active event per 100 ms frame,
//   frame,class,track,azimuth,elevation
// with integer fields and no header (a header line is tolerated on read).

#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "seld/data/foa.hpp"

namespace seld::data {

inline std::vector<LabelRow> parse_label_csv(std::istream& is, const std::string& origin = "labels") {
  std::vector<LabelRow> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<double> f;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        f.push_back(std::stod(cell, &used));
      } catch (...) {
        numeric = false;
        break;
      }
    }
    if (!numeric && lineno == 1) continue;  // header
    if (!numeric || f.size() != 5)
      throw FormatError(origin + ":" + std::to_string(lineno) +
                        ": expected frame,class,track,azimuth,elevation");
    LabelRow r;
    r.frame = static_cast<int>(f[0]);
    r.cls = static_cast<int>(f[1]);
    r.track = static_cast<int>(f[2]);
    r.azimuth = static_cast<int>(std::lround(f[3]));
    r.elevation = static_cast<int>(std::lround(f[4]));
    if (r.frame < 0 || r.cls < 0 || r.track < 0)
      throw FormatError(origin + ":" + std::to_string(lineno) + ": negative index");
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<LabelRow> read_label_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw MissingFileError("cannot open label file " + path);
  return parse_label_csv(is, path);
}

inline void sort_rows(std::vector<LabelRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const LabelRow& a, const LabelRow& b) {
    return std::tie(a.frame, a.track, a.cls) < std::tie(b.frame, b.track, b.cls);
  });
}

inline void write_label_csv(std::ostream& os, std::vector<LabelRow> rows) {
  sort_rows(rows);
  for (const auto& r : rows)
    os << r.frame << ',' << r.cls << ',' << r.track << ',' << r.azimuth << ',' << r.elevation
       << '\n';
}

inline void write_label_csv(const std::string& path, const std::vector<LabelRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw MissingFileError("cannot write label file " + path);
  write_label_csv(os, rows);
}

/// Rows grouped by frame; frames beyond the last row are empty.
inline std::vector<std::vector<LabelRow>> rows_by_frame(const std::vector<LabelRow>& rows,
                                                        int n_frames) {
  std::vector<std::vector<LabelRow>> out(static_cast<std::size_t>(std::max(n_frames, 0)));
  for (const auto& r : rows)
    if (r.frame >= 0 && r.frame < n_frames) out[static_cast<std::size_t>(r.frame)].push_back(r);
  for (auto& f : out)
    std::sort(f.begin(), f.end(),
              [](const LabelRow& a, const LabelRow& b) { return a.track < b.track; });
  return out;
}

/// A detected or reference event at one frame. Angles in degrees.
struct Event {
  int cls = 0;
  int track = 0;
  double azimuth = 0;
  double elevation = 0;
  bool degenerate = false;  // predicted DoA vector had zero norm

  // Integer angles take the exact-symmetry trig path.
  Vec3 direction() const {
    if (azimuth == std::trunc(azimuth) && elevation == std::trunc(elevation) &&
        std::abs(azimuth) <= 720 && std::abs(elevation) <= 90)
      return to_cartesian(static_cast<int>(azimuth), static_cast<int>(elevation));
    return to_cartesian(azimuth, elevation);
  }
};

using FrameEvents = std::vector<std::vector<Event>>;

inline FrameEvents events_from_rows(const std::vector<LabelRow>& rows, int n_frames) {
  FrameEvents out(static_cast<std::size_t>(std::max(n_frames, 0)));
  for (const auto& r : rows)
    if (r.frame >= 0 && r.frame < n_frames)
      out[static_cast<std::size_t>(r.frame)].push_back(
          {r.cls, r.track, static_cast<double>(r.azimuth), static_cast<double>(r.elevation)});
  return out;
}

/// Rounds angles to the integer label grid.
inline std::vector<LabelRow> rows_from_events(const FrameEvents& frames) {
  std::vector<LabelRow> rows;
  for (std::size_t f = 0; f < frames.size(); ++f)
    for (const auto& e : frames[f])
      rows.push_back({static_cast<int>(f), e.cls, e.track,
                      wrap_azimuth(static_cast<int>(std::lround(e.azimuth))),
                      std::clamp(static_cast<int>(std::lround(e.elevation)), -90, 90)});
  return rows;
}

}  // namespace seld::data
