// seld/data/dataset.hpp

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

// On-disk dataset tree:
//
//   <root>/manifest.txt                 splits and generation parameters
//   <root>/foa/<split>/<clip>.wav       4-channel 24 kHz 16-bit PCM
//   <root>/metadata/<split>/<clip>.csv  frame,class,track,azimuth,elevation
//   <root>/stats/feature_stats.bin      training-split feature statistics
//   <root>/features/<split>/<seg>.feat  cached features per 4 s segment

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seld/data/labels.hpp"
#include "seld/data/segment.hpp"
#include "seld/data/synth.hpp"
#include "seld/data/wav.hpp"

namespace seld::data {

namespace fs = std::filesystem;

class DatasetLayout {
 public:
  explicit DatasetLayout(fs::path root) : root_(std::move(root)) {}

  const fs::path& root() const { return root_; }
  fs::path manifest() const { return root_ / "manifest.txt"; }
  fs::path wav(const std::string& split, const std::string& clip) const {
    return root_ / "foa" / split / (clip + ".wav");
  }
  fs::path csv(const std::string& split, const std::string& clip) const {
    return root_ / "metadata" / split / (clip + ".csv");
  }
  fs::path stats() const { return root_ / "stats" / "feature_stats.bin"; }
  fs::path features_dir(const std::string& split) const { return root_ / "features" / split; }
  fs::path features(const std::string& split, const std::string& segment) const {
    std::string name = segment;
    std::replace(name.begin(), name.end(), '#', '-');
    return features_dir(split) / (name + ".feat");
  }

  /// Clip ids of a split, sorted.
  std::vector<std::string> clips(const std::string& split) const {
    const fs::path dir = root_ / "foa" / split;
    if (!fs::is_directory(dir)) throw MissingFileError("no such split directory " + dir.string());
    std::vector<std::string> ids;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".wav") ids.push_back(e.path().stem());
    std::sort(ids.begin(), ids.end());
    return ids;
  }

 private:
  fs::path root_;
};

/// Reads a WAV file and, when present, its label CSV.
inline FoaClip load_clip_files(const fs::path& wav_path, const fs::path& csv_path) {
  WavAudio w = read_wav(wav_path.string());
  if (w.sample_rate != kSampleRate)
    throw FormatError(wav_path.string() + ": sample rate " + std::to_string(w.sample_rate) +
                      " Hz, expected 24000");
  FoaClip clip;
  clip.id = wav_path.stem().string();
  clip.audio = std::move(w.audio);
  clip.n_frames =
      static_cast<int>((clip.num_samples() + kLabelHopSamples - 1) / kLabelHopSamples);
  if (!csv_path.empty() && fs::exists(csv_path)) clip.labels = read_label_csv(csv_path.string());
  return clip;
}

inline FoaClip load_clip(const DatasetLayout& d, const std::string& split, const std::string& id) {
  if (!fs::exists(d.csv(split, id)))
    throw MissingFileError("missing label file " + d.csv(split, id).string());
  return load_clip_files(d.wav(split, id), d.csv(split, id));
}

/// All 4 s segments of a split, in clip order.
inline std::vector<FoaClip> load_segments(const DatasetLayout& d, const std::string& split) {
  std::vector<FoaClip> out;
  for (const auto& id : d.clips(split)) {
    auto segs = segment_clips(load_clip(d, split, id));
    for (auto& s : segs) out.push_back(std::move(s));
  }
  return out;
}

inline void write_clip(const DatasetLayout& d, const std::string& split, const FoaClip& clip) {
  fs::create_directories(d.wav(split, clip.id).parent_path());
  fs::create_directories(d.csv(split, clip.id).parent_path());
  write_wav(d.wav(split, clip.id).string(), clip.audio);
  write_label_csv(d.csv(split, clip.id).string(), clip.labels);
}

struct DatasetSpec {
  SceneSpec scene;
  std::vector<std::pair<std::string, int>> splits{{"train", 10}, {"test", 4}};
};

inline std::string describe(const SceneSpec& s) {
  std::ostringstream os;
  os << "clip_seconds=" << s.clip_seconds << "\nn_classes=" << s.n_classes
     << "\nmax_polyphony=" << s.max_polyphony << "\nmin_duration=" << s.min_duration
     << "\nmax_duration=" << s.max_duration << "\nevent_rate=" << s.event_rate
     << "\nsnr_lo=" << s.snr_lo << "\nsnr_hi=" << s.snr_hi << "\nazimuth_range=" << s.azimuth_lo
     << ":" << s.azimuth_hi << "\nelevation_range=" << s.elevation_lo << ":" << s.elevation_hi
     << "\nseed=" << s.seed << "\n";
  return os.str();
}

struct SynthReport {
  int clips = 0;
  int events = 0;
  int attempts = 0;
  int rejected = 0;
  std::vector<std::string> warnings;
};

/// Generates every split into `d`. Deterministic in spec.scene.seed.
inline SynthReport synth_dataset(const DatasetLayout& d, const DatasetSpec& spec) {
  SynthReport rep;
  fs::create_directories(d.root());
  for (const auto& [split, n] : spec.splits) {
    for (int i = 0; i < n; ++i) {
      const SynthClip c = synth_clip(spec.scene, split, i);
      write_clip(d, split, c.clip);
      ++rep.clips;
      rep.events += static_cast<int>(c.placement.events.size());
      rep.attempts += c.placement.attempts;
      rep.rejected += c.placement.rejected;
    }
  }
  if (rep.attempts > 0 && rep.rejected * 4 > rep.attempts)
    rep.warnings.push_back("event rate too high for the polyphony cap: " +
                           std::to_string(rep.rejected) + " of " + std::to_string(rep.attempts) +
                           " drawn events were dropped");
  std::ofstream os(d.manifest(), std::ios::trunc);
  if (!os) throw MissingFileError("cannot write " + d.manifest().string());
  os << "format=seld-dataset-1\n";
  for (const auto& [split, n] : spec.splits) os << "split." << split << "=" << n << "\n";
  os << describe(spec.scene);
  return rep;
}

/// Parses manifest.txt into key/value pairs.
inline std::map<std::string, std::string> read_manifest(const DatasetLayout& d) {
  std::ifstream is(d.manifest());
  if (!is) throw MissingFileError("missing dataset manifest " + d.manifest().string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

}  // namespace seld::data
