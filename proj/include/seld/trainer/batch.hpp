// seld/trainer/batch.hpp

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

// Segment banks backed by the feature cache, and batch assembly.
//
// Per batch item the pipeline is: raw cached features -> rotation (features
// and labels) -> standardization -> SpecAugment. The SED branch sees the
// four log-mel planes; the DoA branch sees all seven.

#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "seld/data/augment.hpp"
#include "seld/data/dataset.hpp"
#include "seld/data/labels.hpp"
#include "seld/diffcore/tensor.hpp"
#include "seld/features/featurize.hpp"

namespace seld::trainer {

struct Segment {
  features::FeatureClip features;  // raw, not standardized
  std::vector<data::LabelRow> labels;
  int n_frames = data::kSegmentFrames;
};

struct SegmentBank {
  std::string split;
  std::vector<Segment> segments;
  std::size_t size() const { return segments.size(); }
  bool empty() const { return segments.empty(); }
};

/// Loads the cached features of every segment of `split`, featurizing and
/// caching any that are missing or were built under another config.
/// `max_clips` > 0 keeps only the first clips in sorted-id order.
inline SegmentBank load_bank(const data::DatasetLayout& d, const std::string& split,
                             const features::FeatureConfig& fc, int max_clips = 0,
                             int* featurized = nullptr) {
  SegmentBank bank;
  bank.split = split;
  auto ids = d.clips(split);
  if (max_clips > 0 && ids.size() > static_cast<std::size_t>(max_clips))
    ids.resize(static_cast<std::size_t>(max_clips));
  std::unique_ptr<features::Featurizer> fz;
  const std::uint64_t h = fc.hash();
  std::filesystem::create_directories(d.features_dir(split));
  for (const auto& id : ids) {
    for (auto& seg : data::segment_clips(data::load_clip(d, split, id))) {
      const auto path = d.features(split, seg.id).string();
      Segment s;
      s.labels = std::move(seg.labels);
      s.n_frames = seg.n_frames;
      bool cached = false;
      if (std::filesystem::exists(path)) {
        try {
          s.features = features::load_feature_clip(path, h);
          cached = true;
        } catch (const ConfigError&) {
        }
      }
      if (!cached) {
        if (!fz) fz = std::make_unique<features::Featurizer>(fc);
        s.features = fz->featurize(seg.audio, seg.id);
        features::save_feature_clip(path, s.features, h);
        if (featurized) ++*featurized;
      }
      bank.segments.push_back(std::move(s));
    }
  }
  return bank;
}

/// Normalization statistics from `bank`, written to the dataset's stats file.
inline features::FeatureStats compute_stats(const data::DatasetLayout& d, const SegmentBank& bank,
                                            const features::FeatureConfig& fc) {
  if (bank.empty()) throw ConfigError("cannot compute feature statistics: split '" + bank.split + "' is empty");
  features::FeatureStatsAccumulator acc;
  for (const auto& s : bank.segments) acc.add(s.features);
  auto st = acc.finish(fc.hash());
  std::filesystem::create_directories(d.stats().parent_path());
  st.save(d.stats().string());
  return st;
}

/// Reuses the stats file when it matches the feature config, else rebuilds it
/// from `train`.
inline features::FeatureStats load_or_compute_stats(const data::DatasetLayout& d,
                                                    const SegmentBank& train,
                                                    const features::FeatureConfig& fc) {
  if (std::filesystem::exists(d.stats())) {
    auto st = features::FeatureStats::load(d.stats().string());
    if (st.config_hash == fc.hash()) return st;
  }
  return compute_stats(d, train, fc);
}

struct AugmentOptions {
  bool rotate = false;
  bool spec_augment = false;
  features::SpecAugmentConfig masks;
};

template <class T>
struct Batch {
  diff::Tensor<T> sed_in;  // [B,4,T,F]
  diff::Tensor<T> doa_in;  // [B,7,T,F]
  std::vector<data::FrameEvents> labels;
  std::size_t frames = 0;  // label frames per item
};

/// Builds one batch from `indices`. Random draws (rotation index, then masks)
/// are taken from `rng` item by item in index order.
template <class T>
Batch<T> make_batch(const SegmentBank& bank, const std::vector<std::size_t>& indices,
                    const features::FeatureStats& stats, const AugmentOptions& aug,
                    std::mt19937_64& rng) {
  if (indices.empty()) throw ContractError("make_batch: empty index list");
  const auto& first = bank.segments.at(indices[0]).features;
  const std::size_t B = indices.size(), Tf = static_cast<std::size_t>(first.frames),
                    F = static_cast<std::size_t>(first.mels), plane = Tf * F;
  std::vector<T> sed(B * features::kSedChannels * plane), doa(B * features::kDoaChannels * plane);
  Batch<T> out;
  out.frames = static_cast<std::size_t>(bank.segments[indices[0]].n_frames);
  for (std::size_t b = 0; b < B; ++b) {
    const Segment& s = bank.segments.at(indices[b]);
    if (static_cast<std::size_t>(s.features.frames) != Tf ||
        static_cast<std::size_t>(s.features.mels) != F ||
        static_cast<std::size_t>(s.n_frames) != out.frames)
      throw DimensionError("make_batch: segment " + s.features.id + " differs in shape from " +
                           first.id);
    features::FeatureClip f;
    std::vector<data::LabelRow> rows;
    if (aug.rotate) {
      const auto r = data::Rotation::from_index(
          std::uniform_int_distribution<int>(0, data::Rotation::kGroupSize - 1)(rng));
      f = features::rotate_features(s.features, r);
      rows = data::rotate_labels(s.labels, r);
    } else {
      f = s.features;
      rows = s.labels;
    }
    features::standardize(f, stats);
    if (aug.spec_augment) features::spec_augment(f, aug.masks, rng);
    for (int c = 0; c < features::kDoaChannels; ++c) {
      const auto p = f.plane(c);
      std::copy(p.begin(), p.end(), doa.begin() + static_cast<std::ptrdiff_t>((b * features::kDoaChannels + c) * plane));
      if (c < features::kSedChannels)
        std::copy(p.begin(), p.end(), sed.begin() + static_cast<std::ptrdiff_t>((b * features::kSedChannels + c) * plane));
    }
    out.labels.push_back(data::events_from_rows(rows, s.n_frames));
  }
  out.sed_in = diff::Tensor<T>({B, static_cast<std::size_t>(features::kSedChannels), Tf, F}, std::move(sed));
  out.doa_in = diff::Tensor<T>({B, static_cast<std::size_t>(features::kDoaChannels), Tf, F}, std::move(doa));
  return out;
}

}  // namespace seld::trainer
