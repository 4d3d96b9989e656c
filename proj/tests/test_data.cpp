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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "seld/data/augment.hpp"
#include "seld/data/dataset.hpp"

using namespace seld;
using namespace seld::data;

namespace {

std::vector<float> ramp(std::size_t n) {
  std::vector<float> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = 0.01f * static_cast<float>(i) - 0.3f;
  return s;
}

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("seld_test_data_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST(FoaEncode, AxisCases) {
  const auto s = ramp(64);
  const auto front = foa_encode(s, 0, 0);
  const auto left = foa_encode(s, 90, 0);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(front[0][i], s[i]);
    EXPECT_EQ(front[1][i], s[i]);
    EXPECT_EQ(front[2][i], 0.0f);
    EXPECT_EQ(front[3][i], 0.0f);
    EXPECT_EQ(left[0][i], s[i]);
    EXPECT_EQ(left[1][i], 0.0f);
    EXPECT_EQ(left[2][i], s[i]);
    EXPECT_EQ(left[3][i], 0.0f);
  }
}

TEST(FoaEncode, Diagonal45) {
  const auto s = ramp(32);
  const auto e = foa_encode(s, 45, 45);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_NEAR(e[1][i], s[i] / 2, 1e-6);
    EXPECT_NEAR(e[2][i], s[i] / 2, 1e-6);
    EXPECT_NEAR(e[3][i], s[i] * std::sqrt(2.0) / 2, 1e-6);
  }
}

TEST(FoaEncode, DegreeTrigMatchesLibm) {
  for (int a = -720; a <= 720; ++a) {
    EXPECT_NEAR(sin_deg(a), std::sin(a * std::numbers::pi / 180), 1e-12);
    EXPECT_NEAR(cos_deg(a), std::cos(a * std::numbers::pi / 180), 1e-12);
  }
  EXPECT_EQ(wrap_azimuth(180), -180);
  EXPECT_EQ(wrap_azimuth(-181), 179);
  EXPECT_EQ(wrap_azimuth(100), 100);
}

TEST(Rotation, GroupElementsAreDistinctAndIdentityFirst) {
  EXPECT_TRUE(Rotation::from_index(0).is_identity());
  std::set<std::pair<int, int>> images;
  for (int i = 0; i < Rotation::kGroupSize; ++i) {
    const auto r = Rotation::from_index(i);
    EXPECT_EQ(r.index(), i);
    images.insert({r.azimuth(10), r.elevation(20)});
  }
  EXPECT_EQ(images.size(), 16u);
  EXPECT_THROW(Rotation::from_index(16), ContractError);
}

TEST(Rotation, QuarterTurnAndReflectionExamples) {
  const Rotation quarter{1, false, false};
  EXPECT_EQ(quarter.azimuth(10), 100);
  const Rotation mirror{0, true, false};
  EXPECT_EQ(mirror.azimuth(30), -30);

  const auto s = ramp(50);
  const auto rotated = rotate_audio(foa_encode(s, 10, 20), quarter);
  const auto direct = foa_encode(s, 100, 20);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(rotated[c], direct[c]) << "channel " << c;
  const auto a = foa_encode(s, 10, 20);
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(rotated[1][i], -a[2][i]);
    EXPECT_EQ(rotated[2][i], a[1][i]);
  }
}

TEST(Rotation, SampleExactForAllElementsOnRandomAngles) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> az(-180, 179), el(-45, 45);
  const auto s = ramp(40);
  for (int g = 0; g < Rotation::kGroupSize; ++g) {
    const auto r = Rotation::from_index(g);
    for (int t = 0; t < 20; ++t) {
      const int a = az(rng), e = el(rng);
      const auto lhs = rotate_audio(foa_encode(s, a, e), r);
      const auto rhs = foa_encode(s, r.azimuth(a), r.elevation(e));
      for (int c = 0; c < 4; ++c)
        ASSERT_EQ(lhs[c], rhs[c]) << r.describe() << " az " << a << " el " << e << " ch " << c;
    }
  }
}

TEST(Rotation, IdentityLeavesClipUnchanged) {
  const auto clip = render_scene({{2, 3, 5, 40, 10, 0}}, 20, 5, 20.0);
  const auto out = rotate_foa_augment(clip, Rotation{});
  EXPECT_EQ(out.audio, clip.audio);
  EXPECT_EQ(out.labels, clip.labels);
}

TEST(Rotation, CartesianVectorsFollowAngles) {
  for (int g = 0; g < 16; ++g) {
    const auto r = Rotation::from_index(g);
    const auto v = r.apply(to_cartesian(37, -12));
    const auto w = to_cartesian(r.azimuth(37), r.elevation(-12));
    for (int k = 0; k < 3; ++k) EXPECT_EQ(v[k], w[k]);
  }
}

TEST(Synth, SingleEventFramesAndLabels) {
  // 1 s event starting at t = 2 s.
  const auto clip = render_scene({{3, 20, 10, 60, -30, 0}}, 50, 1);
  ASSERT_EQ(clip.labels.size(), 10u);
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(clip.labels[i].frame, 20 + i);
    EXPECT_EQ(clip.labels[i].cls, 3);
    EXPECT_EQ(clip.labels[i].azimuth, 60);
    EXPECT_EQ(clip.labels[i].elevation, -30);
  }
  // Silence outside the event when noise is off.
  for (std::size_t i = 0; i < 20u * kLabelHopSamples; ++i) ASSERT_EQ(clip.audio[0][i], 0.0f);
  for (std::size_t i = 30u * kLabelHopSamples; i < clip.num_samples(); ++i)
    ASSERT_EQ(clip.audio[0][i], 0.0f);
  double e = 0;
  for (std::size_t i = 20u * kLabelHopSamples; i < 30u * kLabelHopSamples; ++i)
    e += clip.audio[0][i] * clip.audio[0][i];
  EXPECT_NEAR(std::sqrt(e / (10.0 * kLabelHopSamples)), kEventRms, 1e-4);
}

TEST(Synth, ZeroRateGivesSilentClipsAndEmptyLabels) {
  SceneSpec spec;
  spec.event_rate = 0;
  spec.clip_seconds = 4;
  const auto c = synth_clip(spec, "train", 0);
  EXPECT_TRUE(c.clip.labels.empty());
  for (const auto& ch : c.clip.audio)
    for (float v : ch) ASSERT_EQ(v, 0.0f);
}

TEST(Synth, PolyphonyCapAndTrackIds) {
  SceneSpec spec;
  spec.event_rate = 3.0;
  spec.clip_seconds = 30;
  for (int i = 0; i < 4; ++i) {
    const auto c = synth_clip(spec, "train", i);
    EXPECT_GT(c.placement.rejected, 0);
    const auto frames = rows_by_frame(c.clip.labels, c.clip.n_frames);
    for (const auto& f : frames) {
      ASSERT_LE(f.size(), 2u);
      if (f.size() == 2) {
        EXPECT_NE(f[0].track, f[1].track);
      }
      for (const auto& r : f) {
        EXPECT_GE(r.azimuth, -180);
        EXPECT_LT(r.azimuth, 180);
        EXPECT_GE(r.elevation, -45);
        EXPECT_LE(r.elevation, 45);
        EXPECT_LT(r.track, 2);
      }
    }
  }
  spec.max_polyphony = 1;
  const auto c = synth_clip(spec, "train", 0);
  for (const auto& f : rows_by_frame(c.clip.labels, c.clip.n_frames)) ASSERT_LE(f.size(), 1u);
}

TEST(Synth, FirstFreeTrackAssignment) {
  SceneSpec spec;
  spec.event_rate = 1.0;
  const auto c = synth_clip(spec, "train", 3);
  // Track 1 is only used when track 0 is busy somewhere in the event's span.
  int on_track1 = 0;
  for (const auto& e : c.placement.events)
    if (e.track == 1) {
      ++on_track1;
      bool overlaps = false;
      for (const auto& o : c.placement.events)
        if (o.track == 0 && o.onset_frame < e.onset_frame + e.n_frames &&
            e.onset_frame < o.onset_frame + o.n_frames)
          overlaps = true;
      EXPECT_TRUE(overlaps);
    }
  EXPECT_GT(on_track1, 0);
}

TEST(Synth, Deterministic) {
  SceneSpec spec;
  spec.clip_seconds = 8;
  const auto a = synth_clip(spec, "test", 2), b = synth_clip(spec, "test", 2);
  EXPECT_EQ(a.clip.audio, b.clip.audio);
  EXPECT_EQ(a.clip.labels, b.clip.labels);
  const auto c = synth_clip(spec, "test", 3);
  EXPECT_NE(a.clip.audio[0], c.clip.audio[0]);
}

TEST(Synth, RejectsMovingSources) {
  SceneSpec spec;
  spec.azimuth_velocity = 5;
  EXPECT_THROW(synth_clip(spec, "train", 0), ConfigError);
}

TEST(Segment, CountsAndPadding) {
  const auto long_clip = render_scene({}, 600, 1);
  EXPECT_EQ(segment_clips(long_clip).size(), 15u);

  const auto clip = render_scene({{1, 35, 15, 0, 0, 0}}, 50, 1);
  const auto segs = segment_clips(clip);
  ASSERT_EQ(segs.size(), 2u);
  for (const auto& s : segs) {
    EXPECT_EQ(s.num_samples(), static_cast<std::size_t>(kSegmentSamples));
    EXPECT_EQ(s.n_frames, kSegmentFrames);
  }
  EXPECT_EQ(segs[0].labels.size(), 5u);
  EXPECT_EQ(segs[1].labels.size(), 10u);
  EXPECT_EQ(segs[1].labels.front().frame, 0);
  for (std::size_t i = 24000; i < static_cast<std::size_t>(kSegmentSamples); ++i)
    ASSERT_EQ(segs[1].audio[0][i], 0.0f);
  for (std::size_t i = 0; i < 24000; ++i)
    ASSERT_EQ(segs[1].audio[0][i], clip.audio[0][kSegmentSamples + i]);
}

TEST(Labels, CsvRoundTripAndHeader) {
  std::vector<LabelRow> rows{{3, 1, 0, -20, 10}, {1, 4, 1, 179, -45}, {1, 2, 0, -180, 45}};
  std::ostringstream os;
  write_label_csv(os, rows);
  EXPECT_EQ(os.str(), "1,2,0,-180,45\n1,4,1,179,-45\n3,1,0,-20,10\n");
  std::istringstream is("frame,class,track,azimuth,elevation\n" + os.str());
  auto back = parse_label_csv(is);
  sort_rows(rows);
  EXPECT_EQ(back, rows);
  std::istringstream bad("1,2,3\n");
  EXPECT_THROW(parse_label_csv(bad), FormatError);
}

TEST(Wav, RoundTripWithinQuantization) {
  const auto dir = temp_dir("wav");
  const auto clip = render_scene({{0, 0, 10, 30, 10, 0}}, 10, 2, 15.0);
  write_wav((dir / "a.wav").string(), clip.audio);
  const auto w = read_wav((dir / "a.wav").string());
  EXPECT_EQ(w.sample_rate, kSampleRate);
  for (int c = 0; c < 4; ++c) {
    ASSERT_EQ(w.audio[c].size(), clip.audio[c].size());
    for (std::size_t i = 0; i < clip.audio[c].size(); ++i)
      ASSERT_NEAR(w.audio[c][i], clip.audio[c][i], 0.5 / kPcm16Scale + 1e-7);
  }
  std::ofstream(dir / "junk.wav") << "not a wav";
  EXPECT_THROW(read_wav((dir / "junk.wav").string()), FormatError);
  EXPECT_THROW(read_wav((dir / "none.wav").string()), MissingFileError);
}

TEST(Dataset, SynthTreeIsByteIdenticalAcrossRuns) {
  DatasetSpec spec;
  spec.scene.clip_seconds = 5;
  spec.scene.seed = 7;
  spec.splits = {{"train", 2}, {"test", 1}};
  const DatasetLayout a(temp_dir("ds_a")), b(temp_dir("ds_b"));
  synth_dataset(a, spec);
  synth_dataset(b, spec);
  EXPECT_EQ(a.clips("train"), (std::vector<std::string>{"train_0000", "train_0001"}));
  for (const auto& id : a.clips("train")) {
    EXPECT_EQ(slurp(a.wav("train", id)), slurp(b.wav("train", id)));
    EXPECT_EQ(slurp(a.csv("train", id)), slurp(b.csv("train", id)));
  }
  EXPECT_EQ(slurp(a.manifest()), slurp(b.manifest()));
  EXPECT_EQ(read_manifest(a).at("split.train"), "2");
  const auto segs = load_segments(a, "train");
  EXPECT_EQ(segs.size(), 4u);
  EXPECT_EQ(segs[1].id, "train_0000#1");
}
