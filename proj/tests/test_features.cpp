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
#include <numbers>
#include <random>

#include "seld/data/segment.hpp"
#include "seld/data/synth.hpp"
#include "seld/features/featurize.hpp"

using namespace seld;
using namespace seld::features;
using data::FoaClip;

namespace {

std::vector<float> sine(double freq, std::size_t n, double amp = 1.0) {
  std::vector<float> s(n);
  for (std::size_t i = 0; i < n; ++i)
    s[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * freq * i / 24000.0));
  return s;
}

std::vector<float> noise(std::size_t n, std::uint64_t seed, double sd = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0, sd);
  std::vector<float> s(n);
  for (auto& v : s) v = static_cast<float>(g(rng));
  return s;
}

std::array<std::vector<float>, 4> noise4(std::size_t n, std::uint64_t seed) {
  return {noise(n, seed), noise(n, seed + 1), noise(n, seed + 2), noise(n, seed + 3)};
}

double angle_deg(const data::Vec3& a, const data::Vec3& b) {
  double d = 0, na = 0, nb = 0;
  for (int k = 0; k < 3; ++k) {
    d += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  return std::acos(std::clamp(d / std::sqrt(na * nb), -1.0, 1.0)) * 180 / std::numbers::pi;
}

// Mel-energy-weighted mean intensity direction of a clip.
data::Vec3 mean_intensity(const FeatureClip& f) {
  data::Vec3 v{0, 0, 0};
  for (int t = 0; t < f.frames; ++t)
    for (int m = 0; m < f.mels; ++m) {
      const double w = std::pow(10.0, f.at(0, t, m) / 10.0);
      for (int a = 0; a < 3; ++a) v[a] += w * f.at(4 + a, t, m);
    }
  return v;
}

}  // namespace

TEST(Stft, FrameCountLaw) {
  EXPECT_EQ(stft_frame_count(96000), 160);
  EXPECT_EQ(stft_frame_count(10), 1);
  EXPECT_EQ(stft_frame_count(0), 1);
  Stft stft;
  for (std::size_t L : {1u, 599u, 600u, 601u, 1200u, 5000u, 96000u}) {
    const auto s = stft(std::vector<float>(L, 0.1f));
    EXPECT_EQ(s.frames, static_cast<int>(std::max<std::size_t>(1, (L + 599) / 600))) << L;
    EXPECT_EQ(s.bins, 513);
  }
}

TEST(Stft, ZeroSignalGivesZeroSpectra) {
  Stft stft;
  const auto s = stft(std::vector<float>(3000, 0.0f));
  for (const auto& c : s.data) ASSERT_EQ(std::abs(c), 0.0);
}

TEST(Stft, MatchesDirectDftOfWindowedFrame) {
  const auto x = noise(5000, 3);
  Stft stft;
  const auto s = stft(x);
  const auto w = hann_periodic(1024);
  for (int t : {0, 3, 8}) {
    for (int k : {0, 1, 17, 256, 512}) {
      std::complex<double> acc = 0;
      for (int n = 0; n < 1024; ++n) {
        const long j = t * 600L - 512 + n;
        const double v = (j >= 0 && j < 5000) ? x[j] : 0.0;
        acc += w[n] * v * std::polar(1.0, -2 * std::numbers::pi * k * n / 1024.0);
      }
      EXPECT_NEAR(std::abs(s.at(t, k) - acc), 0.0, 1e-9) << t << "," << k;
    }
  }
}

TEST(Stft, BinCenteredSineConcentratesEnergy) {
  const int k = 40;
  Stft stft;
  const auto s = stft(sine(k * 24000.0 / 1024, 24000));
  const int t = 10;
  const double peak = std::norm(s.at(t, k));
  for (int j = 0; j < 513; ++j) {
    if (std::abs(j - k) <= 1) continue;
    EXPECT_LT(10 * std::log10(std::norm(s.at(t, j)) / peak + 1e-300), -30.0) << j;
  }
  EXPECT_GT(peak, std::norm(s.at(t, k + 1)));
}

TEST(MelBank, NonnegativeIncreasingAndCovering) {
  const auto bank = mel_filterbank();
  ASSERT_EQ(bank.n_bins, 513);
  ASSERT_EQ(bank.n_mels, 256);
  for (double w : bank.weights) ASSERT_GE(w, 0.0);
  for (int m = 1; m < 256; ++m) EXPECT_GT(bank.centers_hz[m], bank.centers_hz[m - 1]);
  for (int b = 0; b < 513; ++b) {
    double sum = 0;
    for (int m = 0; m < 256; ++m) sum += bank.at(b, m);
    EXPECT_GT(sum, 0.0) << "bin " << b;
  }
  // Flat power spectrum: brute-force dot product per filter.
  for (int m = 0; m < 256; ++m) {
    double acc = 0;
    for (int b = 0; b < 513; ++b) acc += 1.0 * bank.at(b, m);
    EXPECT_GT(acc, 0.0) << "filter " << m;
  }
  const auto again = mel_filterbank();
  EXPECT_EQ(again.weights, bank.weights);
}

TEST(MelBank, WideFiltersPeakNearOne) {
  // High filters span many bins, where the bin average approaches the
  // unit-peak triangle.
  const auto bank = mel_filterbank();
  double peak = 0;
  for (int b = 0; b < 513; ++b) peak = std::max(peak, bank.at(b, 250));
  EXPECT_NEAR(peak, 1.0, 0.1);
}

TEST(LogMel, SilenceFloor) {
  Featurizer fz;
  const std::array<std::vector<float>, 4> z{std::vector<float>(96000, 0.0f),
                                            std::vector<float>(96000, 0.0f),
                                            std::vector<float>(96000, 0.0f),
                                            std::vector<float>(96000, 0.0f)};
  const auto f = fz.featurize(z);
  EXPECT_EQ(f.frames, 160);
  for (int c = 0; c < 4; ++c)
    for (float v : f.plane(c)) ASSERT_FLOAT_EQ(v, -100.0f);
  for (int c = 4; c < 7; ++c)
    for (float v : f.plane(c)) ASSERT_EQ(v, 0.0f);
}

TEST(LogMel, DoublingAmplitudeAddsSixDecibels) {
  Featurizer fz;
  auto a = noise4(12000, 5);
  auto b = a;
  for (auto& ch : b)
    for (auto& v : ch) v *= 2.0f;
  const auto la = logmel(fz.spectra(a), fz.bank_weights());
  const auto lb = logmel(fz.spectra(b), fz.bank_weights());
  const double expect = 10 * std::log10(4.0);
  for (int c = 0; c < 4; ++c) {
    const Eigen::ArrayXXd d = lb[c].array() - la[c].array();
    EXPECT_NEAR(d.mean(), expect, 1e-3);
    EXPECT_LT(d.maxCoeff() - d.minCoeff(), 1e-6);
  }
}

TEST(Intensity, UnitNormBound) {
  Featurizer fz;
  const auto f = fz.featurize(noise4(24000, 9));
  for (int t = 0; t < f.frames; ++t)
    for (int m = 0; m < f.mels; ++m) {
      double n = 0;
      for (int a = 0; a < 3; ++a) n += f.at(4 + a, t, m) * f.at(4 + a, t, m);
      ASSERT_LE(std::sqrt(n), 1.0 + 1e-6);
    }
}

TEST(Intensity, AxisAndDiagonalSources) {
  Featurizer fz;
  const auto mono = noise(24000, 21);
  const struct {
    int az, el;
  } cases[] = {{0, 0}, {90, 0}, {45, 30}};
  for (const auto& c : cases) {
    const auto f = fz.featurize(data::foa_encode(mono, c.az, c.el));
    const auto g = data::foa_gains(c.az, c.el);
    // Active bins: within 30 dB of the loudest W bin.
    double top = -1e9;
    for (float v : f.plane(0)) top = std::max<double>(top, v);
    int checked = 0;
    for (int t = 0; t < f.frames; ++t)
      for (int m = 0; m < f.mels; ++m) {
        if (f.at(0, t, m) < top - 30) continue;
        ++checked;
        for (int a = 0; a < 3; ++a) ASSERT_NEAR(f.at(4 + a, t, m), g[1 + a], 0.05);
      }
    EXPECT_GT(checked, 1000);
  }
}

TEST(Intensity, DirectionRecoveredForRandomDoas) {
  Featurizer fz;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> az(-180, 179), el(-45, 45);
  for (int i = 0; i < 20; ++i) {
    const int a = az(rng), e = el(rng);
    const auto clip = data::render_scene({{i % 14, 0, 40, a, e, 0}}, 40, 100 + i, 20.0);
    const auto f = fz(clip);
    EXPECT_LT(angle_deg(mean_intensity(f), data::to_cartesian(a, e)), 5.0) << a << "," << e;
  }
}

TEST(Intensity, SynthesizedSegmentsMatchLabels) {
  data::SceneSpec spec;
  spec.clip_seconds = 12;
  spec.max_polyphony = 1;
  spec.event_rate = 0.3;
  Featurizer fz;
  int checked = 0;
  for (int i = 0; i < 3; ++i) {
    const auto c = data::synth_clip(spec, "train", i);
    for (const auto& seg : data::segment_clips(c.clip)) {
      if (seg.labels.empty()) continue;
      // A single-source segment with one static event.
      const auto& r = seg.labels.front();
      bool single = true;
      for (const auto& q : seg.labels) single &= q.azimuth == r.azimuth && q.elevation == r.elevation;
      if (!single) continue;
      const auto f = fz(seg);
      EXPECT_LT(angle_deg(mean_intensity(f), data::to_cartesian(r.azimuth, r.elevation)), 5.0);
      ++checked;
    }
  }
  EXPECT_GT(checked, 0);
}

TEST(Featurize, ShapesAndDeterminism) {
  Featurizer fz;
  const auto clip = data::render_scene({{5, 2, 20, -70, 15, 0}}, 40, 3, 12.0);
  const auto a = fz(clip), b = fz(clip);
  EXPECT_EQ(a.frames, 160);
  EXPECT_EQ(a.mels, 256);
  EXPECT_EQ(a.data.size(), 7u * 160 * 256);
  EXPECT_EQ(a.data, b.data);
}

TEST(Featurize, StandardizedTrainingStats) {
  Featurizer fz;
  data::SceneSpec spec;
  spec.clip_seconds = 4;
  std::vector<FeatureClip> clips;
  FeatureStatsAccumulator acc;
  for (int i = 0; i < 4; ++i) {
    clips.push_back(fz(data::synth_clip(spec, "train", i).clip));
    acc.add(clips.back());
  }
  const auto st = acc.finish(fz.config().hash());
  for (auto& c : clips) standardize(c, st);
  for (int ch = 0; ch < 7; ++ch) {
    double s = 0, q = 0, n = 0;
    for (const auto& c : clips)
      for (float v : c.plane(ch)) {
        s += v;
        q += double(v) * v;
        ++n;
      }
    const double m = s / n;
    EXPECT_LT(std::abs(m), 1e-3) << ch;
    EXPECT_NEAR(std::sqrt(q / n - m * m), 1.0, 1e-2) << ch;
  }
  const auto dir = std::filesystem::temp_directory_path() / "seld_test_stats.bin";
  st.save(dir.string());
  const auto back = FeatureStats::load(dir.string());
  EXPECT_EQ(back.mean, st.mean);
  EXPECT_EQ(back.stddev, st.stddev);
  EXPECT_EQ(back.config_hash, st.config_hash);
}

TEST(Featurize, RotationInFeatureSpaceEqualsRotatedAudio) {
  Featurizer fz;
  const auto clip =
      data::render_scene({{1, 0, 20, 33, 12, 0}, {7, 10, 30, -120, -40, 1}}, 40, 8, 18.0);
  const auto base = fz(clip);
  for (int g = 0; g < data::Rotation::kGroupSize; ++g) {
    const auto r = data::Rotation::from_index(g);
    const auto direct = fz(data::rotate_foa_augment(clip, r));
    const auto moved = rotate_features(base, r);
    ASSERT_EQ(direct.data, moved.data) << r.describe();
  }
}

TEST(SpecAugment, IdentityFullMaskAndBound) {
  Featurizer fz;
  const auto base = fz.featurize(noise4(96000, 2));
  std::mt19937_64 rng(1);
  auto same = base;
  spec_augment(same, {0, 0, 8, 32}, rng);
  EXPECT_EQ(same.data, base.data);

  auto full = base;
  apply_masks(full, {{true, 0, 160}});
  for (float v : full.data) ASSERT_EQ(v, 0.0f);

  // Start from nonzero data so zeros mark masked cells.
  FeatureClip ones = base;
  std::fill(ones.data.begin(), ones.data.end(), 1.0f);
  const double bound = (2.0 * 8 * 256 + 2.0 * 32 * 160) / (160.0 * 256);
  for (int trial = 0; trial < 200; ++trial) {
    auto m = ones;
    spec_augment(m, {}, rng);
    std::size_t zeros = 0;
    for (float v : m.plane(0)) zeros += v == 0.0f;
    ASSERT_LE(double(zeros) / m.plane_size(), bound);
    for (int c = 1; c < 7; ++c)
      for (std::size_t i = 0; i < m.plane_size(); ++i)
        ASSERT_EQ(m.plane(c)[i] == 0.0f, m.plane(0)[i] == 0.0f);
  }

  auto masked = base;
  const std::vector<Mask> masks{{true, 10, 5}, {false, 100, 20}};
  apply_masks(masked, masks);
  for (int c = 0; c < 7; ++c)
    for (int t = 0; t < 160; ++t)
      for (int f = 0; f < 256; ++f) {
        const bool hit = (t >= 10 && t < 15) || (f >= 100 && f < 120);
        if (hit) ASSERT_EQ(masked.at(c, t, f), 0.0f);
        else ASSERT_EQ(masked.at(c, t, f), base.at(c, t, f));
      }
}

TEST(FeatureCache, RoundTripAndHashCheck) {
  Featurizer fz;
  auto f = fz.featurize(noise4(6000, 12), "x#0");
  const auto path = (std::filesystem::temp_directory_path() / "seld_test_x.feat").string();
  save_feature_clip(path, f, fz.config().hash());
  const auto g = load_feature_clip(path, fz.config().hash());
  EXPECT_EQ(g.id, "x#0");
  EXPECT_EQ(g.data, f.data);
  EXPECT_THROW(load_feature_clip(path, 12345), ConfigError);
  EXPECT_THROW(load_feature_clip(path + ".none", 0), MissingFileError);
}
