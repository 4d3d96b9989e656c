// seld/features/featurize.hpp

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

// Branch inputs for a 4 s FOA segment. A FeatureClip stores seven planes of
// [T, n_mels]: log-mel of W, X, Y, Z followed by the mel-space intensity
// vector (Ix, Iy, Iz). The SED branch reads planes 0..3, the DoA branch all
// seven.
//
// Cache file (.feat), little-endian:
//   "SELDFEAT", u32 version, u64 feature-config hash,
//   u32 id length + id bytes, u32 channels, u32 frames, u32 mels,
//   channels*frames*mels float32 values (raw, not standardized)
//
// Statistics file (feature_stats.bin):
//   "SELDSTAT", u32 version, u64 feature-config hash, u64 frame count,
//   u32 channels, channels x f64 mean, channels x f64 std

#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "seld/data/augment.hpp"
#include "seld/data/foa.hpp"
#include "seld/features/mel.hpp"
#include "seld/features/stft.hpp"

namespace seld::features {

inline constexpr int kSedChannels = 4;
inline constexpr int kDoaChannels = 7;
inline constexpr double kLogEps = 1e-10;
inline constexpr double kIntensityEps = 1e-8;

struct FeatureConfig {
  int sample_rate = data::kSampleRate;
  int fft_size = kFftSize;
  int hop = kHop;
  int n_mels = 256;
  double f_lo = 0.0;
  double f_hi = 12000.0;

  std::string canonical() const {
    std::ostringstream os;
    os << "sr=" << sample_rate << ";fft=" << fft_size << ";hop=" << hop << ";mels=" << n_mels
       << ";flo=" << f_lo << ";fhi=" << f_hi << ";mel=htk-binavg;log_eps=1e-10;iv_eps=1e-8";
    return os.str();
  }
  std::uint64_t hash() const { return fnv1a(canonical()); }
};

struct FeatureClip {
  std::string id;
  int frames = 0;
  int mels = 0;
  std::vector<float> data;  // [7, frames, mels]

  std::size_t plane_size() const { return static_cast<std::size_t>(frames) * mels; }
  std::span<float> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const float> plane(int c) const {
    return {data.data() + c * plane_size(), plane_size()};
  }
  float at(int c, int t, int f) const {
    return data[c * plane_size() + static_cast<std::size_t>(t) * mels + f];
  }
};

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline RowMat bank_matrix(const MelBank& bank) {
  return Eigen::Map<const RowMat>(bank.weights.data(), bank.n_bins, bank.n_mels);
}

/// 10 log10(|S|^2 W + eps) per channel: four [T, n_mels] matrices.
inline std::array<RowMat, 4> logmel(const std::array<Spectrogram, 4>& S, const RowMat& bank) {
  const int T = S[0].frames, B = S[0].bins;
  std::array<RowMat, 4> out;
  RowMat P(T, B);
  for (int c = 0; c < 4; ++c) {
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < B; ++k) P(t, k) = std::norm(S[c].at(t, k));
    out[c] = (P * bank).unaryExpr([](double x) { return 10.0 * std::log10(x + kLogEps); });
  }
  return out;
}

/// Mel-space intensity Re{conj(W) [X, Y, Z]} W_mel, normalized per (t, mel)
/// by its L2 norm + 1e-8.
inline std::array<RowMat, 3> foa_intensity(const std::array<Spectrogram, 4>& S,
                                           const RowMat& bank) {
  const int T = S[0].frames, B = S[0].bins;
  std::array<RowMat, 3> I;
  RowMat P(T, B);
  for (int a = 0; a < 3; ++a) {
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < B; ++k) P(t, k) = std::real(std::conj(S[0].at(t, k)) * S[1 + a].at(t, k));
    I[a] = P * bank;
  }
  const RowMat norm =
      (I[0].array().square() + I[1].array().square() + I[2].array().square()).sqrt() +
      kIntensityEps;
  for (auto& m : I) m = m.array() / norm.array();
  return I;
}

/// STFT, mel projection, log compression and intensity vectors. Holds an
/// FFTW plan, so use one instance per thread.
class Featurizer {
 public:
  explicit Featurizer(FeatureConfig cfg = {})
      : cfg_(cfg),
        stft_(cfg.fft_size, cfg.hop),
        bank_(mel_filterbank(cfg.n_mels, cfg.sample_rate, cfg.fft_size / 2 + 1, cfg.f_lo,
                             cfg.f_hi)),
        w_(bank_matrix(bank_)) {}

  const FeatureConfig& config() const { return cfg_; }
  const MelBank& bank() const { return bank_; }
  const RowMat& bank_weights() const { return w_; }

  std::array<Spectrogram, 4> spectra(const std::array<std::vector<float>, 4>& audio) const {
    const std::size_t L = audio[0].size();
    for (const auto& ch : audio)
      if (ch.size() != L) throw FormatError("featurize: FOA channels differ in length");
    std::array<Spectrogram, 4> S;
    for (int c = 0; c < 4; ++c) S[c] = stft_(audio[c]);
    return S;
  }

  FeatureClip operator()(const data::FoaClip& clip) const { return featurize(clip.audio, clip.id); }

  FeatureClip featurize(const std::array<std::vector<float>, 4>& audio,
                        const std::string& id = "") const {
    const auto S = spectra(audio);
    const auto L = logmel(S, w_);
    const auto I = foa_intensity(S, w_);
    FeatureClip out;
    out.id = id;
    out.frames = S[0].frames;
    out.mels = bank_.n_mels;
    out.data.resize(static_cast<std::size_t>(kDoaChannels) * out.plane_size());
    for (int c = 0; c < kDoaChannels; ++c) {
      const RowMat& src = c < 4 ? L[c] : I[c - 4];
      auto dst = out.plane(c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<float>(src.data()[i]);
    }
    return out;
  }

 private:
  FeatureConfig cfg_;
  mutable Stft stft_;
  MelBank bank_;
  RowMat w_;
};

/// Per-channel mean and standard deviation over a set of clips.
struct FeatureStats {
  std::uint64_t config_hash = 0;
  std::uint64_t frames = 0;
  std::vector<double> mean, stddev;

  void save(const std::string& path) const {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw MissingFileError("cannot write " + path);
    os.write("SELDSTAT", 8);
    const std::uint32_t version = 1, ch = static_cast<std::uint32_t>(mean.size());
    os.write(reinterpret_cast<const char*>(&version), 4);
    os.write(reinterpret_cast<const char*>(&config_hash), 8);
    os.write(reinterpret_cast<const char*>(&frames), 8);
    os.write(reinterpret_cast<const char*>(&ch), 4);
    os.write(reinterpret_cast<const char*>(mean.data()), 8 * ch);
    os.write(reinterpret_cast<const char*>(stddev.data()), 8 * ch);
  }

  static FeatureStats load(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw MissingFileError("missing feature statistics " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, "SELDSTAT", 8) != 0)
      throw FormatError(path + ": not a feature statistics file");
    FeatureStats s;
    std::uint32_t version = 0, ch = 0;
    is.read(reinterpret_cast<char*>(&version), 4);
    is.read(reinterpret_cast<char*>(&s.config_hash), 8);
    is.read(reinterpret_cast<char*>(&s.frames), 8);
    is.read(reinterpret_cast<char*>(&ch), 4);
    if (!is || version != 1 || ch != kDoaChannels) throw FormatError(path + ": bad header");
    s.mean.resize(ch);
    s.stddev.resize(ch);
    is.read(reinterpret_cast<char*>(s.mean.data()), 8 * ch);
    is.read(reinterpret_cast<char*>(s.stddev.data()), 8 * ch);
    if (!is) throw FormatError(path + ": truncated");
    return s;
  }
};

class FeatureStatsAccumulator {
 public:
  void add(const FeatureClip& f) {
    for (int c = 0; c < kDoaChannels; ++c) {
      double s = 0, q = 0;
      for (float v : f.plane(c)) {
        s += v;
        q += static_cast<double>(v) * v;
      }
      sum_[c] += s;
      sq_[c] += q;
    }
    count_ += f.plane_size();
    frames_ += static_cast<std::uint64_t>(f.frames);
  }

  FeatureStats finish(std::uint64_t config_hash) const {
    if (count_ == 0) throw ContractError("feature statistics need at least one clip");
    FeatureStats s;
    s.config_hash = config_hash;
    s.frames = frames_;
    for (int c = 0; c < kDoaChannels; ++c) {
      const double m = sum_[c] / count_;
      const double var = std::max(0.0, sq_[c] / count_ - m * m);
      s.mean.push_back(m);
      s.stddev.push_back(std::max(std::sqrt(var), 1e-8));
    }
    return s;
  }

 private:
  std::array<double, kDoaChannels> sum_{}, sq_{};
  std::uint64_t count_ = 0, frames_ = 0;
};

inline void standardize(FeatureClip& f, const FeatureStats& s) {
  for (int c = 0; c < kDoaChannels; ++c) {
    const double m = s.mean[c], inv = 1.0 / s.stddev[c];
    for (auto& v : f.plane(c)) v = static_cast<float>((v - m) * inv);
  }
}

/// Applies a rotation-group element to raw features: the X/Y/Z log-mel
/// planes are permuted and the intensity planes undergo the signed
/// permutation. Equals featurizing the rotated audio.
inline FeatureClip rotate_features(const FeatureClip& f, const data::Rotation& r) {
  if (r.is_identity()) return f;
  FeatureClip out = f;
  const auto m = r.axes();
  for (int a = 0; a < 3; ++a) {
    auto src_mel = f.plane(1 + m.src[a]);
    std::copy(src_mel.begin(), src_mel.end(), out.plane(1 + a).begin());
    auto src_iv = f.plane(4 + m.src[a]);
    auto dst_iv = out.plane(4 + a);
    for (std::size_t i = 0; i < src_iv.size(); ++i)
      dst_iv[i] = m.sign[a] < 0 ? -src_iv[i] : src_iv[i];
  }
  return out;
}

struct SpecAugmentConfig {
  int n_time_masks = 2;
  int n_freq_masks = 2;
  int max_t = 8;
  int max_f = 32;
};

struct Mask {
  bool time = true;  // false: frequency band
  int begin = 0;
  int width = 0;
};

inline std::vector<Mask> draw_masks(const SpecAugmentConfig& cfg, int frames, int mels,
                                    std::mt19937_64& rng) {
  std::vector<Mask> masks;
  auto draw = [&](bool time, int n, int max_w, int extent) {
    for (int i = 0; i < n; ++i) {
      const int w = std::uniform_int_distribution<int>(0, std::min(max_w, extent))(rng);
      const int b = std::uniform_int_distribution<int>(0, extent - w)(rng);
      masks.push_back({time, b, w});
    }
  };
  draw(true, cfg.n_time_masks, cfg.max_t, frames);
  draw(false, cfg.n_freq_masks, cfg.max_f, mels);
  return masks;
}

/// Zeroes the masked cells of every plane, so both branch inputs see the
/// same masks.
inline void apply_masks(FeatureClip& f, const std::vector<Mask>& masks) {
  for (const auto& m : masks)
    for (int c = 0; c < kDoaChannels; ++c) {
      auto p = f.plane(c);
      if (m.time) {
        for (int t = m.begin; t < std::min(f.frames, m.begin + m.width); ++t)
          std::fill_n(p.begin() + static_cast<std::ptrdiff_t>(t) * f.mels, f.mels, 0.0f);
      } else {
        for (int t = 0; t < f.frames; ++t)
          for (int k = m.begin; k < std::min(f.mels, m.begin + m.width); ++k)
            p[static_cast<std::size_t>(t) * f.mels + k] = 0.0f;
      }
    }
}

inline void spec_augment(FeatureClip& f, const SpecAugmentConfig& cfg, std::mt19937_64& rng) {
  apply_masks(f, draw_masks(cfg, f.frames, f.mels, rng));
}

inline void save_feature_clip(const std::string& path, const FeatureClip& f,
                              std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw MissingFileError("cannot write " + path);
  os.write("SELDFEAT", 8);
  const std::uint32_t version = 1, idlen = static_cast<std::uint32_t>(f.id.size()),
                      ch = kDoaChannels, T = static_cast<std::uint32_t>(f.frames),
                      M = static_cast<std::uint32_t>(f.mels);
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&config_hash), 8);
  os.write(reinterpret_cast<const char*>(&idlen), 4);
  os.write(f.id.data(), idlen);
  os.write(reinterpret_cast<const char*>(&ch), 4);
  os.write(reinterpret_cast<const char*>(&T), 4);
  os.write(reinterpret_cast<const char*>(&M), 4);
  os.write(reinterpret_cast<const char*>(f.data.data()),
           static_cast<std::streamsize>(f.data.size() * sizeof(float)));
  if (!os) throw FormatError("short write on " + path);
}

/// Throws ConfigError when the file was produced under another feature config.
inline FeatureClip load_feature_clip(const std::string& path, std::uint64_t expected_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingFileError("missing feature cache " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, "SELDFEAT", 8) != 0)
    throw FormatError(path + ": not a feature cache file");
  std::uint32_t version = 0, idlen = 0, ch = 0, T = 0, M = 0;
  std::uint64_t hash = 0;
  is.read(reinterpret_cast<char*>(&version), 4);
  is.read(reinterpret_cast<char*>(&hash), 8);
  if (!is || version != 1) throw FormatError(path + ": unsupported version");
  if (hash != expected_hash)
    throw ConfigError(path + ": feature config hash mismatch; re-run featurize");
  is.read(reinterpret_cast<char*>(&idlen), 4);
  FeatureClip f;
  f.id.resize(idlen);
  is.read(f.id.data(), idlen);
  is.read(reinterpret_cast<char*>(&ch), 4);
  is.read(reinterpret_cast<char*>(&T), 4);
  is.read(reinterpret_cast<char*>(&M), 4);
  if (!is || ch != kDoaChannels) throw FormatError(path + ": bad channel count");
  f.frames = static_cast<int>(T);
  f.mels = static_cast<int>(M);
  f.data.resize(static_cast<std::size_t>(ch) * T * M);
  is.read(reinterpret_cast<char*>(f.data.data()),
          static_cast<std::streamsize>(f.data.size() * sizeof(float)));
  if (!is) throw FormatError(path + ": truncated");
  return f;
}

}  // namespace seld::features
