// seld/features/stft.hpp

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

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <span>
#include <vector>

#include "seld/common.hpp"

namespace seld::features {

inline constexpr int kFftSize = 1024;
inline constexpr int kHop = 600;
inline constexpr int kBins = kFftSize / 2 + 1;

/// Periodic Hann window: w[n] = 0.5 - 0.5 cos(2 pi n / N).
inline std::vector<double> hann_periodic(int n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
  return w;
}

/// Frames for L samples with centered windows: ceil(L / hop), at least 1.
inline int stft_frame_count(std::size_t length, int hop = kHop) {
  const auto h = static_cast<std::size_t>(hop);
  return static_cast<int>(std::max<std::size_t>(1, (length + h - 1) / h));
}

/// Spectrogram of one channel: frames x bins, row-major.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  std::vector<std::complex<double>> data;

  std::complex<double> at(int t, int k) const {
    return data[static_cast<std::size_t>(t) * bins + k];
  }
};

/// Real-input STFT. Frame t is centered on sample t * hop, with zeros outside
/// the signal. Holds an FFTW plan; not thread-safe, one instance per thread.
class Stft {
 public:
  explicit Stft(int fft_size = kFftSize, int hop = kHop)
      : n_(fft_size), hop_(hop), window_(hann_periodic(fft_size)) {
    if (fft_size <= 0 || hop <= 0) throw ConfigError("STFT sizes must be positive");
    in_ = static_cast<double*>(fftw_malloc(sizeof(double) * n_));
    out_ = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n_ / 2 + 1)));
    plan_ = fftw_plan_dft_r2c_1d(n_, in_, out_, FFTW_ESTIMATE);
  }
  Stft(const Stft&) = delete;
  Stft& operator=(const Stft&) = delete;
  ~Stft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }

  int fft_size() const { return n_; }
  int hop() const { return hop_; }
  int bins() const { return n_ / 2 + 1; }

  Spectrogram operator()(std::span<const float> x) {
    Spectrogram s;
    s.frames = stft_frame_count(x.size(), hop_);
    s.bins = bins();
    s.data.resize(static_cast<std::size_t>(s.frames) * s.bins);
    const long long len = static_cast<long long>(x.size());
    for (int t = 0; t < s.frames; ++t) {
      const long long start = static_cast<long long>(t) * hop_ - n_ / 2;
      for (int i = 0; i < n_; ++i) {
        const long long j = start + i;
        in_[i] = (j >= 0 && j < len) ? window_[i] * static_cast<double>(x[j]) : 0.0;
      }
      fftw_execute(plan_);
      for (int k = 0; k < s.bins; ++k)
        s.data[static_cast<std::size_t>(t) * s.bins + k] = {out_[k][0], out_[k][1]};
    }
    return s;
  }

 private:
  int n_, hop_;
  std::vector<double> window_;
  double* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan plan_{};
};

}  // namespace seld::features
