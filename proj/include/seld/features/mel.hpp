// seld/features/mel.hpp

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

// HTK-scale triangular mel filterbank.
//
// With 256 bands below 12 kHz the low filters are narrower than one FFT bin
// (23.4 Hz), so sampling the triangle at bin centers would leave them empty.
// Instead weight(b, m) is the mean of the unit-peak triangle m over the
// frequency interval [f_b - df/2, f_b + df/2] covered by bin b. Every filter
// is then nonzero and its weights still trace a unit-peak triangle where it
// spans several bins.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "seld/common.hpp"

namespace seld::features {

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Row-major [n_bins, n_mels] weights.
struct MelBank {
  int n_bins = 0;
  int n_mels = 0;
  std::vector<double> weights;
  std::vector<double> centers_hz;  // n_mels

  double at(int bin, int mel) const {
    return weights[static_cast<std::size_t>(bin) * n_mels + mel];
  }
};

namespace detail {

// Integral over [a, b] of the unit-peak triangle (lo, ctr, hi).
inline double triangle_integral(double lo, double ctr, double hi, double a, double b) {
  auto tri = [&](double f) {
    if (f <= lo || f >= hi) return 0.0;
    return f <= ctr ? (f - lo) / (ctr - lo) : (hi - f) / (hi - ctr);
  };
  std::array<double, 5> pts{a, std::clamp(lo, a, b), std::clamp(ctr, a, b), std::clamp(hi, a, b),
                            b};
  std::sort(pts.begin(), pts.end());
  double s = 0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i)
    s += 0.5 * (tri(pts[i]) + tri(pts[i + 1])) * (pts[i + 1] - pts[i]);
  return s;
}

}  // namespace detail

inline MelBank mel_filterbank(int n_mels = 256, int sample_rate = 24000, int n_bins = 513,
                              double f_lo = 0.0, double f_hi = -1.0) {
  if (n_mels <= 0 || n_bins <= 1) throw ConfigError("mel_filterbank: sizes must be positive");
  if (f_hi < 0) f_hi = sample_rate / 2.0;
  if (!(f_lo >= 0 && f_lo < f_hi)) throw ConfigError("mel_filterbank: need 0 <= f_lo < f_hi");
  MelBank bank;
  bank.n_bins = n_bins;
  bank.n_mels = n_mels;
  bank.weights.assign(static_cast<std::size_t>(n_bins) * n_mels, 0.0);
  const double m_lo = hz_to_mel(f_lo), m_hi = hz_to_mel(f_hi);
  std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(m_lo + (m_hi - m_lo) * static_cast<double>(i) / (n_mels + 1));
  const double df = sample_rate / (2.0 * (n_bins - 1));
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[m], ctr = edges[m + 1], hi = edges[m + 2];
    bank.centers_hz.push_back(ctr);
    const int b0 = std::max(0, static_cast<int>(std::floor(lo / df - 0.5)));
    const int b1 = std::min(n_bins - 1, static_cast<int>(std::ceil(hi / df + 0.5)));
    for (int b = b0; b <= b1; ++b) {
      const double a = (b - 0.5) * df;
      bank.weights[static_cast<std::size_t>(b) * n_mels + m] =
          detail::triangle_integral(lo, ctr, hi, a, a + df) / df;
    }
  }
  return bank;
}

}  // namespace seld::features
