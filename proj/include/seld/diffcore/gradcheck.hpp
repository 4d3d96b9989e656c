// seld/diffcore/gradcheck.hpp

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

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "seld/diffcore/tensor.hpp"

namespace seld::diff {

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t coords_checked = 0;
  // Location of the worst coordinate: input index and flat offset.
  std::size_t worst_input = 0;
  std::size_t worst_coord = 0;
  // Coordinates re-evaluated at smaller steps (see `retry_above`).
  std::size_t kink_retries = 0;
};

/// Central-difference check of a scalar function of several tensors.
///
/// `f` must read the current values of `inputs` (it captures the handles).
/// Each coordinate contributes |analytic - numeric| / max(1, |analytic|,
/// |numeric|). When `max_coords` is nonzero and smaller than the total
/// coordinate count, that many coordinates are drawn uniformly over all
/// inputs together with a fixed seed.
///
/// With `retry_above` > 0, a coordinate whose error exceeds it is
/// re-differenced at h/10 and h/100 and keeps the smallest error. A
/// piecewise-linear kink (relu, max pool) inside [x-h, x+h] corrupts the
/// difference at h but not at a step smaller than the kink distance.
inline GradCheckResult grad_check(const std::function<Tensor<double>()>& f,
                                  std::vector<Tensor<double>> inputs, double h = 1e-5,
                                  std::size_t max_coords = 0, std::uint64_t seed = 1,
                                  double retry_above = 0) {
  for (auto& x : inputs) {
    x.set_requires_grad(true);
    x.zero_grad();
  }
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    Tensor<double> y = f();
    if (y.size() != 1)
      throw ContractError("grad_check: function output has shape " + to_string(y.shape()) +
                          ", expected a scalar");
    tape.backward(y);
  }
  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) coords.emplace_back(k, i);
  if (max_coords > 0 && coords.size() > max_coords) {
    std::mt19937_64 rng(seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(max_coords);
    std::sort(coords.begin(), coords.end());
  }
  GradCheckResult res;
  NoGradScope<double> no_grad;
  for (const auto& [k, i] : coords) {
    auto& x = inputs[k];
    const double analytic = x.has_grad() ? x.grad()[i] : 0.0;
    auto v = x.mutable_data();
    const double orig = v[i];
    auto error_at = [&](double step) {
      v[i] = orig + step;
      const double fp = f().item();
      v[i] = orig - step;
      const double fm = f().item();
      v[i] = orig;
      const double numeric = (fp - fm) / (2 * step);
      const double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      return std::abs(analytic - numeric) / denom;
    };
    double err = error_at(h);
    if (retry_above > 0 && err > retry_above) {
      ++res.kink_retries;
      err = std::min({err, error_at(h / 10), error_at(h / 100)});
    }
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst_input = k;
      res.worst_coord = i;
    }
    ++res.coords_checked;
  }
  return res;
}

/// Single-input form: checks d f(x) / dx for every coordinate of x.
inline double grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                         Tensor<double> x, double h = 1e-5) {
  return grad_check([&]() { return f(x); }, {x}, h).max_rel_error;
}

}  // namespace seld::diff
