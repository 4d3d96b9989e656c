// seld/diffcore/primitive_suite.hpp

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

// Finite-difference checks for every differentiable primitive. Shared by the
// unit tests, the acceptance suite and `seld gradcheck`.

#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "seld/diffcore/gradcheck.hpp"
#include "seld/diffcore/ops.hpp"

namespace seld::diff {

struct GradSuiteRow {
  std::string name;
  double max_rel_error = 0;
  std::size_t trials = 0;
  std::size_t coords = 0;
  std::size_t kink_retries = 0;
};

/// Random double tensor in [-1, 1]. With `away_from_zero`, entries with
/// |x| < 1e-3 are resampled (keeps relu inputs off the kink).
inline Tensor<double> random_tensor(Shape shape, std::mt19937_64& rng, bool away_from_zero = false,
                                    double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor<double> t(std::move(shape));
  for (auto& v : t.mutable_data()) {
    do {
      v = dist(rng);
    } while (away_from_zero && std::abs(v) < 1e-3);
  }
  return t;
}

/// Projects y onto a fixed random direction so every output coordinate
/// takes part in the checked scalar.
inline Tensor<double> contract(const Tensor<double>& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum_all(mul(y, random_tensor(y.shape(), rng)));
}

inline std::vector<GradSuiteRow> primitive_gradient_suite(std::size_t trials = 5,
                                                         std::uint64_t seed = 2024) {
  std::vector<GradSuiteRow> rows;
  std::mt19937_64 rng(seed);
  auto run = [&](const std::string& name,
                 const std::function<GradCheckResult(std::uint64_t)>& one) {
    GradSuiteRow row{name, 0, 0, 0, 0};
    for (std::size_t t = 0; t < trials; ++t) {
      const auto r = one(rng());
      row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
      row.coords += r.coords_checked;
      row.kink_retries += r.kink_retries;
      ++row.trials;
    }
    rows.push_back(row);
  };

  run("matmul", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto a = random_tensor({2, 3, 4}, g), b = random_tensor({4, 5}, g);
    return grad_check([&] { return contract(matmul(a, b), s); }, {a, b});
  });
  run("conv2d", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({2, 3, 5, 6}, g), w = random_tensor({4, 3, 3, 3}, g),
         b = random_tensor({4}, g);
    return grad_check([&] { return contract(conv2d(x, w, b), s); }, {x, w, b});
  });
  run("batchnorm2d", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({2, 3, 4, 5}, g), ga = random_tensor({3}, g, false, 0.5, 1.5),
         be = random_tensor({3}, g);
    BatchNormState<double> st(3);
    return grad_check([&] { return contract(batchnorm2d(x, ga, be, st, Mode::train), s); },
                      {x, ga, be});
  });
  run("relu", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({4, 7}, g, true);
    return grad_check([&] { return contract(relu(x), s); }, {x});
  });
  run("sigmoid", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({4, 7}, g, false, -4, 4);
    return grad_check([&] { return contract(sigmoid(x), s); }, {x});
  });
  run("tanh", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({4, 7}, g, false, -3, 3);
    return grad_check([&] { return contract(tanh(x), s); }, {x});
  });
  run("softmax_lastdim", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({3, 6}, g, false, -3, 3);
    return grad_check([&] { return contract(softmax_lastdim(x), s); }, {x});
  });
  run("avg_pool2d", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({2, 4, 6}, g);
    return grad_check([&] { return contract(pool2d(x, 2, 2, PoolKind::avg), s); }, {x});
  });
  run("max_pool2d", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({2, 4, 6}, g);
    return grad_check([&] { return contract(pool2d(x, 1, 2, PoolKind::max), s); }, {x});
  });
  run("linear", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({2, 3, 4}, g), w = random_tensor({4, 5}, g), b = random_tensor({5}, g);
    return grad_check([&] { return contract(linear(x, w, b), s); }, {x, w, b});
  });
  run("layer_norm", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({3, 6}, g), ga = random_tensor({6}, g), be = random_tensor({6}, g);
    return grad_check([&] { return contract(layer_norm(x, ga, be), s); }, {x, ga, be});
  });
  run("broadcast_add_mul_sub", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto a = random_tensor({2, 3, 4}, g), b = random_tensor({3, 1}, g), c = random_tensor({4}, g);
    return grad_check([&] { return contract(sub(mul(add(a, b), c), b), s); }, {a, b, c});
  });
  run("mean_axis", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({2, 3, 4}, g);
    return grad_check([&] { return contract(mean_axis(x, 1), s); }, {x});
  });
  run("permute_reshape", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({2, 3, 4}, g);
    return grad_check([&] { return contract(reshape(permute(x, {2, 0, 1}), {8, 3}), s); }, {x});
  });
  run("slice_concat", [&](std::uint64_t s) {
    std::mt19937_64 g(s);
    auto x = random_tensor({3, 6}, g), y = random_tensor({3, 2}, g);
    return grad_check([&] { return contract(concat<double>({slice(x, 1, 1, 4), y}, 1), s); },
                      {x, y});
  });
  return rows;
}

}  // namespace seld::diff
