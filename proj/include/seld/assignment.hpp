// seld/assignment.hpp

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

// Linear assignment: exhaustive permutation search for small square
// problems and the Hungarian method for everything else.

#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "seld/common.hpp"

namespace seld {

/// Largest size handled by enumeration (6! = 720 permutations).
inline constexpr std::size_t kMaxEnumeration = 6;

/// All permutations of {0..n-1} in lexicographic order.
inline std::vector<std::vector<int>> permutations(std::size_t n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::vector<std::vector<int>> out;
  do out.push_back(p);
  while (std::next_permutation(p.begin(), p.end()));
  return out;
}

/// Minimum-cost assignment of rows to columns for an n x m row-major cost
/// matrix. Returns col[i] for every row, -1 for rows left unassigned when
/// n > m. Exactly min(n, m) pairs are produced.
inline std::vector<int> hungarian(std::span<const double> cost, std::size_t n, std::size_t m) {
  if (cost.size() != n * m)
    throw DimensionError("hungarian: cost has " + std::to_string(cost.size()) +
                         " entries, expected " + std::to_string(n) + "x" + std::to_string(m));
  if (n == 0 || m == 0) return std::vector<int>(n, -1);
  const bool transposed = n > m;
  const std::size_t rows = transposed ? m : n, cols = transposed ? n : m;
  auto c = [&](std::size_t i, std::size_t j) {
    return transposed ? cost[j * m + i] : cost[i * m + j];
  };
  // Shortest augmenting path with potentials, 1-based with a virtual column 0.
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<std::size_t> match(cols + 1, 0), way(cols + 1, 0);
  for (std::size_t i = 1; i <= rows; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(cols + 1, inf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(n, -1);
  for (std::size_t j = 1; j <= cols; ++j) {
    if (match[j] == 0) continue;
    if (transposed)
      out[j - 1] = static_cast<int>(match[j] - 1);
    else
      out[match[j] - 1] = static_cast<int>(j - 1);
  }
  return out;
}

/// Total cost of an assignment produced by hungarian().
inline double assignment_cost(std::span<const double> cost, std::size_t m,
                              const std::vector<int>& col) {
  double s = 0;
  for (std::size_t i = 0; i < col.size(); ++i)
    if (col[i] >= 0) s += cost[i * m + static_cast<std::size_t>(col[i])];
  return s;
}

/// Minimum-cost permutation for a square n x n cost matrix: perm[i] is the
/// column given to row i. Up to kMaxEnumeration rows all permutations are
/// scored in lexicographic order and the first minimum wins; larger
/// problems go through hungarian().
inline std::vector<int> min_cost_permutation(std::span<const double> cost, std::size_t n) {
  if (cost.size() != n * n)
    throw DimensionError("min_cost_permutation: cost is not " + std::to_string(n) + "x" +
                         std::to_string(n));
  if (n > kMaxEnumeration) return hungarian(cost, n, n);
  std::vector<int> p(n), best;
  std::iota(p.begin(), p.end(), 0);
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += cost[i * n + static_cast<std::size_t>(p[i])];
    if (s < best_cost) {
      best_cost = s;
      best = p;
    }
  } while (std::next_permutation(p.begin(), p.end()));
  if (best.empty()) best = p;  // all costs NaN
  return best;
}

}  // namespace seld
