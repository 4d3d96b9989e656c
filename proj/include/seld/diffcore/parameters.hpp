// seld/diffcore/parameters.hpp

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

#include <cmath>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "seld/diffcore/ops.hpp"

namespace seld::diff {

/// How a parameter was initialized. Kept with the parameter for provenance.
struct InitSpec {
  enum class Kind { uniform_fan_in, constant, values };
  Kind kind = Kind::constant;
  std::size_t fan_in = 1;
  double value = 0;
  std::vector<double> values;

  static InitSpec uniform(std::size_t fan_in) { return {Kind::uniform_fan_in, fan_in, 0, {}}; }
  static InitSpec fill(double v) { return {Kind::constant, 1, v, {}}; }
  static InitSpec tiled(std::vector<double> v) { return {Kind::values, 1, 0, std::move(v)}; }

  std::string describe() const {
    std::ostringstream os;
    switch (kind) {
      case Kind::uniform_fan_in:
        os << "uniform(+-1/sqrt(" << fan_in << "))";
        break;
      case Kind::constant:
        os << "constant(" << value << ")";
        break;
      case Kind::values:
        os << "tiled(" << values.size() << ")";
        break;
    }
    return os.str();
  }
};

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
  InitSpec init;
};

/// Owns every learnable tensor and batch-norm state of a model, keyed by a
/// dotted name path. Iteration is in name order. References returned by
/// add()/add_bn() stay valid for the lifetime of the store (and across moves).
template <class T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed) {}
  ParameterStore(ParameterStore&&) noexcept = default;
  ParameterStore& operator=(ParameterStore&&) noexcept = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  /// Creates a parameter. The RNG stream depends only on (seed, name), so
  /// adding or removing other parameters never changes this one's values.
  Tensor<T>& add(const std::string& name, Shape shape, InitSpec init) {
    if (params_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    Tensor<T> t(std::move(shape), T(0), true);
    auto v = t.mutable_data();
    switch (init.kind) {
      case InitSpec::Kind::uniform_fan_in: {
        std::mt19937_64 rng(mix_seed(seed_, fnv1a(name)));
        const double bound = 1.0 / std::sqrt(static_cast<double>(init.fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& x : v) x = static_cast<T>(dist(rng));
        break;
      }
      case InitSpec::Kind::constant:
        for (auto& x : v) x = static_cast<T>(init.value);
        break;
      case InitSpec::Kind::values:
        for (std::size_t i = 0; i < v.size(); ++i)
          v[i] = static_cast<T>(init.values[i % init.values.size()]);
        break;
    }
    auto [it, ok] = params_.emplace(name, Parameter<T>{name, std::move(t), std::move(init)});
    return it->second.tensor;
  }

  BatchNormState<T>& add_bn(const std::string& name, std::size_t channels) {
    if (bn_.count(name)) throw ConfigError("duplicate batch-norm name: " + name);
    return bn_.emplace(name, BatchNormState<T>(channels)).first->second;
  }

  std::map<std::string, Parameter<T>>& params() { return params_; }
  const std::map<std::string, Parameter<T>>& params() const { return params_; }
  std::map<std::string, BatchNormState<T>>& bn_states() { return bn_; }
  const std::map<std::string, BatchNormState<T>>& bn_states() const { return bn_; }

  Tensor<T>& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ConfigError("unknown parameter: " + name);
    return it->second.tensor;
  }

  std::size_t count_scalars() const {
    std::size_t n = 0;
    for (const auto& [k, p] : params_) n += p.tensor.size();
    return n;
  }

  void zero_grad() {
    for (auto& [k, p] : params_) p.tensor.zero_grad();
  }

 private:
  std::uint64_t seed_;
  std::map<std::string, Parameter<T>> params_;
  std::map<std::string, BatchNormState<T>> bn_;
};

}  // namespace seld::diff
