// seld/trainer/optim.hpp

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

// AdamW with decoupled weight decay, global-norm gradient clipping and the
// two-phase step learning-rate schedule.

#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "seld/diffcore/checkpoint.hpp"
#include "seld/diffcore/parameters.hpp"

namespace seld::trainer {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  int max_bad_steps = 10;  // consecutive non-finite steps before aborting
};

struct StepResult {
  bool applied = true;
  double grad_norm = 0;
};

/// Moments are kept in double per parameter name; parameters with
/// requires_grad == false are never touched.
template <class T>
class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg = {}) : cfg_(cfg) {}

  const AdamWConfig& config() const { return cfg_; }
  long step_count() const { return step_; }
  int bad_steps() const { return bad_; }
  long skipped_total() const { return skipped_; }

  /// One update with the gradients currently held by `store`.
  ///   p <- p - lr*wd*p
  ///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
  ///   p <- p - lr * m_hat / (sqrt(v_hat) + eps)
  /// A non-finite gradient skips the step; after max_bad_steps consecutive
  /// skips a ContractError is thrown.
  StepResult step(diff::ParameterStore<T>& store, double lr) {
    StepResult r;
    r.grad_norm = global_grad_norm(store);
    if (!std::isfinite(r.grad_norm)) {
      r.applied = false;
      ++skipped_;
      if (++bad_ >= cfg_.max_bad_steps)
        throw ContractError("optimizer: " + std::to_string(bad_) +
                            " consecutive non-finite gradient steps");
      return r;
    }
    bad_ = 0;
    ++step_;
    const double bc1 = 1 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (auto& [name, p] : store.params()) {
      auto& t = p.tensor;
      if (!t.requires_grad()) continue;
      auto& st = moments_[name];
      if (st.m.empty()) {
        st.m.assign(t.size(), 0.0);
        st.v.assign(t.size(), 0.0);
      }
      auto v = t.mutable_data();
      const bool has = t.has_grad();
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double g = has ? static_cast<double>(t.grad()[i]) : 0.0;
        double x = static_cast<double>(v[i]);
        x -= lr * cfg_.weight_decay * x;
        st.m[i] = cfg_.beta1 * st.m[i] + (1 - cfg_.beta1) * g;
        st.v[i] = cfg_.beta2 * st.v[i] + (1 - cfg_.beta2) * g * g;
        const double mh = st.m[i] / bc1, vh = st.v[i] / bc2;
        x -= lr * mh / (std::sqrt(vh) + cfg_.eps);
        v[i] = static_cast<T>(x);
      }
    }
    return r;
  }

  void save(diff::Checkpoint& ckpt) const {
    ckpt.meta["optim.step"] = std::to_string(step_);
    ckpt.meta["optim.bad"] = std::to_string(bad_);
    ckpt.meta["optim.skipped"] = std::to_string(skipped_);
    for (const auto& [name, st] : moments_) {
      const diff::Shape s{st.m.size()};
      ckpt.put<double>("adam.m." + name, s, st.m);
      ckpt.put<double>("adam.v." + name, s, st.v);
    }
  }

  void load(const diff::Checkpoint& ckpt) {
    auto num = [&](const char* k) {
      auto it = ckpt.meta.find(k);
      if (it == ckpt.meta.end()) throw FormatError(std::string("checkpoint lacks ") + k);
      return std::stol(it->second);
    };
    step_ = num("optim.step");
    bad_ = static_cast<int>(num("optim.bad"));
    skipped_ = num("optim.skipped");
    moments_.clear();
    for (const auto& [key, e] : ckpt.entries) {
      if (key.rfind("adam.m.", 0) != 0) continue;
      const std::string name = key.substr(7);
      moments_[name] = {ckpt.get<double>(key), ckpt.get<double>("adam.v." + name)};
    }
  }

 private:
  struct Moments {
    std::vector<double> m, v;
  };
  AdamWConfig cfg_;
  long step_ = 0;
  int bad_ = 0;
  long skipped_ = 0;
  std::map<std::string, Moments> moments_;

  static double global_grad_norm(const diff::ParameterStore<T>& store) {
    double s = 0;
    for (const auto& [name, p] : store.params())
      if (p.tensor.requires_grad() && p.tensor.has_grad())
        for (T g : p.tensor.grad()) s += static_cast<double>(g) * static_cast<double>(g);
    return std::sqrt(s);
  }
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <class T>
double clip_grad_norm(diff::ParameterStore<T>& store, double max_norm) {
  double s = 0;
  for (auto& [name, p] : store.params())
    if (p.tensor.requires_grad() && p.tensor.has_grad())
      for (T g : p.tensor.grad()) s += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(s);
  if (max_norm > 0 && std::isfinite(norm) && norm > max_norm) {
    const T f = static_cast<T>(max_norm / norm);
    for (auto& [name, p] : store.params())
      if (p.tensor.requires_grad() && p.tensor.has_grad())
        for (auto& g : p.tensor.mutable_grad()) g *= f;
  }
  return norm;
}

struct LrSchedule {
  double lr_high = 5e-4;
  double lr_low = 5e-5;
  int base_epochs = 100;
  int base_boundary = 90;
  double epoch_scale = 1.0;

  int total_epochs() const {
    return std::max(1, static_cast<int>(std::lround(base_epochs * epoch_scale)));
  }
  int boundary() const { return static_cast<int>(std::lround(base_boundary * epoch_scale)); }
  double operator()(int epoch) const { return epoch < boundary() ? lr_high : lr_low; }
};

}  // namespace seld::trainer
