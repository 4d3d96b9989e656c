// seld/diffcore/tensor.hpp

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

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "seld/common.hpp"

namespace seld::diff {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ']';
  return os.str();
}

/// Storage shared by every handle to one tensor. `grad` stays empty until a
/// backward pass writes into it.
template <class T>
struct TensorData {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Reference-counted handle to a row-major n-d array.
///
/// Copies share storage. Values are treated as immutable once an op has
/// produced them; only parameters are written in place (by the optimizer).
template <class T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, T fill = T(0), bool requires_grad = false)
      : impl_(std::make_shared<TensorData<T>>()) {
    check_shape(shape);
    impl_->value.assign(numel(shape), fill);
    impl_->shape = std::move(shape);
    impl_->requires_grad = requires_grad;
  }

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : impl_(std::make_shared<TensorData<T>>()) {
    check_shape(shape);
    if (numel(shape) != values.size())
      throw DimensionError("tensor shape " + to_string(shape) + " needs " +
                           std::to_string(numel(shape)) + " values, got " +
                           std::to_string(values.size()));
    impl_->shape = std::move(shape);
    impl_->value = std::move(values);
    impl_->requires_grad = requires_grad;
  }

  static Tensor zeros(Shape s) { return Tensor(std::move(s), T(0)); }
  static Tensor ones(Shape s) { return Tensor(std::move(s), T(1)); }
  static Tensor scalar(T v) { return Tensor(Shape{1}, v); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t size() const { return impl_->value.size(); }

  /// Size of dimension `axis`; negative counts from the end.
  std::size_t dim(int axis) const {
    const int n = static_cast<int>(ndim());
    const int a = axis < 0 ? axis + n : axis;
    if (a < 0 || a >= n)
      throw DimensionError("axis " + std::to_string(axis) +
                           " out of range for shape " + to_string(shape()));
    return impl_->shape[static_cast<std::size_t>(a)];
  }

  std::span<const T> data() const { return impl_->value; }
  std::span<T> mutable_data() { return impl_->value; }

  T item() const {
    if (size() != 1)
      throw ContractError("item() on tensor of shape " + to_string(shape()));
    return impl_->value[0];
  }

  T at(std::initializer_list<std::size_t> idx) const {
    if (idx.size() != ndim())
      throw DimensionError("index rank mismatch for shape " +
                           to_string(shape()));
    std::size_t off = 0, k = 0;
    for (std::size_t i : idx) off = off * impl_->shape[k++] + i;
    return impl_->value.at(off);
  }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool on) { impl_->requires_grad = on; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  /// Same values, fresh storage, no gradient record.
  Tensor detach() const { return Tensor(shape(), impl_->value); }

  const std::shared_ptr<TensorData<T>>& impl() const { return impl_; }

 private:
  static void check_shape(const Shape& s) {
    for (std::size_t d : s)
      if (d == 0) throw DimensionError("zero-sized dimension in " + to_string(s));
  }
  std::shared_ptr<TensorData<T>> impl_;
};

/// Ordered log of differentiable ops. Ops append a record only while a tape
/// is active on the current thread (see TapeScope) and at least one input
/// requires a gradient. Creation order is a valid topological order, so
/// backward replays the records in reverse.
template <class T>
class Tape {
 public:
  using Node = std::shared_ptr<TensorData<T>>;

  struct Record {
    std::string op;
    std::vector<Node> inputs;
    Node output;
    std::function<void()> backward;
  };

  void record(std::string op, std::vector<Node> inputs, Node output,
              std::function<void()> backward) {
    records_.push_back(
        {std::move(op), std::move(inputs), std::move(output), std::move(backward)});
  }

  /// Seeds d(loss)/d(loss) = 1 and runs every record once, newest first.
  /// Records whose output received no gradient are visited but skipped.
  void backward(const Tensor<T>& loss) {
    if (loss.size() != 1)
      throw ContractError("backward() needs a scalar loss, got shape " +
                          to_string(loss.shape()));
    loss.impl()->grad_buffer()[0] += T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
      ++visits_;
      if (it->output->grad.empty()) continue;
      it->backward();
    }
  }

  void clear() { records_.clear(); }
  std::size_t size() const { return records_.size(); }
  std::size_t visits() const { return visits_; }
  const std::vector<Record>& records() const { return records_; }

  static Tape* active() { return active_; }

 private:
  template <class>
  friend class TapeScope;
  template <class>
  friend class NoGradScope;
  std::vector<Record> records_;
  std::size_t visits_ = 0;
  static inline thread_local Tape* active_ = nullptr;
};

/// Makes `tape` the recording target on this thread for the scope lifetime.
template <class T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : prev_(Tape<T>::active_) {
    Tape<T>::active_ = &tape;
  }
  ~TapeScope() { Tape<T>::active_ = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

/// Suspends recording (inference/eval forward passes).
template <class T>
class NoGradScope {
 public:
  NoGradScope() : prev_(Tape<T>::active_) { Tape<T>::active_ = nullptr; }
  ~NoGradScope() { Tape<T>::active_ = prev_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<T>* prev_;
};

}  // namespace seld::diff
