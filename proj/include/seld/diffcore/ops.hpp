// seld/diffcore/ops.hpp

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

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "seld/diffcore/tensor.hpp"

namespace seld::diff {

namespace detail {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MapMat = Eigen::Map<RowMat<T>>;
template <class T>
using MapConstMat = Eigen::Map<const RowMat<T>>;

template <class T>
bool recording(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::active() == nullptr) return false;
  for (const Tensor<T>* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

/// Registers `backward` for `out` on the active tape. The callback reads
/// out.grad and accumulates into the inputs' grad buffers.
template <class T, class F>
void attach(std::string op, Tensor<T>& out, std::initializer_list<const Tensor<T>*> inputs,
            F&& backward) {
  std::vector<typename Tape<T>::Node> nodes;
  for (const Tensor<T>* t : inputs)
    if (t->defined()) nodes.push_back(t->impl());
  out.set_requires_grad(true);
  Tape<T>::active()->record(std::move(op), std::move(nodes), out.impl(),
                            std::forward<F>(backward));
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline std::string shapes_msg(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": incompatible shapes " + to_string(a) + " and " +
         to_string(b);
}

inline Shape broadcast_shapes(const Shape& a, const Shape& b, const char* op) {
  const std::size_t n = std::max(a.size(), b.size());
  Shape out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t da = i + a.size() >= n ? a[i + a.size() - n] : 1;
    const std::size_t db = i + b.size() >= n ? b[i + b.size() - n] : 1;
    if (da != db && da != 1 && db != 1) throw DimensionError(shapes_msg(op, a, b));
    out[i] = std::max(da, db);
  }
  return out;
}

/// Element strides of `in` laid over `out`, zero along broadcast axes.
inline std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::size_t> st(out.size(), 0);
  std::size_t s = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t i = in.size() - 1 - k;
    const std::size_t o = out.size() - 1 - k;
    st[o] = in[i] == 1 ? 0 : s;
    s *= in[i];
  }
  return st;
}

/// Calls fn(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& fn) {
  const std::size_t n = out.size();
  const std::size_t total = numel(out);
  std::vector<std::size_t> idx(n, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    fn(i, ia, ib);
    for (std::size_t k = n; k-- > 0;) {
      ++idx[k];
      ia += sa[k];
      ib += sb[k];
      if (idx[k] < out[k]) break;
      ia -= sa[k] * out[k];
      ib -= sb[k] * out[k];
      idx[k] = 0;
    }
  }
}

inline std::size_t norm_axis(int axis, std::size_t ndim) {
  const int n = static_cast<int>(ndim);
  const int a = axis < 0 ? axis + n : axis;
  if (a < 0 || a >= n)
    throw DimensionError("axis " + std::to_string(axis) + " out of range for rank " +
                         std::to_string(ndim));
  return static_cast<std::size_t>(a);
}

// Binary elementwise op with broadcasting. da/db give the partials as
// functions of (a, b, out).
template <class T, class F, class DA, class DB>
Tensor<T> binary(const char* name, const Tensor<T>& a, const Tensor<T>& b, F f, DA da,
                 DB db) {
  const Shape out_shape = broadcast_shapes(a.shape(), b.shape(), name);
  Tensor<T> out(out_shape);
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.mutable_data();
  const bool same = a.shape() == b.shape();
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  if (same) {
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(av[i], bv[i]);
  } else {
    for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      ov[i] = f(av[ia], bv[ib]);
    });
  }
  if (recording<T>({&a, &b})) {
    auto pa = a.impl(), pb = b.impl(), po = out.impl();
    attach<T>(name, out, {&a, &b}, [pa, pb, po, sa, sb, same, out_shape, da, db]() {
      const auto& g = po->grad;
      const auto& x = pa->value;
      const auto& y = pb->value;
      const auto& z = po->value;
      T* ga = pa->requires_grad ? pa->grad_buffer().data() : nullptr;
      T* gb = pb->requires_grad ? pb->grad_buffer().data() : nullptr;
      if (same) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          if (ga) ga[i] += g[i] * da(x[i], y[i], z[i]);
          if (gb) gb[i] += g[i] * db(x[i], y[i], z[i]);
        }
      } else {
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
          if (ga) ga[ia] += g[i] * da(x[ia], y[ib], z[i]);
          if (gb) gb[ib] += g[i] * db(x[ia], y[ib], z[i]);
        });
      }
    });
  }
  return out;
}

// Unary elementwise op; d gives the derivative from (x, y).
template <class T, class F, class D>
Tensor<T> unary(const char* name, const Tensor<T>& x, F f, D d) {
  Tensor<T> out(x.shape());
  auto xv = x.data();
  auto ov = out.mutable_data();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = f(xv[i]);
  if (recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    attach<T>(name, out, {&x}, [px, po, d]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * d(px->value[i], po->value[i]);
    });
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------- elementwise

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(1); });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T, T) { return T(1); },
      [](T, T, T) { return T(-1); });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return detail::binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y, T) { return y; },
      [](T x, T, T) { return x; });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  return detail::unary<T>(
      "scale", x, [s](T v) { return v * s; }, [s](T, T) { return s; });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return detail::unary<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return detail::unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return detail::unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

/// Softmax over the last dimension, max-subtracted.
template <class T>
Tensor<T> softmax_lastdim(const Tensor<T>& x) {
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.size() / n;
  Tensor<T> out(x.shape());
  auto xv = x.data();
  auto ov = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xv.data() + r * n;
    T* o = ov.data() + r * n;
    const T mx = *std::max_element(in, in + n);
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= sum;
  }
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::attach<T>("softmax", out, {&x}, [px, po, n, rows]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      const auto& y = po->value;
      for (std::size_t r = 0; r < rows; ++r) {
        T dot = 0;
        for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
        for (std::size_t j = 0; j < n; ++j)
          gx[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
      }
    });
  }
  return out;
}

// ------------------------------------------------------------------ reductions

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.data()) s += v;
  Tensor<T> out(Shape{1}, s);
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::attach<T>("sum_all", out, {&x}, [px, po]() {
      auto& gx = px->grad_buffer();
      const T g = po->grad[0];
      for (auto& v : gx) v += g;
    });
  }
  return out;
}

template <class T>
Tensor<T> mean_all(const Tensor<T>& x) {
  return scale(sum_all(x), T(1) / static_cast<T>(x.size()));
}

/// Mean over one axis; the axis is removed from the shape.
template <class T>
Tensor<T> mean_axis(const Tensor<T>& x, int axis) {
  const std::size_t a = detail::norm_axis(axis, x.ndim());
  const Shape& s = x.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < a; ++i) outer *= s[i];
  for (std::size_t i = a + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[a];
  Shape os;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != a) os.push_back(s[i]);
  if (os.empty()) os.push_back(1);
  Tensor<T> out(os);
  auto xv = x.data();
  auto ov = out.mutable_data();
  const T inv = T(1) / static_cast<T>(len);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l) {
      const T* src = xv.data() + (o * len + l) * inner;
      T* dst = ov.data() + o * inner;
      for (std::size_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  for (auto& v : ov) v *= inv;
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::attach<T>("mean_axis", out, {&x}, [px, po, outer, inner, len, inv]() {
      auto& gx = px->grad_buffer();
      const auto& g = po->grad;
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t l = 0; l < len; ++l)
          for (std::size_t i = 0; i < inner; ++i)
            gx[(o * len + l) * inner + i] += g[o * inner + i] * inv;
    });
  }
  return out;
}

// ------------------------------------------------------------------- structure

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  detail::require(numel(shape) == x.size(),
                  "reshape: " + to_string(x.shape()) + " -> " + to_string(shape));
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::attach<T>("reshape", out, {&x}, [px, po]() {
      auto& gx = px->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += po->grad[i];
    });
  }
  return out;
}

/// Axis permutation: out.shape[i] = x.shape[perm[i]].
template <class T>
Tensor<T> permute(const Tensor<T>& x, std::vector<std::size_t> perm) {
  const Shape& s = x.shape();
  detail::require(perm.size() == s.size(), "permute: rank mismatch for " + to_string(s));
  Shape os(s.size());
  std::vector<std::size_t> in_strides(s.size()), st(s.size());
  std::size_t acc = 1;
  for (std::size_t k = s.size(); k-- > 0;) {
    in_strides[k] = acc;
    acc *= s[k];
  }
  for (std::size_t i = 0; i < perm.size(); ++i) {
    detail::require(perm[i] < s.size(), "permute: bad axis");
    os[i] = s[perm[i]];
    st[i] = in_strides[perm[i]];
  }
  // map[out_index] = in_index
  std::vector<std::size_t> map(x.size());
  const std::vector<std::size_t> zero(os.size(), 0);
  detail::for_each_broadcast(os, st, zero,
                             [&](std::size_t i, std::size_t ia, std::size_t) { map[i] = ia; });
  Tensor<T> out(os);
  auto xv = x.data();
  auto ov = out.mutable_data();
  for (std::size_t i = 0; i < map.size(); ++i) ov[i] = xv[map[i]];
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::attach<T>("permute", out, {&x}, [px, po, map = std::move(map)]() {
      auto& gx = px->grad_buffer();
      for (std::size_t i = 0; i < map.size(); ++i) gx[map[i]] += po->grad[i];
    });
  }
  return out;
}

/// Swaps the last two axes.
template <class T>
Tensor<T> transpose_last2(const Tensor<T>& x) {
  detail::require(x.ndim() >= 2, "transpose_last2: rank < 2");
  std::vector<std::size_t> perm(x.ndim());
  std::iota(perm.begin(), perm.end(), 0);
  std::swap(perm[perm.size() - 1], perm[perm.size() - 2]);
  return permute(x, std::move(perm));
}

/// Half-open slice [begin, end) along `axis`.
template <class T>
Tensor<T> slice(const Tensor<T>& x, int axis, std::size_t begin, std::size_t end) {
  const std::size_t a = detail::norm_axis(axis, x.ndim());
  const Shape& s = x.shape();
  detail::require(begin < end && end <= s[a], "slice: bad range on " + to_string(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < a; ++i) outer *= s[i];
  for (std::size_t i = a + 1; i < s.size(); ++i) inner *= s[i];
  Shape os = s;
  os[a] = end - begin;
  Tensor<T> out(os);
  const std::size_t w = (end - begin) * inner;
  auto xv = x.data();
  auto ov = out.mutable_data();
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv.data() + (o * s[a] + begin) * inner, w, ov.data() + o * w);
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    const std::size_t len = s[a];
    detail::attach<T>("slice", out, {&x}, [px, po, outer, inner, len, begin, w]() {
      auto& gx = px->grad_buffer();
      for (std::size_t o = 0; o < outer; ++o)
        for (std::size_t i = 0; i < w; ++i)
          gx[(o * len + begin) * inner + i] += po->grad[o * w + i];
    });
  }
  return out;
}

/// Concatenation along `axis`; all other dimensions must agree.
template <class T>
Tensor<T> concat(const std::vector<Tensor<T>>& xs, int axis) {
  detail::require(!xs.empty(), "concat: no inputs");
  const std::size_t a = detail::norm_axis(axis, xs[0].ndim());
  Shape os = xs[0].shape();
  os[a] = 0;
  for (const auto& x : xs) {
    Shape s = x.shape();
    detail::require(s.size() == os.size(), "concat: rank mismatch");
    for (std::size_t i = 0; i < s.size(); ++i)
      if (i != a && s[i] != os[i])
        throw DimensionError(detail::shapes_msg("concat", xs[0].shape(), s));
    os[a] += s[a];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < a; ++i) outer *= os[i];
  for (std::size_t i = a + 1; i < os.size(); ++i) inner *= os[i];
  Tensor<T> out(os);
  auto ov = out.mutable_data();
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& x : xs) {
    offsets.push_back(off);
    const std::size_t w = x.shape()[a] * inner;
    for (std::size_t o = 0; o < outer; ++o)
      std::copy_n(x.data().data() + o * w, w, ov.data() + o * os[a] * inner + off * inner);
    off += x.shape()[a];
  }
  bool any = false;
  for (const auto& x : xs) any = any || detail::recording<T>({&x});
  if (any) {
    std::vector<typename Tape<T>::Node> nodes;
    std::vector<std::size_t> widths;
    for (const auto& x : xs) {
      nodes.push_back(x.impl());
      widths.push_back(x.shape()[a]);
    }
    auto po = out.impl();
    const std::size_t total = os[a];
    out.set_requires_grad(true);
    Tape<T>::active()->record(
        "concat", nodes, po, [nodes, widths, offsets, po, outer, inner, total]() {
          for (std::size_t k = 0; k < nodes.size(); ++k) {
            if (!nodes[k]->requires_grad) continue;
            auto& gx = nodes[k]->grad_buffer();
            const std::size_t w = widths[k] * inner;
            for (std::size_t o = 0; o < outer; ++o)
              for (std::size_t i = 0; i < w; ++i)
                gx[o * w + i] += po->grad[o * total * inner + offsets[k] * inner + i];
          }
        });
  }
  return out;
}

// -------------------------------------------------------------------- products

/// Batched matrix product a[..., m, k] @ b[..., k, n] with broadcast batch dims.
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  using detail::MapConstMat;
  using detail::MapMat;
  if (a.ndim() < 2 || b.ndim() < 2)
    throw DimensionError(detail::shapes_msg("matmul", a.shape(), b.shape()));
  const std::size_t m = a.dim(-2), k = a.dim(-1), k2 = b.dim(-2), n = b.dim(-1);
  if (k != k2) throw DimensionError(detail::shapes_msg("matmul", a.shape(), b.shape()));
  const Shape ab(a.shape().begin(), a.shape().end() - 2);
  const Shape bb(b.shape().begin(), b.shape().end() - 2);
  Shape batch = ab.empty() && bb.empty() ? Shape{}
                                         : detail::broadcast_shapes(ab.empty() ? Shape{1} : ab,
                                                                   bb.empty() ? Shape{1} : bb,
                                                                   "matmul");
  const Shape batch_iter = batch.empty() ? Shape{1} : batch;
  const auto sa = detail::broadcast_strides(ab.empty() ? Shape{1} : ab, batch_iter);
  const auto sb = detail::broadcast_strides(bb.empty() ? Shape{1} : bb, batch_iter);
  std::vector<std::size_t> ia_list, ib_list;
  detail::for_each_broadcast(batch_iter, sa, sb,
                             [&](std::size_t, std::size_t ia, std::size_t ib) {
                               ia_list.push_back(ia);
                               ib_list.push_back(ib);
                             });
  Shape os = batch;
  os.push_back(m);
  os.push_back(n);
  Tensor<T> out(os);
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.mutable_data();
  for (std::size_t i = 0; i < ia_list.size(); ++i) {
    MapConstMat<T> A(av.data() + ia_list[i] * m * k, m, k);
    MapConstMat<T> B(bv.data() + ib_list[i] * k * n, k, n);
    MapMat<T> C(ov.data() + i * m * n, m, n);
    C.noalias() = A * B;
  }
  if (detail::recording<T>({&a, &b})) {
    auto pa = a.impl(), pb = b.impl(), po = out.impl();
    detail::attach<T>("matmul", out, {&a, &b}, [pa, pb, po, ia_list, ib_list, m, k, n]() {
      for (std::size_t i = 0; i < ia_list.size(); ++i) {
        MapConstMat<T> G(po->grad.data() + i * m * n, m, n);
        if (pa->requires_grad) {
          MapMat<T> GA(pa->grad_buffer().data() + ia_list[i] * m * k, m, k);
          MapConstMat<T> B(pb->value.data() + ib_list[i] * k * n, k, n);
          GA.noalias() += G * B.transpose();
        }
        if (pb->requires_grad) {
          MapMat<T> GB(pb->grad_buffer().data() + ib_list[i] * k * n, k, n);
          MapConstMat<T> A(pa->value.data() + ia_list[i] * m * k, m, k);
          GB.noalias() += A.transpose() * G;
        }
      }
    });
  }
  return out;
}

/// Affine map on the last dimension: x[..., Din] W[Din, Dout] + b[Dout].
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  using detail::MapConstMat;
  using detail::MapMat;
  const std::size_t din = x.dim(-1);
  if (w.ndim() != 2 || w.dim(0) != din)
    throw DimensionError(detail::shapes_msg("linear", x.shape(), w.shape()));
  const std::size_t dout = w.dim(1);
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != dout))
    throw DimensionError(detail::shapes_msg("linear bias", w.shape(), b.shape()));
  const std::size_t rows = x.size() / din;
  Shape os = x.shape();
  os.back() = dout;
  Tensor<T> out(os);
  MapConstMat<T> X(x.data().data(), rows, din);
  MapConstMat<T> W(w.data().data(), din, dout);
  MapMat<T> Y(out.mutable_data().data(), rows, dout);
  Y.noalias() = X * W;
  if (b.defined()) {
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> bias(b.data().data(), dout);
    Y.rowwise() += bias;
  }
  if (detail::recording<T>({&x, &w, &b})) {
    auto px = x.impl(), pw = w.impl(), po = out.impl();
    auto pb = b.defined() ? b.impl() : nullptr;
    detail::attach<T>("linear", out, {&x, &w, &b}, [px, pw, pb, po, rows, din, dout]() {
      MapConstMat<T> G(po->grad.data(), rows, dout);
      if (px->requires_grad) {
        MapMat<T> GX(px->grad_buffer().data(), rows, din);
        MapConstMat<T> W(pw->value.data(), din, dout);
        GX.noalias() += G * W.transpose();
      }
      if (pw->requires_grad) {
        MapMat<T> GW(pw->grad_buffer().data(), din, dout);
        MapConstMat<T> X(px->value.data(), rows, din);
        GW.noalias() += X.transpose() * G;
      }
      if (pb && pb->requires_grad) {
        // Plain row-order loop: Eigen's vectorized reductions peel by pointer
        // alignment, which would make the sum order depend on the heap.
        auto& gb = pb->grad_buffer();
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < dout; ++j) gb[j] += G(r, j);
      }
    });
  }
  return out;
}

// --------------------------------------------------------------- convolutional

namespace detail {

// Unfolds one [C, H, W] image into a [C*9, H*W] patch matrix (3x3, pad 1).
template <class T>
void im2col3x3(const T* x, std::size_t c_in, std::size_t h, std::size_t w, T* col) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        T* row = col + ((c * 3 + ky) * 3 + kx) * hw;
        const T* img = x + c * hw;
        for (std::size_t t = 0; t < h; ++t) {
          T* dst = row + t * w;
          const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t + ky) - 1;
          if (st < 0 || st >= static_cast<std::ptrdiff_t>(h)) {
            std::fill_n(dst, w, T(0));
            continue;
          }
          const T* src = img + static_cast<std::size_t>(st) * w;
          if (kx == 0) {
            dst[0] = T(0);
            std::copy_n(src, w - 1, dst + 1);
          } else if (kx == 1) {
            std::copy_n(src, w, dst);
          } else {
            std::copy_n(src + 1, w - 1, dst);
            dst[w - 1] = T(0);
          }
        }
      }
}

template <class T>
void col2im3x3(const T* col, std::size_t c_in, std::size_t h, std::size_t w, T* x) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < c_in; ++c)
    for (std::size_t ky = 0; ky < 3; ++ky)
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const T* row = col + ((c * 3 + ky) * 3 + kx) * hw;
        T* img = x + c * hw;
        for (std::size_t t = 0; t < h; ++t) {
          const std::ptrdiff_t st = static_cast<std::ptrdiff_t>(t + ky) - 1;
          if (st < 0 || st >= static_cast<std::ptrdiff_t>(h)) continue;
          const T* src = row + t * w;
          T* dst = img + static_cast<std::size_t>(st) * w;
          if (kx == 0) {
            for (std::size_t f = 1; f < w; ++f) dst[f - 1] += src[f];
          } else if (kx == 1) {
            for (std::size_t f = 0; f < w; ++f) dst[f] += src[f];
          } else {
            for (std::size_t f = 0; f + 1 < w; ++f) dst[f + 1] += src[f];
          }
        }
      }
}

}  // namespace detail

/// 3x3 cross-correlation, stride 1, zero padding 1. x is [C_in,H,W] or
/// [N,C_in,H,W]; w is [C_out,C_in,3,3]; b is [C_out].
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  using detail::MapConstMat;
  using detail::MapMat;
  if (x.ndim() != 3 && x.ndim() != 4)
    throw DimensionError("conv2d: input must be [C,H,W] or [N,C,H,W], got " +
                         to_string(x.shape()));
  if (w.ndim() != 4 || w.dim(2) != 3 || w.dim(3) != 3)
    throw DimensionError("conv2d: kernel must be [C_out,C_in,3,3], got " + to_string(w.shape()));
  const bool batched = x.ndim() == 4;
  const std::size_t n = batched ? x.dim(0) : 1;
  const std::size_t c_in = x.dim(-3), h = x.dim(-2), wd = x.dim(-1);
  const std::size_t c_out = w.dim(0);
  if (w.dim(1) != c_in) throw DimensionError(detail::shapes_msg("conv2d", x.shape(), w.shape()));
  if (b.ndim() != 1 || b.dim(0) != c_out)
    throw DimensionError(detail::shapes_msg("conv2d bias", w.shape(), b.shape()));
  const std::size_t hw = h * wd, kk = c_in * 9;
  Shape os = x.shape();
  os[os.size() - 3] = c_out;
  Tensor<T> out(os);
  std::vector<T> col(kk * hw);
  MapConstMat<T> W(w.data().data(), c_out, kk);
  for (std::size_t i = 0; i < n; ++i) {
    detail::im2col3x3(x.data().data() + i * c_in * hw, c_in, h, wd, col.data());
    MapConstMat<T> C(col.data(), kk, hw);
    MapMat<T> Y(out.mutable_data().data() + i * c_out * hw, c_out, hw);
    Y.noalias() = W * C;
    for (std::size_t c = 0; c < c_out; ++c) Y.row(c).array() += b.data()[c];
  }
  if (detail::recording<T>({&x, &w, &b})) {
    auto px = x.impl(), pw = w.impl(), pb = b.impl(), po = out.impl();
    detail::attach<T>("conv2d", out, {&x, &w, &b},
                      [px, pw, pb, po, n, c_in, c_out, h, wd, hw, kk]() {
                        std::vector<T> col(kk * hw), dcol;
                        MapConstMat<T> W(pw->value.data(), c_out, kk);
                        for (std::size_t i = 0; i < n; ++i) {
                          MapConstMat<T> G(po->grad.data() + i * c_out * hw, c_out, hw);
                          if (pw->requires_grad) {
                            detail::im2col3x3(px->value.data() + i * c_in * hw, c_in, h, wd,
                                              col.data());
                            MapConstMat<T> C(col.data(), kk, hw);
                            MapMat<T> GW(pw->grad_buffer().data(), c_out, kk);
                            GW.noalias() += G * C.transpose();
                          }
                          if (pb->requires_grad) {
                            auto& gb = pb->grad_buffer();
                            for (std::size_t c = 0; c < c_out; ++c) {
                              T acc = 0;
                              for (std::size_t k = 0; k < hw; ++k) acc += G(c, k);
                              gb[c] += acc;
                            }
                          }
                          if (px->requires_grad) {
                            dcol.assign(kk * hw, T(0));
                            MapMat<T> DC(dcol.data(), kk, hw);
                            DC.noalias() = W.transpose() * G;
                            detail::col2im3x3(dcol.data(), c_in, h, wd,
                                              px->grad_buffer().data() + i * c_in * hw);
                          }
                        }
                      });
  }
  return out;
}

/// Running statistics for one batch-norm layer.
template <class T>
struct BatchNormState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, T(0)), running_var(channels, T(1)) {}
};

enum class Mode { train, eval };

/// Per-channel normalization of [N,C,H,W] (or [C,H,W]) followed by gamma/beta.
/// Train mode normalizes with the biased batch variance over (N,H,W) and
/// updates running stats with the unbiased one; eval mode uses running stats.
template <class T>
Tensor<T> batchnorm2d(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                      BatchNormState<T>& state, Mode mode) {
  if (x.ndim() != 3 && x.ndim() != 4)
    throw DimensionError("batchnorm2d: bad input shape " + to_string(x.shape()));
  const std::size_t n = x.ndim() == 4 ? x.dim(0) : 1;
  const std::size_t c = x.dim(-3), hw = x.dim(-2) * x.dim(-1);
  if (gamma.size() != c || beta.size() != c || state.running_mean.size() != c)
    throw DimensionError(detail::shapes_msg("batchnorm2d", x.shape(), gamma.shape()));
  const std::size_t count = n * hw;
  std::vector<T> mean(c), invstd(c);
  auto xv = x.data();
  if (mode == Mode::train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0, s2 = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = xv.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) s += p[j];
      }
      const double mu = s / static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = xv.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = p[j] - mu;
          s2 += d * d;
        }
      }
      const double var = s2 / static_cast<double>(count);
      mean[ch] = static_cast<T>(mu);
      invstd[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(state.eps)));
      const double unbiased = count > 1 ? s2 / static_cast<double>(count - 1) : var;
      state.running_mean[ch] =
          (T(1) - state.momentum) * state.running_mean[ch] + state.momentum * mean[ch];
      state.running_var[ch] = (T(1) - state.momentum) * state.running_var[ch] +
                              state.momentum * static_cast<T>(unbiased);
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      invstd[ch] = T(1) / std::sqrt(state.running_var[ch] + state.eps);
    }
  }
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.size());
  auto ov = out.mutable_data();
  auto gv = gamma.data();
  auto bv = beta.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (i * c + ch) * hw;
      for (std::size_t j = 0; j < hw; ++j) {
        const T xh = (xv[base + j] - mean[ch]) * invstd[ch];
        xhat[base + j] = xh;
        ov[base + j] = gv[ch] * xh + bv[ch];
      }
    }
  if (detail::recording<T>({&x, &gamma, &beta})) {
    auto px = x.impl(), pg = gamma.impl(), pbt = beta.impl(), po = out.impl();
    const bool train = mode == Mode::train;
    detail::attach<T>(
        "batchnorm2d", out, {&x, &gamma, &beta},
        [px, pg, pbt, po, xhat = std::move(xhat), invstd, n, c, hw, count, train]() {
          const auto& g = po->grad;
          for (std::size_t ch = 0; ch < c; ++ch) {
            double sg = 0, sgx = 0;
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t base = (i * c + ch) * hw;
              for (std::size_t j = 0; j < hw; ++j) {
                sg += g[base + j];
                sgx += static_cast<double>(g[base + j]) * xhat[base + j];
              }
            }
            if (pg->requires_grad) pg->grad_buffer()[ch] += static_cast<T>(sgx);
            if (pbt->requires_grad) pbt->grad_buffer()[ch] += static_cast<T>(sg);
            if (!px->requires_grad) continue;
            auto& gx = px->grad_buffer();
            const T k = pg->value[ch] * invstd[ch];
            const T mg = static_cast<T>(sg / static_cast<double>(count));
            const T mgx = static_cast<T>(sgx / static_cast<double>(count));
            for (std::size_t i = 0; i < n; ++i) {
              const std::size_t base = (i * c + ch) * hw;
              for (std::size_t j = 0; j < hw; ++j) {
                if (train)
                  gx[base + j] += k * (g[base + j] - mg - xhat[base + j] * mgx);
                else
                  gx[base + j] += k * g[base + j];
              }
            }
          }
        });
  }
  return out;
}

enum class PoolKind { avg, max };

/// Non-overlapping (pt x pf) pooling over the last two axes.
template <class T>
Tensor<T> pool2d(const Tensor<T>& x, std::size_t pt, std::size_t pf, PoolKind kind) {
  if (x.ndim() < 2) throw DimensionError("pool2d: rank < 2");
  const std::size_t h = x.dim(-2), w = x.dim(-1);
  if (pt == 0 || pf == 0 || h % pt != 0 || w % pf != 0)
    throw DimensionError("pool2d: window " + std::to_string(pt) + "x" + std::to_string(pf) +
                         " does not divide " + to_string(x.shape()));
  const std::size_t planes = x.size() / (h * w);
  const std::size_t oh = h / pt, ow = w / pf;
  Shape os = x.shape();
  os[os.size() - 2] = oh;
  os[os.size() - 1] = ow;
  Tensor<T> out(os);
  auto xv = x.data();
  auto ov = out.mutable_data();
  std::vector<std::size_t> argmax;
  if (kind == PoolKind::max) argmax.resize(out.size());
  const T inv = T(1) / static_cast<T>(pt * pf);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        const std::size_t o = (p * oh + i) * ow + j;
        if (kind == PoolKind::avg) {
          T s = 0;
          for (std::size_t a = 0; a < pt; ++a)
            for (std::size_t b = 0; b < pf; ++b) s += xv[(p * h + i * pt + a) * w + j * pf + b];
          ov[o] = s * inv;
        } else {
          std::size_t best = (p * h + i * pt) * w + j * pf;
          for (std::size_t a = 0; a < pt; ++a)
            for (std::size_t b = 0; b < pf; ++b) {
              const std::size_t idx = (p * h + i * pt + a) * w + j * pf + b;
              if (xv[idx] > xv[best]) best = idx;
            }
          argmax[o] = best;
          ov[o] = xv[best];
        }
      }
  if (detail::recording<T>({&x})) {
    auto px = x.impl(), po = out.impl();
    detail::attach<T>("pool2d", out, {&x},
                      [px, po, argmax = std::move(argmax), kind, planes, h, w, oh, ow, pt, pf,
                       inv]() {
                        auto& gx = px->grad_buffer();
                        const auto& g = po->grad;
                        for (std::size_t p = 0; p < planes; ++p)
                          for (std::size_t i = 0; i < oh; ++i)
                            for (std::size_t j = 0; j < ow; ++j) {
                              const std::size_t o = (p * oh + i) * ow + j;
                              if (kind == PoolKind::max) {
                                gx[argmax[o]] += g[o];
                                continue;
                              }
                              for (std::size_t a = 0; a < pt; ++a)
                                for (std::size_t b = 0; b < pf; ++b)
                                  gx[(p * h + i * pt + a) * w + j * pf + b] += g[o] * inv;
                            }
                      });
  }
  return out;
}

/// Layer normalization over the last dimension with affine gamma/beta.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5)) {
  const std::size_t d = x.dim(-1);
  if (gamma.size() != d || beta.size() != d)
    throw DimensionError(detail::shapes_msg("layer_norm", x.shape(), gamma.shape()));
  const std::size_t rows = x.size() / d;
  Tensor<T> out(x.shape());
  std::vector<T> xhat(x.size()), invstd(rows);
  auto xv = x.data();
  auto ov = out.mutable_data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = xv.data() + r * d;
    double s = 0, s2 = 0;
    for (std::size_t j = 0; j < d; ++j) s += p[j];
    const double mu = s / static_cast<double>(d);
    for (std::size_t j = 0; j < d; ++j) s2 += (p[j] - mu) * (p[j] - mu);
    invstd[r] = static_cast<T>(1.0 / std::sqrt(s2 / static_cast<double>(d) + eps));
    for (std::size_t j = 0; j < d; ++j) {
      xhat[r * d + j] = (p[j] - static_cast<T>(mu)) * invstd[r];
      ov[r * d + j] = gamma.data()[j] * xhat[r * d + j] + beta.data()[j];
    }
  }
  if (detail::recording<T>({&x, &gamma, &beta})) {
    auto px = x.impl(), pg = gamma.impl(), pb = beta.impl(), po = out.impl();
    detail::attach<T>("layer_norm", out, {&x, &gamma, &beta},
                      [px, pg, pb, po, xhat = std::move(xhat), invstd = std::move(invstd), rows,
                       d]() {
                        const auto& g = po->grad;
                        T* gg = pg->requires_grad ? pg->grad_buffer().data() : nullptr;
                        T* gb = pb->requires_grad ? pb->grad_buffer().data() : nullptr;
                        T* gx = px->requires_grad ? px->grad_buffer().data() : nullptr;
                        std::vector<T> dxh(d);
                        for (std::size_t r = 0; r < rows; ++r) {
                          T m1 = 0, m2 = 0;
                          for (std::size_t j = 0; j < d; ++j) {
                            const T gj = g[r * d + j];
                            if (gg) gg[j] += gj * xhat[r * d + j];
                            if (gb) gb[j] += gj;
                            dxh[j] = gj * pg->value[j];
                            m1 += dxh[j];
                            m2 += dxh[j] * xhat[r * d + j];
                          }
                          if (!gx) continue;
                          m1 /= static_cast<T>(d);
                          m2 /= static_cast<T>(d);
                          for (std::size_t j = 0; j < d; ++j)
                            gx[r * d + j] += invstd[r] * (dxh[j] - m1 - xhat[r * d + j] * m2);
                        }
                      });
  }
  return out;
}

}  // namespace seld::diff
