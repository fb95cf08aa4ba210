// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "deap/ops.hpp"
#include "op_util.hpp"

namespace deap {

using detail::grad_of;
using detail::make_result;

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis) {
  detail::check_inputs<T>({&x}, "softmax");
  require(axis < x.rank(), ErrorCode::kInvalidAxis,
          "softmax: axis " + std::to_string(axis) + " for rank " + std::to_string(x.rank()));
  std::size_t outer = 1, inner = 1;
  const std::size_t len = x.dim(axis);
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      T mx = xv[base];
      for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, xv[base + j * inner]);
      T sum = T(0);
      for (std::size_t j = 0; j < len; ++j) {
        const T e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        sum += e;
      }
      const T inv = T(1) / sum;
      for (std::size_t j = 0; j < len; ++j) out[base + j * inner] *= inv;
    }
  }
  Node<T>* xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, "softmax",
                        [xn, outer, inner, len](Node<T>& self) {
                          T* gx = grad_of(xn);
                          if (!gx) return;
                          const auto& y = self.value;
                          const auto& g = self.grad;
                          for (std::size_t o = 0; o < outer; ++o) {
                            for (std::size_t in = 0; in < inner; ++in) {
                              const std::size_t base = o * len * inner + in;
                              T dot = T(0);
                              for (std::size_t j = 0; j < len; ++j) {
                                dot += g[base + j * inner] * y[base + j * inner];
                              }
                              for (std::size_t j = 0; j < len; ++j) {
                                const std::size_t k = base + j * inner;
                                gx[k] += y[k] * (g[k] - dot);
                              }
                            }
                          }
                        });
}

namespace {

// Normalizes `groups` groups of `count` elements. Element i of group gi sits
// at offset(gi, i). Returns per-group 1/sigma for the backward pass.
template <typename T, typename Offset>
std::vector<T> normalize_groups(const T* x, T* y, std::size_t groups, std::size_t count,
                                T eps, Offset offset) {
  std::vector<T> inv_sigma(groups);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    T mean = T(0);
    for (std::size_t i = 0; i < count; ++i) mean += x[offset(gi, i)];
    mean /= static_cast<T>(count);
    T var = T(0);
    for (std::size_t i = 0; i < count; ++i) {
      const T d = x[offset(gi, i)] - mean;
      var += d * d;
    }
    var /= static_cast<T>(count);
    const T inv = T(1) / std::sqrt(var + eps);
    inv_sigma[gi] = inv;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t k = offset(gi, i);
      y[k] = (x[k] - mean) * inv;
    }
  }
  return inv_sigma;
}

template <typename T, typename Offset>
void normalize_groups_backward(const T* y, const T* g, T* gx, const std::vector<T>& inv_sigma,
                               std::size_t count, Offset offset) {
  const T n = static_cast<T>(count);
  for (std::size_t gi = 0; gi < inv_sigma.size(); ++gi) {
    T mean_g = T(0), mean_gy = T(0);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t k = offset(gi, i);
      mean_g += g[k];
      mean_gy += g[k] * y[k];
    }
    mean_g /= n;
    mean_gy /= n;
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t k = offset(gi, i);
      gx[k] += inv_sigma[gi] * (g[k] - mean_g - y[k] * mean_gy);
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, T eps) {
  detail::check_inputs<T>({&x}, "layer_norm");
  require(x.rank() >= 1 && x.shape().back() > 0, ErrorCode::kInvalidAxis,
          "layer_norm: needs a non-empty last axis");
  require(eps > T(0), ErrorCode::kInvalidArgument, "layer_norm: eps must be positive");
  const std::size_t c = x.shape().back();
  const std::size_t groups = x.numel() / c;
  std::vector<T> out(x.numel());
  auto offset = [c](std::size_t gi, std::size_t i) { return gi * c + i; };
  auto inv_sigma = normalize_groups(x.values().data(), out.data(), groups, c, eps, offset);
  Node<T>* xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, "layer_norm",
                        [xn, c, inv_sigma = std::move(inv_sigma)](Node<T>& self) {
                          T* gx = grad_of(xn);
                          if (!gx) return;
                          auto off = [c](std::size_t gi, std::size_t i) { return gi * c + i; };
                          normalize_groups_backward(self.value.data(), self.grad.data(), gx,
                                                    inv_sigma, c, off);
                        });
}

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps) {
  detail::check_inputs<T>({&x}, "instance_norm");
  require(x.rank() >= 2, ErrorCode::kInvalidAxis, "instance_norm: needs spatial axes");
  require(eps > T(0), ErrorCode::kInvalidArgument, "instance_norm: eps must be positive");
  const std::size_t c = x.shape().back();
  const std::size_t count = x.numel() / c;
  std::vector<T> out(x.numel());
  auto offset = [c](std::size_t gi, std::size_t i) { return i * c + gi; };
  auto inv_sigma = normalize_groups(x.values().data(), out.data(), c, count, eps, offset);
  Node<T>* xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, "instance_norm",
                        [xn, c, count, inv_sigma = std::move(inv_sigma)](Node<T>& self) {
                          T* gx = grad_of(xn);
                          if (!gx) return;
                          auto off = [c](std::size_t gi, std::size_t i) { return i * c + gi; };
                          normalize_groups_backward(self.value.data(), self.grad.data(), gx,
                                                    inv_sigma, count, off);
                        });
}

#define DEAP_INSTANTIATE(T)                                      \
  template Tensor<T> softmax<T>(const Tensor<T>&, std::size_t);  \
  template Tensor<T> layer_norm<T>(const Tensor<T>&, T);         \
  template Tensor<T> instance_norm<T>(const Tensor<T>&, T);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
