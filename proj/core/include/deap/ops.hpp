// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations. Every op validates shapes and rejects
// non-finite inputs; volumetric tensors are channels-last, [H, W, D, C].

#ifndef DEAP_OPS_HPP_
#define DEAP_OPS_HPP_

#include <array>
#include <cstddef>
#include <vector>

#include "deap/tensor.hpp"

namespace deap {

using Index3 = std::array<std::size_t, 3>;

struct Conv3dOptions {
  Index3 stride{1, 1, 1};
  Index3 padding{0, 0, 0};
};

// [m, k] x [k, n] -> [m, n]
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// 2-D transpose.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& axes);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// x: [H, W, D, Cin], weight: [kh, kw, kd, Cin, Cout], bias: [Cout] or
// undefined. Output [Ho, Wo, Do, Cout] with Ho = (H + 2p - kh) / s + 1.
// Lowered to patch matrices and a GEMM.
template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv3dOptions& options = {});

// Direct seven-loop convolution, forward values only. Reference for conv3d.
template <typename T>
Tensor<T> conv3d_direct(const Tensor<T>& x, const Tensor<T>& weight,
                        const Tensor<T>& bias, const Conv3dOptions& options = {});

// Per-channel convolution. weight: [kh, kw, kd, C], bias: [C] or undefined.
template <typename T>
Tensor<T> depthwise_conv3d(const Tensor<T>& x, const Tensor<T>& weight,
                           const Tensor<T>& bias, const Conv3dOptions& options = {});

// Trilinear resampling of [H, W, D, C] to the given spatial size using
// half-pixel centers (align_corners = false).
template <typename T>
Tensor<T> trilinear_resize(const Tensor<T>& x, const Index3& size);

template <typename T>
Tensor<T> trilinear_upsample(const Tensor<T>& x, std::size_t factor);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

// tanh approximation.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

template <typename T>
Tensor<T> log(const Tensor<T>& x);

// Gradient passes only where lo <= x <= hi.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

template <typename T>
Tensor<T> softmax(const Tensor<T>& x, std::size_t axis);

// Normalizes over the last axis. No affine.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, T eps = T(1e-6));

// Normalizes each channel (last axis) over all remaining axes. No affine.
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, T eps = T(1e-5));

// x * gamma + beta, broadcast along the last axis.
template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta);

// x + bias, broadcast along the last axis.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value);

// Full reductions to a [1] tensor.
template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x);

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x);

}  // namespace deap

#endif  // DEAP_OPS_HPP_
