// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Small layer helpers shared by the model modules.

#ifndef DEAP_SRC_NN_UTIL_HPP_
#define DEAP_SRC_NN_UTIL_HPP_

#include <string>

#include "deap/error.hpp"
#include "deap/ops.hpp"

namespace deap::detail {

// [..., C] -> [M, C]
template <typename T>
Tensor<T> as_tokens(const Tensor<T>& x) {
  const std::size_t c = x.shape().back();
  return reshape(x, {x.numel() / c, c});
}

// x [M, Cin] @ w [Cin, Cout] (+ b)
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b = {}) {
  Tensor<T> y = matmul(x, w);
  return b.defined() ? add_bias(y, b) : y;
}

template <typename T>
Tensor<T> layer_norm_affine(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  return channel_affine(layer_norm(x), gamma, beta);
}

template <typename T>
void check_step(const Tensor<T>& t, const std::string& where) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) fail(ErrorCode::kNonFinite, where + " produced non-finite values");
  }
}

}  // namespace deap::detail

#endif  // DEAP_SRC_NN_UTIL_HPP_
