// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Volume -> token grid. Two modes:
//
//   pseudo3d  in-plane [ph, pw, 1] convolution (N -> C, stride ph, pw, 1)
//             applied per depth slice, then a per-channel depth convolution
//             with kernel and stride pd.
//   true3d    one [ph, pw, pd] convolution with stride equal to the kernel.
//
// The pseudo3d kernels compose to K[a,b,c,n,o] = A[a,b,n,o] * B[c,o], so it
// can only express 3-D kernels that factor per output channel.

#ifndef DEAP_PATCH_EMBED_HPP_
#define DEAP_PATCH_EMBED_HPP_

#include <cstddef>
#include <random>
#include <string>

#include "deap/ops.hpp"
#include "deap/params.hpp"
#include "deap/volume_io.hpp"

namespace deap {

enum class PatchMode { kPseudo3d, kTrue3d };

std::string patch_mode_name(PatchMode mode);
PatchMode parse_patch_mode(const std::string& name);

struct PatchConfig {
  Index3 patch{4, 4, 4};
  std::size_t embed_dim = 64;
  PatchMode mode = PatchMode::kPseudo3d;
};

// Token grid for a volume; rejects non-divisible dims and C < 8.
Index3 token_grid(const Index3& volume_dims, const PatchConfig& cfg);

template <typename T>
struct PatchParams {
  // pseudo3d
  Tensor<T> w2d;     // [ph, pw, 1, N, C]
  Tensor<T> b2d;     // [C]
  Tensor<T> wdepth;  // [1, 1, pd, C]
  Tensor<T> bdepth;  // [C]
  // true3d
  Tensor<T> w3d;     // [ph, pw, pd, N, C]
  Tensor<T> b3d;     // [C]
};

// Registers "<prefix>.*" entries for the configured mode. Weights draw from
// a truncated normal with sd 0.02; biases start at zero.
template <typename T>
PatchParams<T> add_patch_params(ParameterStore<T>& store, const std::string& prefix,
                                const PatchConfig& cfg, std::size_t in_channels,
                                std::mt19937_64& rng);

// x: [H̄, W̄, D̄, N] -> [H, W, D, C]
template <typename T>
Tensor<T> pseudo3d_patch_embed(const Tensor<T>& x, const PatchParams<T>& p,
                               const PatchConfig& cfg);

template <typename T>
Tensor<T> true3d_patch_embed(const Tensor<T>& x, const PatchParams<T>& p,
                             const PatchConfig& cfg);

// Dispatches on cfg.mode.
template <typename T>
Tensor<T> patch_embed(const Tensor<T>& x, const PatchParams<T>& p, const PatchConfig& cfg);

template <typename T>
Tensor<T> volume_to_tensor(const Volume& v);

// Best factorization of a [ph, pw, pd, N, C] kernel into the pseudo3d form,
// from a rank-1 decomposition per output channel. `residual` is the max-abs
// entry of (kernel - product of factors).
struct SeparableFactors {
  std::vector<double> in_plane;  // [ph, pw, 1, N, C]
  std::vector<double> depth;     // [1, 1, pd, C]
  double residual = 0.0;
};
SeparableFactors separable_factorize(const std::vector<double>& kernel, const Index3& patch,
                                     std::size_t in_channels, std::size_t out_channels);

}  // namespace deap

#endif  // DEAP_PATCH_EMBED_HPP_
