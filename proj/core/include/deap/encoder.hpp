// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Transformer image encoder with a frozen core and a trainable bottleneck
// adapter running parallel to each MLP:
//
//   Zd = Norm1(Z_prev)
//   Zh = Z_prev + Attention(Zd)
//   Zdd = Norm2(Zh)
//   Z  = MLP(Zdd) + s * Adapter(Zdd)          (+ Zh when mlp_residual)
//
// Adapter(X) = relu(X W_down) W_up, bias-free.

#ifndef DEAP_ENCODER_HPP_
#define DEAP_ENCODER_HPP_

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "deap/ops.hpp"
#include "deap/params.hpp"

namespace deap {

enum class Activation { kGelu, kRelu };

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct EncoderConfig {
  std::size_t layers = 12;
  std::size_t heads = 4;
  std::size_t adapter_dim = 16;
  double scale = 1.0;
  std::vector<std::size_t> taps{3, 6, 9, 12};
  std::size_t mlp_ratio = 4;
  Activation mlp_activation = Activation::kGelu;
  // Adds the post-attention stream Zh back after the MLP. Off by default.
  bool mlp_residual = false;
};

// Rejects heads not dividing C, adapter_dim outside [1, C), taps outside
// 1..layers, non-finite scale.
void validate_encoder_config(const EncoderConfig& cfg, std::size_t channels);

template <typename T>
struct AdapterParams {
  Tensor<T> down;  // [C, l]
  Tensor<T> up;    // [l, C]
};

template <typename T>
struct AttentionParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;  // [C, C] and [C]
};

template <typename T>
struct LayerParams {
  Tensor<T> norm1_gamma, norm1_beta;
  AttentionParams<T> attn;
  Tensor<T> norm2_gamma, norm2_beta;
  Tensor<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;  // [C, rC], [rC], [rC, C], [C]
  AdapterParams<T> adapter;
};

// Registers "<prefix>.layerNN.{norm1,attn,norm2,mlp,adapter}.*" for every
// layer. Frozen weights are random (fan-in scaled); W_up starts small so
// the adapter branch is close to, but not exactly, silent.
template <typename T>
std::vector<LayerParams<T>> add_encoder_params(ParameterStore<T>& store, const std::string& prefix,
                                               std::size_t channels, const EncoderConfig& cfg,
                                               std::mt19937_64& rng);

// Token-wise on any tensor whose last axis is C.
template <typename T>
Tensor<T> adapter_forward(const Tensor<T>& x, const AdapterParams<T>& p);

// Global multi-head self-attention over all tokens of x ([..., C]) with
// 1/sqrt(C/heads) scaling. When `weights` is given it receives each head's
// [M, M] row-stochastic attention matrix.
template <typename T>
Tensor<T> self_attention(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t heads,
                         std::vector<Tensor<T>>* weights = nullptr);

template <typename T>
Tensor<T> mlp_forward(const Tensor<T>& x, const LayerParams<T>& p, Activation activation);

template <typename T>
Tensor<T> layer_forward(const Tensor<T>& z_prev, const LayerParams<T>& p,
                        const EncoderConfig& cfg);

template <typename T>
struct EncoderTaps {
  std::vector<std::size_t> layers;
  std::vector<Tensor<T>> maps;

  // Map recorded after `layer`; throws kInvalidArgument when absent.
  const Tensor<T>& at(std::size_t layer) const;
};

template <typename T>
EncoderTaps<T> encode(const Tensor<T>& features, const std::vector<LayerParams<T>>& layers,
                      const EncoderConfig& cfg);

// Freezes encoder attention, MLP and norm affines; leaves adapters, patch
// and positional embeddings, prompter and decoder trainable. Throws
// kUnknownParameter on a name it does not recognize.
template <typename T>
void apply_freeze_policy(ParameterStore<T>& store);

}  // namespace deap

#endif  // DEAP_ENCODER_HPP_
