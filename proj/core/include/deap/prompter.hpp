// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Automatic prompt module built from two attentions over one encoder map
// Z ([H, W, D, C], M = H*W*D tokens):
//
//   spatial   Q = LN(Z Wq), Kr = Rk (Z Wk), Vr = Rv (Z Wv_sa)
//             out = softmax_n(Q Kr^T * t) Vr          Rk, Rv: [n, M]
//   channel   Q = LN(Z Wq), K = LN(Z Wk), V = Z Wv_ca
//             A = softmax_rows(Q^T K * t)             [C, C]
//             out = V A^T                             (row j mixes into channel j)
//   dual      Z + concat(spatial Wd_sa, channel Wd_ca)  Wd_*: [C, C/2]
//
// t is 1/sqrt(C) when attn_scaling is on, else 1. With share_qk both
// attentions read the same Wq and Wk; the three norms stay separate.

#ifndef DEAP_PROMPTER_HPP_
#define DEAP_PROMPTER_HPP_

#include <cstddef>
#include <random>
#include <string>

#include "deap/encoder.hpp"
#include "deap/ops.hpp"
#include "deap/params.hpp"

namespace deap {

enum class PromptMode {
  kDual,
  // Spatial attention only, projected C -> C and added back.
  kSpatialOnly,
  kNone,
};

std::string prompt_mode_name(PromptMode mode);
PromptMode parse_prompt_mode(const std::string& name);

struct PrompterConfig {
  std::size_t reduced_tokens = 64;
  bool share_qk = true;
  std::size_t prompt_layer = 12;
  bool attn_scaling = true;
  PromptMode mode = PromptMode::kDual;
};

void validate_prompter_config(const PrompterConfig& cfg, std::size_t channels,
                              std::size_t tokens);

template <typename T>
struct PrompterParams {
  Tensor<T> wq, wk;           // [C, C]; spatial, and channel when shared
  Tensor<T> wq_ca, wk_ca;     // [C, C]; only when !share_qk
  Tensor<T> wv_sa, wv_ca;     // [C, C]
  Tensor<T> reduce_k, reduce_v;  // [n, M]
  Tensor<T> norm_q_sa_gamma, norm_q_sa_beta;
  Tensor<T> norm_q_ca_gamma, norm_q_ca_beta;
  Tensor<T> norm_k_ca_gamma, norm_k_ca_beta;
  Tensor<T> down_sa, down_ca;  // [C, C/2]
  Tensor<T> out_sa;            // [C, C]; spatial-only mode

  const Tensor<T>& channel_wq() const { return wq_ca.defined() ? wq_ca : wq; }
  const Tensor<T>& channel_wk() const { return wk_ca.defined() ? wk_ca : wk; }
};

// Registers "<prefix>.*" entries needed by cfg.mode. Nothing for kNone.
template <typename T>
PrompterParams<T> add_prompter_params(ParameterStore<T>& store, const std::string& prefix,
                                      std::size_t channels, std::size_t tokens,
                                      const PrompterConfig& cfg, std::mt19937_64& rng);

// `weights`, when given, receives the [M, n] attention matrix.
template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& z, const PrompterParams<T>& p,
                            const PrompterConfig& cfg, Tensor<T>* weights = nullptr);

// `affinity`, when given, receives the row-stochastic [C, C] matrix.
template <typename T>
Tensor<T> channel_attention(const Tensor<T>& z, const PrompterParams<T>& p,
                            const PrompterConfig& cfg, Tensor<T>* affinity = nullptr);

template <typename T>
Tensor<T> dual_prompt(const Tensor<T>& z, const PrompterParams<T>& p, const PrompterConfig& cfg);

// Applies cfg.mode to one map.
template <typename T>
Tensor<T> prompt(const Tensor<T>& z, const PrompterParams<T>& p, const PrompterConfig& cfg);

// Replaces the tap at cfg.prompt_layer with prompt(tap); the rest pass
// through as the same tensors.
template <typename T>
EncoderTaps<T> attach_prompter(const EncoderTaps<T>& taps, const PrompterParams<T>& p,
                               const PrompterConfig& cfg);

}  // namespace deap

#endif  // DEAP_PROMPTER_HPP_
