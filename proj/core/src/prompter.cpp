// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/prompter.hpp"

#include <cmath>

#include "deap/error.hpp"
#include "nn_util.hpp"
#include "op_util.hpp"

namespace deap {

std::string prompt_mode_name(PromptMode mode) {
  switch (mode) {
    case PromptMode::kDual:
      return "dual";
    case PromptMode::kSpatialOnly:
      return "spatial_only";
    case PromptMode::kNone:
      return "none";
  }
  return "?";
}

PromptMode parse_prompt_mode(const std::string& name) {
  if (name == "dual") return PromptMode::kDual;
  if (name == "spatial_only") return PromptMode::kSpatialOnly;
  if (name == "none") return PromptMode::kNone;
  fail(ErrorCode::kConfig, "unknown prompter mode '" + name + "' (expected dual, spatial_only or none)");
}

void validate_prompter_config(const PrompterConfig& cfg, std::size_t channels,
                              std::size_t tokens) {
  require(cfg.prompt_layer == 3 || cfg.prompt_layer == 6 || cfg.prompt_layer == 9 ||
              cfg.prompt_layer == 12,
          ErrorCode::kConfig,
          "prompter.layer must be one of 3, 6, 9, 12 (got " + std::to_string(cfg.prompt_layer) + ")");
  if (cfg.mode == PromptMode::kNone) return;
  require(cfg.reduced_tokens >= 1 && cfg.reduced_tokens <= tokens, ErrorCode::kConfig,
          "prompter.n must be in [1, " + std::to_string(tokens) + "], got " +
              std::to_string(cfg.reduced_tokens));
  require(cfg.mode != PromptMode::kDual || channels % 2 == 0, ErrorCode::kConfig,
          "dual prompter needs an even channel count");
}

template <typename T>
PrompterParams<T> add_prompter_params(ParameterStore<T>& store, const std::string& prefix,
                                      std::size_t channels, std::size_t tokens,
                                      const PrompterConfig& cfg, std::mt19937_64& rng) {
  validate_prompter_config(cfg, channels, tokens);
  PrompterParams<T> p;
  if (cfg.mode == PromptMode::kNone) return p;
  const std::size_t c = channels, n = cfg.reduced_tokens, half = channels / 2;
  const std::string b = prefix + ".";
  auto ones = [](std::size_t k) { return std::vector<T>(k, T(1)); };
  auto zeros = [](std::size_t k) { return std::vector<T>(k, T(0)); };
  auto square = [&](const std::string& name) {
    return store.add(b + name, {c, c}, scaled_normal<T>(rng, c * c, c));
  };
  p.wq = square("wq");
  p.wk = square("wk");
  p.wv_sa = square("wv_sa");
  p.reduce_k = store.add(b + "reduce_k", {n, tokens}, truncated_normal<T>(rng, n * tokens, 0.02));
  p.reduce_v = store.add(b + "reduce_v", {n, tokens}, truncated_normal<T>(rng, n * tokens, 0.02));
  p.norm_q_sa_gamma = store.add(b + "norm_q_sa.gamma", {c}, ones(c));
  p.norm_q_sa_beta = store.add(b + "norm_q_sa.beta", {c}, zeros(c));
  if (cfg.mode == PromptMode::kSpatialOnly) {
    p.out_sa = square("out_sa");
    return p;
  }
  if (!cfg.share_qk) {
    p.wq_ca = square("wq_ca");
    p.wk_ca = square("wk_ca");
  }
  p.wv_ca = square("wv_ca");
  p.norm_q_ca_gamma = store.add(b + "norm_q_ca.gamma", {c}, ones(c));
  p.norm_q_ca_beta = store.add(b + "norm_q_ca.beta", {c}, zeros(c));
  p.norm_k_ca_gamma = store.add(b + "norm_k_ca.gamma", {c}, ones(c));
  p.norm_k_ca_beta = store.add(b + "norm_k_ca.beta", {c}, zeros(c));
  p.down_sa = store.add(b + "down_sa", {c, half}, scaled_normal<T>(rng, c * half, c));
  p.down_ca = store.add(b + "down_ca", {c, half}, scaled_normal<T>(rng, c * half, c));
  return p;
}

namespace {

template <typename T>
void check_map(const Tensor<T>& z, const Tensor<T>& w, const char* op) {
  detail::check_defined(z, op);
  if (z.rank() != 4) detail::shape_error(op, "expected [H, W, D, C], got " + shape_str(z.shape()));
  require(w.defined(), ErrorCode::kInvalidArgument, std::string(op) + ": missing weights");
  if (w.dim(0) != z.dim(3)) {
    detail::shape_error(op, "map has " + std::to_string(z.dim(3)) + " channels, weights expect " +
                                std::to_string(w.dim(0)));
  }
}

template <typename T>
T temperature(const PrompterConfig& cfg, std::size_t c) {
  return cfg.attn_scaling ? T(1) / std::sqrt(static_cast<T>(c)) : T(1);
}

// Inputs are token matrices: zq = Z Wq, zk = Z Wk, zv = Z Wv_sa, all [M, C].
template <typename T>
Tensor<T> spatial_core(const Tensor<T>& zq, const Tensor<T>& zk, const Tensor<T>& zv,
                       const PrompterParams<T>& p, const PrompterConfig& cfg, Tensor<T>* weights) {
  const std::size_t m = zq.dim(0), c = zq.dim(1);
  require(cfg.reduced_tokens <= m, ErrorCode::kInvalidArgument,
          "spatial_attention: n = " + std::to_string(cfg.reduced_tokens) + " exceeds M = " +
              std::to_string(m));
  if (p.reduce_k.rank() != 2 || p.reduce_k.dim(1) != m || p.reduce_v.rank() != 2 ||
      p.reduce_v.dim(1) != m) {
    detail::shape_error("spatial_attention", "token reducers do not match M = " + std::to_string(m));
  }
  Tensor<T> q = detail::layer_norm_affine(zq, p.norm_q_sa_gamma, p.norm_q_sa_beta);
  Tensor<T> kr = matmul(p.reduce_k, zk);  // [n, C]
  Tensor<T> vr = matmul(p.reduce_v, zv);  // [n, C]
  Tensor<T> a = softmax(scale(matmul(q, transpose(kr)), temperature<T>(cfg, c)), 1);  // [M, n]
  if (weights) *weights = a;
  return matmul(a, vr);
}

template <typename T>
Tensor<T> channel_core(const Tensor<T>& zq, const Tensor<T>& zk, const Tensor<T>& zv,
                       const PrompterParams<T>& p, const PrompterConfig& cfg, Tensor<T>* affinity) {
  const std::size_t c = zq.dim(1);
  Tensor<T> q = detail::layer_norm_affine(zq, p.norm_q_ca_gamma, p.norm_q_ca_beta);
  Tensor<T> k = detail::layer_norm_affine(zk, p.norm_k_ca_gamma, p.norm_k_ca_beta);
  Tensor<T> a = softmax(scale(matmul(transpose(q), k), temperature<T>(cfg, c)), 1);  // [C, C]
  if (affinity) *affinity = a;
  return matmul(zv, transpose(a));
}

}  // namespace

template <typename T>
Tensor<T> spatial_attention(const Tensor<T>& z, const PrompterParams<T>& p,
                            const PrompterConfig& cfg, Tensor<T>* weights) {
  check_map(z, p.wq, "spatial_attention");
  Tensor<T> tokens = detail::as_tokens(z);
  Tensor<T> out = spatial_core(matmul(tokens, p.wq), matmul(tokens, p.wk),
                               matmul(tokens, p.wv_sa), p, cfg, weights);
  return reshape(out, z.shape());
}

template <typename T>
Tensor<T> channel_attention(const Tensor<T>& z, const PrompterParams<T>& p,
                            const PrompterConfig& cfg, Tensor<T>* affinity) {
  check_map(z, p.channel_wq(), "channel_attention");
  Tensor<T> tokens = detail::as_tokens(z);
  Tensor<T> out = channel_core(matmul(tokens, p.channel_wq()), matmul(tokens, p.channel_wk()),
                               matmul(tokens, p.wv_ca), p, cfg, affinity);
  return reshape(out, z.shape());
}

template <typename T>
Tensor<T> dual_prompt(const Tensor<T>& z, const PrompterParams<T>& p, const PrompterConfig& cfg) {
  check_map(z, p.wq, "dual_prompt");
  require(z.dim(3) % 2 == 0, ErrorCode::kInvalidArgument, "dual_prompt: channel count must be even");
  Tensor<T> tokens = detail::as_tokens(z);
  Tensor<T> zq = matmul(tokens, p.wq);
  Tensor<T> zk = matmul(tokens, p.wk);
  Tensor<T> sa = spatial_core<T>(zq, zk, matmul(tokens, p.wv_sa), p, cfg, nullptr);
  Tensor<T> ca;
  if (p.wq_ca.defined()) {
    ca = channel_core<T>(matmul(tokens, p.wq_ca), matmul(tokens, p.wk_ca), matmul(tokens, p.wv_ca), p,
                      cfg, nullptr);
  } else {
    ca = channel_core<T>(zq, zk, matmul(tokens, p.wv_ca), p, cfg, nullptr);
  }
  Tensor<T> fused = concat<T>({matmul(sa, p.down_sa), matmul(ca, p.down_ca)}, 1);
  return add(z, reshape(fused, z.shape()));
}

template <typename T>
Tensor<T> prompt(const Tensor<T>& z, const PrompterParams<T>& p, const PrompterConfig& cfg) {
  switch (cfg.mode) {
    case PromptMode::kDual:
      return dual_prompt(z, p, cfg);
    case PromptMode::kSpatialOnly: {
      Tensor<T> sa = detail::as_tokens(spatial_attention(z, p, cfg));
      return add(z, reshape(matmul(sa, p.out_sa), z.shape()));
    }
    case PromptMode::kNone:
      return z;
  }
  return z;
}

template <typename T>
EncoderTaps<T> attach_prompter(const EncoderTaps<T>& taps, const PrompterParams<T>& p,
                               const PrompterConfig& cfg) {
  require(cfg.prompt_layer == 3 || cfg.prompt_layer == 6 || cfg.prompt_layer == 9 ||
              cfg.prompt_layer == 12,
          ErrorCode::kInvalidArgument,
          "attach_prompter: layer must be one of 3, 6, 9, 12 (got " +
              std::to_string(cfg.prompt_layer) + ")");
  EncoderTaps<T> out = taps;
  bool found = false;
  for (std::size_t i = 0; i < out.layers.size(); ++i) {
    if (out.layers[i] == cfg.prompt_layer) {
      out.maps[i] = prompt(out.maps[i], p, cfg);
      found = true;
    }
  }
  require(found, ErrorCode::kInvalidArgument,
          "attach_prompter: no tap at layer " + std::to_string(cfg.prompt_layer));
  return out;
}

#define DEAP_INSTANTIATE(T)                                                                    \
  template PrompterParams<T> add_prompter_params<T>(ParameterStore<T>&, const std::string&,    \
                                                    std::size_t, std::size_t,                  \
                                                    const PrompterConfig&, std::mt19937_64&);  \
  template Tensor<T> spatial_attention<T>(const Tensor<T>&, const PrompterParams<T>&,         \
                                          const PrompterConfig&, Tensor<T>*);                  \
  template Tensor<T> channel_attention<T>(const Tensor<T>&, const PrompterParams<T>&,         \
                                          const PrompterConfig&, Tensor<T>*);                  \
  template Tensor<T> dual_prompt<T>(const Tensor<T>&, const PrompterParams<T>&,               \
                                    const PrompterConfig&);                                    \
  template Tensor<T> prompt<T>(const Tensor<T>&, const PrompterParams<T>&, const PrompterConfig&); \
  template EncoderTaps<T> attach_prompter<T>(const EncoderTaps<T>&, const PrompterParams<T>&, \
                                             const PrompterConfig&);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
