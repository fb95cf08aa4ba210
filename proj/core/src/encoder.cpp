// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "deap/error.hpp"
#include "nn_util.hpp"
#include "op_util.hpp"

namespace deap {

std::string activation_name(Activation a) { return a == Activation::kGelu ? "gelu" : "relu"; }

Activation parse_activation(const std::string& name) {
  if (name == "gelu") return Activation::kGelu;
  if (name == "relu") return Activation::kRelu;
  fail(ErrorCode::kConfig, "unknown activation '" + name + "' (expected gelu or relu)");
}

void validate_encoder_config(const EncoderConfig& cfg, std::size_t channels) {
  require(cfg.layers >= 1, ErrorCode::kConfig, "encoder.layers must be >= 1");
  require(cfg.heads >= 1 && channels % cfg.heads == 0, ErrorCode::kConfig,
          "encoder.heads must divide the embedding dim");
  require(cfg.adapter_dim >= 1 && cfg.adapter_dim < channels, ErrorCode::kConfig,
          "encoder.adapter_dim must be in [1, C)");
  require(std::isfinite(cfg.scale), ErrorCode::kConfig, "encoder.scale must be finite");
  require(cfg.mlp_ratio >= 1, ErrorCode::kConfig, "encoder.mlp_ratio must be >= 1");
  require(!cfg.taps.empty(), ErrorCode::kConfig, "encoder.taps must not be empty");
  for (std::size_t i = 0; i < cfg.taps.size(); ++i) {
    require(cfg.taps[i] >= 1 && cfg.taps[i] <= cfg.layers, ErrorCode::kConfig,
            "encoder tap " + std::to_string(cfg.taps[i]) + " is outside 1.." +
                std::to_string(cfg.layers));
    require(i == 0 || cfg.taps[i] > cfg.taps[i - 1], ErrorCode::kConfig,
            "encoder.taps must be strictly increasing");
  }
}

template <typename T>
std::vector<LayerParams<T>> add_encoder_params(ParameterStore<T>& store, const std::string& prefix,
                                               std::size_t channels, const EncoderConfig& cfg,
                                               std::mt19937_64& rng) {
  validate_encoder_config(cfg, channels);
  const std::size_t c = channels, hidden = cfg.mlp_ratio * channels, l = cfg.adapter_dim;
  auto ones = [](std::size_t n) { return std::vector<T>(n, T(1)); };
  auto zeros = [](std::size_t n) { return std::vector<T>(n, T(0)); };
  std::vector<LayerParams<T>> layers;
  for (std::size_t i = 1; i <= cfg.layers; ++i) {
    char tag[16];
    std::snprintf(tag, sizeof(tag), "layer%02zu", i);
    const std::string base = prefix + "." + tag + ".";
    LayerParams<T> p;
    p.norm1_gamma = store.add(base + "norm1.gamma", {c}, ones(c));
    p.norm1_beta = store.add(base + "norm1.beta", {c}, zeros(c));
    p.attn.wq = store.add(base + "attn.wq", {c, c}, scaled_normal<T>(rng, c * c, c));
    p.attn.bq = store.add(base + "attn.bq", {c}, zeros(c));
    p.attn.wk = store.add(base + "attn.wk", {c, c}, scaled_normal<T>(rng, c * c, c));
    p.attn.bk = store.add(base + "attn.bk", {c}, zeros(c));
    p.attn.wv = store.add(base + "attn.wv", {c, c}, scaled_normal<T>(rng, c * c, c));
    p.attn.bv = store.add(base + "attn.bv", {c}, zeros(c));
    p.attn.wo = store.add(base + "attn.wo", {c, c}, scaled_normal<T>(rng, c * c, c));
    p.attn.bo = store.add(base + "attn.bo", {c}, zeros(c));
    p.norm2_gamma = store.add(base + "norm2.gamma", {c}, ones(c));
    p.norm2_beta = store.add(base + "norm2.beta", {c}, zeros(c));
    p.mlp_w1 = store.add(base + "mlp.w1", {c, hidden}, scaled_normal<T>(rng, c * hidden, c, 1.4));
    p.mlp_b1 = store.add(base + "mlp.b1", {hidden}, zeros(hidden));
    p.mlp_w2 = store.add(base + "mlp.w2", {hidden, c}, scaled_normal<T>(rng, hidden * c, hidden, 1.4));
    p.mlp_b2 = store.add(base + "mlp.b2", {c}, zeros(c));
    p.adapter.down = store.add(base + "adapter.down", {c, l}, scaled_normal<T>(rng, c * l, c));
    p.adapter.up = store.add(base + "adapter.up", {l, c}, truncated_normal<T>(rng, l * c, 0.02));
    layers.push_back(p);
  }
  return layers;
}

template <typename T>
Tensor<T> adapter_forward(const Tensor<T>& x, const AdapterParams<T>& p) {
  detail::check_defined(x, "adapter_forward");
  const std::size_t c = x.shape().back();
  if (p.down.rank() != 2 || p.down.dim(0) != c || p.up.rank() != 2 ||
      p.up.dim(0) != p.down.dim(1) || p.up.dim(1) != c) {
    detail::shape_error("adapter_forward", "input has " + std::to_string(c) +
                                               " channels but adapter weights are " +
                                               shape_str(p.down.shape()) + " and " +
                                               shape_str(p.up.shape()));
  }
  Tensor<T> h = relu(matmul(detail::as_tokens(x), p.down));
  return reshape(matmul(h, p.up), x.shape());
}

template <typename T>
Tensor<T> self_attention(const Tensor<T>& x, const AttentionParams<T>& p, std::size_t heads,
                         std::vector<Tensor<T>>* weights) {
  detail::check_defined(x, "self_attention");
  const std::size_t c = x.shape().back();
  require(heads >= 1 && c % heads == 0, ErrorCode::kInvalidArgument,
          "self_attention: heads must divide the channel count");
  const std::size_t dh = c / heads;
  Tensor<T> tokens = detail::as_tokens(x);
  Tensor<T> q = detail::linear(tokens, p.wq, p.bq);
  Tensor<T> k = detail::linear(tokens, p.wk, p.bk);
  Tensor<T> v = detail::linear(tokens, p.wv, p.bv);
  const T temperature = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Tensor<T>> outs;
  if (weights) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    Tensor<T> qh = heads == 1 ? q : slice(q, 1, h * dh, dh);
    Tensor<T> kh = heads == 1 ? k : slice(k, 1, h * dh, dh);
    Tensor<T> vh = heads == 1 ? v : slice(v, 1, h * dh, dh);
    Tensor<T> a = softmax(scale(matmul(qh, transpose(kh)), temperature), 1);
    if (weights) weights->push_back(a);
    outs.push_back(matmul(a, vh));
  }
  Tensor<T> merged = heads == 1 ? outs[0] : concat(outs, 1);
  return reshape(detail::linear(merged, p.wo, p.bo), x.shape());
}

template <typename T>
Tensor<T> mlp_forward(const Tensor<T>& x, const LayerParams<T>& p, Activation activation) {
  Tensor<T> h = detail::linear(detail::as_tokens(x), p.mlp_w1, p.mlp_b1);
  h = activation == Activation::kGelu ? gelu(h) : relu(h);
  return reshape(detail::linear(h, p.mlp_w2, p.mlp_b2), x.shape());
}

namespace {

// Runs one sub-step of a layer; errors raised inside it, including an op
// rejecting a non-finite input, come back prefixed with the sub-step.
template <typename T, typename F>
Tensor<T> sub_step(const char* what, F&& fn) {
  Tensor<T> out;
  try {
    out = fn();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("encoder layer: ") + what + ": " + e.what());
  }
  detail::check_step(out, std::string("encoder layer: ") + what);
  return out;
}

}  // namespace

template <typename T>
Tensor<T> layer_forward(const Tensor<T>& z_prev, const LayerParams<T>& p,
                        const EncoderConfig& cfg) {
  Tensor<T> zd = sub_step<T>("first norm", [&] {
    return detail::layer_norm_affine(z_prev, p.norm1_gamma, p.norm1_beta);
  });
  Tensor<T> zh = sub_step<T>("attention", [&] {
    return add(z_prev, self_attention(zd, p.attn, cfg.heads));
  });
  Tensor<T> zdd = sub_step<T>("second norm", [&] {
    return detail::layer_norm_affine(zh, p.norm2_gamma, p.norm2_beta);
  });
  Tensor<T> z = sub_step<T>("mlp", [&] { return mlp_forward(zdd, p, cfg.mlp_activation); });
  if (cfg.scale != 0.0) {
    z = sub_step<T>("adapter", [&] {
      return add(z, scale(adapter_forward(zdd, p.adapter), static_cast<T>(cfg.scale)));
    });
  }
  if (cfg.mlp_residual) z = sub_step<T>("output", [&] { return add(z, zh); });
  return z;
}

template <typename T>
const Tensor<T>& EncoderTaps<T>::at(std::size_t layer) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i] == layer) return maps[i];
  }
  fail(ErrorCode::kInvalidArgument, "no encoder tap at layer " + std::to_string(layer));
}

template <typename T>
EncoderTaps<T> encode(const Tensor<T>& features, const std::vector<LayerParams<T>>& layers,
                      const EncoderConfig& cfg) {
  detail::check_defined(features, "encode");
  require(features.rank() == 4, ErrorCode::kShapeMismatch,
          "encode: expected [H, W, D, C], got " + shape_str(features.shape()));
  validate_encoder_config(cfg, features.dim(3));
  require(layers.size() == cfg.layers, ErrorCode::kInvalidArgument,
          "encode: expected " + std::to_string(cfg.layers) + " layer parameter sets, got " +
              std::to_string(layers.size()));
  EncoderTaps<T> taps;
  Tensor<T> z = features;
  std::size_t next_tap = 0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    try {
      z = layer_forward(z, layers[i], cfg);
    } catch (const Error& e) {
      throw Error(e.code(), "layer " + std::to_string(i + 1) + ": " + e.what());
    }
    if (next_tap < cfg.taps.size() && cfg.taps[next_tap] == i + 1) {
      taps.layers.push_back(i + 1);
      taps.maps.push_back(z);
      ++next_tap;
    }
  }
  return taps;
}

namespace {

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.compare(0, prefix.size(), prefix) == 0;
}

}  // namespace

template <typename T>
void apply_freeze_policy(ParameterStore<T>& store) {
  std::vector<std::pair<std::string, bool>> decisions;
  for (const auto& e : store.entries()) {
    const std::string& name = e.name;
    bool frozen = false;
    if (starts_with(name, "encoder.layer")) {
      const auto dot = name.find('.', std::string("encoder.layer").size());
      const std::string part = dot == std::string::npos ? "" : name.substr(dot + 1);
      if (starts_with(part, "attn.") || starts_with(part, "mlp.") ||
          starts_with(part, "norm1.") || starts_with(part, "norm2.")) {
        frozen = true;
      } else if (!starts_with(part, "adapter.")) {
        fail(ErrorCode::kUnknownParameter, "freeze policy: unknown encoder parameter " + name);
      }
    } else if (!(starts_with(name, "patch.") || name == "pos_embed" ||
                 starts_with(name, "prompter.") || starts_with(name, "decoder."))) {
      fail(ErrorCode::kUnknownParameter, "freeze policy: unknown parameter " + name);
    }
    decisions.emplace_back(name, frozen);
  }
  // Validate everything before touching any flag.
  for (const auto& [name, frozen] : decisions) store.set_frozen(name, frozen);
}

#define DEAP_INSTANTIATE(T)                                                                     \
  template std::vector<LayerParams<T>> add_encoder_params<T>(                                   \
      ParameterStore<T>&, const std::string&, std::size_t, const EncoderConfig&,                \
      std::mt19937_64&);                                                                         \
  template Tensor<T> adapter_forward<T>(const Tensor<T>&, const AdapterParams<T>&);            \
  template Tensor<T> self_attention<T>(const Tensor<T>&, const AttentionParams<T>&,            \
                                       std::size_t, std::vector<Tensor<T>>*);                   \
  template Tensor<T> mlp_forward<T>(const Tensor<T>&, const LayerParams<T>&, Activation);      \
  template Tensor<T> layer_forward<T>(const Tensor<T>&, const LayerParams<T>&,                 \
                                      const EncoderConfig&);                                    \
  template struct EncoderTaps<T>;                                                                \
  template EncoderTaps<T> encode<T>(const Tensor<T>&, const std::vector<LayerParams<T>>&,      \
                                    const EncoderConfig&);                                      \
  template void apply_freeze_policy<T>(ParameterStore<T>&);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
