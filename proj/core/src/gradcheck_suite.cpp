// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/gradcheck_suite.hpp"

#include <algorithm>
#include <random>

#include "deap/decoder.hpp"
#include "deap/encoder.hpp"
#include "deap/error.hpp"
#include "deap/gradcheck.hpp"
#include "deap/metrics.hpp"
#include "deap/ops.hpp"
#include "deap/patch_embed.hpp"
#include "deap/prompter.hpp"

namespace deap {
namespace {

using T = Tensor<double>;
using Inputs = std::vector<T>;
using Rng = std::mt19937_64;

struct Instance {
  MultiTensorFn fn;
  Inputs inputs;
};

struct Check {
  std::string name;
  bool composite;
  std::function<Instance(Rng&, std::size_t)> make;
};

T uniform(Rng& rng, Shape shape, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = u(rng);
  return T::from_values(std::move(shape), std::move(v));
}

T normal(Rng& rng, Shape shape, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return T::from_values(std::move(shape), std::move(v));
}

// Values with |x| >= 0.1, so relu-like kinks stay out of the difference
// stencil.
T away_from_zero(Rng& rng, Shape shape) {
  T t = uniform(rng, std::move(shape), 0.1, 1.5);
  std::bernoulli_distribution sign(0.5);
  for (auto& x : t.mutable_values()) {
    if (sign(rng)) x = -x;
  }
  return t;
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Index3 dims3(Rng& rng, std::size_t lo, std::size_t hi) {
  return {pick(rng, lo, hi), pick(rng, lo, hi), pick(rng, lo, hi)};
}

Shape vol(const Index3& d, std::size_t c) { return {d[0], d[1], d[2], c}; }

Instance unary(Rng& rng, T (*op)(const T&), bool kinky) {
  Shape s{pick(rng, 1, 4), pick(rng, 1, 5)};
  return {[op](const Inputs& in) { return op(in[0]); },
          {kinky ? away_from_zero(rng, s) : normal(rng, s)}};
}

T relu_d(const T& x) { return relu(x); }
T gelu_d(const T& x) { return gelu(x); }
T sigmoid_d(const T& x) { return sigmoid(x); }
T transpose_d(const T& x) { return transpose(x); }
T sum_d(const T& x) { return reduce_sum(x); }
T mean_d(const T& x) { return reduce_mean(x); }

ConvBlockParams<double> block_from(const Inputs& in, std::size_t at) {
  return {in[at], in[at + 1]};
}

Inputs block_inputs(Rng& rng, std::size_t cin, std::size_t cout) {
  return {normal(rng, {3, 3, 3, cin, cout}, 0.3), normal(rng, {3, 3, 3, cout, cout}, 0.3)};
}

LayerParams<double> layer_from(const Inputs& in, std::size_t at) {
  LayerParams<double> p;
  p.norm1_gamma = in[at];
  p.norm1_beta = in[at + 1];
  p.attn = {in[at + 2], in[at + 3], in[at + 4], in[at + 5],
            in[at + 6], in[at + 7], in[at + 8], in[at + 9]};
  p.norm2_gamma = in[at + 10];
  p.norm2_beta = in[at + 11];
  p.mlp_w1 = in[at + 12];
  p.mlp_b1 = in[at + 13];
  p.mlp_w2 = in[at + 14];
  p.mlp_b2 = in[at + 15];
  p.adapter = {in[at + 16], in[at + 17]};
  return p;
}

Inputs layer_inputs(Rng& rng, std::size_t c, std::size_t hidden, std::size_t l) {
  Inputs in;
  in.push_back(uniform(rng, {c}, 0.5, 1.5));
  in.push_back(normal(rng, {c}, 0.1));
  for (int k = 0; k < 4; ++k) {
    in.push_back(normal(rng, {c, c}, 0.5));
    in.push_back(normal(rng, {c}, 0.1));
  }
  in.push_back(uniform(rng, {c}, 0.5, 1.5));
  in.push_back(normal(rng, {c}, 0.1));
  in.push_back(normal(rng, {c, hidden}, 0.5));
  in.push_back(normal(rng, {hidden}, 0.1));
  in.push_back(normal(rng, {hidden, c}, 0.5));
  in.push_back(normal(rng, {c}, 0.1));
  in.push_back(normal(rng, {c, l}, 0.5));
  in.push_back(normal(rng, {l, c}, 0.5));
  return in;
}

// Prompter inputs: z, then wq, wk, wv_sa, reduce_k, reduce_v, three norm
// affines, wv_ca, down_sa, down_ca and (unshared) wq_ca, wk_ca.
Inputs prompt_inputs(Rng& rng, const Index3& grid, std::size_t c, std::size_t n, bool share) {
  const std::size_t m = grid[0] * grid[1] * grid[2];
  Inputs in{normal(rng, vol(grid, c))};
  for (int k = 0; k < 3; ++k) in.push_back(normal(rng, {c, c}, 0.6));
  in.push_back(normal(rng, {n, m}, 0.4));
  in.push_back(normal(rng, {n, m}, 0.4));
  for (int k = 0; k < 3; ++k) {
    in.push_back(uniform(rng, {c}, 0.5, 1.5));
    in.push_back(normal(rng, {c}, 0.2));
  }
  in.push_back(normal(rng, {c, c}, 0.6));
  in.push_back(normal(rng, {c, c / 2}, 0.6));
  in.push_back(normal(rng, {c, c / 2}, 0.6));
  if (!share) {
    in.push_back(normal(rng, {c, c}, 0.6));
    in.push_back(normal(rng, {c, c}, 0.6));
  }
  return in;
}

PrompterParams<double> prompt_from(const Inputs& in, bool share) {
  PrompterParams<double> p;
  p.wq = in[1];
  p.wk = in[2];
  p.wv_sa = in[3];
  p.reduce_k = in[4];
  p.reduce_v = in[5];
  p.norm_q_sa_gamma = in[6];
  p.norm_q_sa_beta = in[7];
  p.norm_q_ca_gamma = in[8];
  p.norm_q_ca_beta = in[9];
  p.norm_k_ca_gamma = in[10];
  p.norm_k_ca_beta = in[11];
  p.wv_ca = in[12];
  p.down_sa = in[13];
  p.down_ca = in[14];
  if (!share) {
    p.wq_ca = in[15];
    p.wk_ca = in[16];
  }
  return p;
}

PrompterConfig prompt_cfg(std::size_t n, bool share, bool scaling) {
  PrompterConfig cfg;
  cfg.reduced_tokens = n;
  cfg.share_qk = share;
  cfg.attn_scaling = scaling;
  return cfg;
}

std::vector<Check> build_checks() {
  std::vector<Check> c;
  auto op = [&c](std::string name, std::function<Instance(Rng&, std::size_t)> f) {
    c.push_back({std::move(name), false, std::move(f)});
  };
  auto block = [&c](std::string name, std::function<Instance(Rng&, std::size_t)> f) {
    c.push_back({std::move(name), true, std::move(f)});
  };

  op("matmul", [](Rng& r, std::size_t) {
    const std::size_t m = pick(r, 1, 4), k = pick(r, 1, 4), n = pick(r, 1, 4);
    return Instance{[](const Inputs& in) { return matmul(in[0], in[1]); },
                    {normal(r, {m, k}), normal(r, {k, n})}};
  });
  op("transpose", [](Rng& r, std::size_t) { return unary(r, transpose_d, false); });
  op("permute", [](Rng& r, std::size_t) {
    std::vector<std::size_t> axes{0, 1, 2, 3};
    std::shuffle(axes.begin(), axes.end(), r);
    return Instance{[axes](const Inputs& in) { return permute(in[0], axes); },
                    {normal(r, {pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3)})}};
  });
  op("reshape", [](Rng& r, std::size_t) {
    const std::size_t a = pick(r, 1, 4), b = pick(r, 1, 4);
    return Instance{[a, b](const Inputs& in) { return reshape(in[0], Shape{b, a}); },
                    {normal(r, {a, b})}};
  });
  op("conv3d", [](Rng& r, std::size_t) {
    Conv3dOptions o;
    const Index3 k = dims3(r, 1, 3);
    for (int a = 0; a < 3; ++a) {
      o.stride[a] = pick(r, 1, 2);
      o.padding[a] = pick(r, 0, k[a] / 2);
    }
    const Index3 d{k[0] + pick(r, 0, 2), k[1] + pick(r, 0, 2), k[2] + pick(r, 0, 2)};
    const std::size_t cin = pick(r, 1, 3), cout = pick(r, 1, 3);
    const bool bias = r() % 2 == 0;
    Inputs in{normal(r, vol(d, cin)), normal(r, {k[0], k[1], k[2], cin, cout})};
    if (bias) in.push_back(normal(r, {cout}));
    return Instance{[o, bias](const Inputs& x) {
                      return conv3d(x[0], x[1], bias ? x[2] : T(), o);
                    },
                    in};
  });
  op("depthwise_conv3d", [](Rng& r, std::size_t) {
    Conv3dOptions o;
    const Index3 k = dims3(r, 1, 3);
    for (int a = 0; a < 3; ++a) {
      o.stride[a] = pick(r, 1, 2);
      o.padding[a] = pick(r, 0, k[a] / 2);
    }
    const Index3 d{k[0] + pick(r, 0, 2), k[1] + pick(r, 0, 2), k[2] + pick(r, 0, 2)};
    const std::size_t ch = pick(r, 1, 3);
    const bool bias = r() % 2 == 0;
    Inputs in{normal(r, vol(d, ch)), normal(r, {k[0], k[1], k[2], ch})};
    if (bias) in.push_back(normal(r, {ch}));
    return Instance{[o, bias](const Inputs& x) {
                      return depthwise_conv3d(x[0], x[1], bias ? x[2] : T(), o);
                    },
                    in};
  });
  op("trilinear_resize", [](Rng& r, std::size_t) {
    const Index3 in = dims3(r, 1, 3), out = dims3(r, 1, 5);
    return Instance{[out](const Inputs& x) { return trilinear_resize(x[0], out); },
                    {normal(r, vol(in, pick(r, 1, 2)))}};
  });
  op("trilinear_upsample", [](Rng& r, std::size_t) {
    const std::size_t f = pick(r, 2, 3);
    return Instance{[f](const Inputs& x) { return trilinear_upsample(x[0], f); },
                    {normal(r, vol(dims3(r, 1, 3), pick(r, 1, 2)))}};
  });
  op("relu", [](Rng& r, std::size_t) { return unary(r, relu_d, true); });
  op("gelu", [](Rng& r, std::size_t) { return unary(r, gelu_d, false); });
  op("sigmoid", [](Rng& r, std::size_t) { return unary(r, sigmoid_d, false); });
  op("log", [](Rng& r, std::size_t) {
    return Instance{[](const Inputs& x) { return log(x[0]); },
                    {uniform(r, {pick(r, 1, 4), pick(r, 1, 4)}, 0.2, 3.0)}};
  });
  op("clamp", [](Rng& r, std::size_t) {
    // Inputs sit clearly inside or outside [-0.5, 0.5].
    T x = away_from_zero(r, {pick(r, 1, 4), pick(r, 1, 4)});
    for (auto& v : x.mutable_values()) {
      if (std::abs(std::abs(v) - 0.5) < 0.05) v *= 1.3;
    }
    return Instance{[](const Inputs& in) { return clamp(in[0], -0.5, 0.5); }, {x}};
  });
  op("softmax", [](Rng& r, std::size_t) {
    const std::size_t axis = pick(r, 0, 2);
    return Instance{[axis](const Inputs& x) { return softmax(x[0], axis); },
                    {normal(r, {pick(r, 1, 3), pick(r, 1, 4), pick(r, 1, 4)}, 1.5)}};
  });
  op("layer_norm", [](Rng& r, std::size_t) {
    return Instance{[](const Inputs& x) { return layer_norm(x[0]); },
                    {normal(r, {pick(r, 1, 4), pick(r, 2, 6)})}};
  });
  op("instance_norm", [](Rng& r, std::size_t) {
    Index3 d = dims3(r, 1, 3);
    d[0] = std::max<std::size_t>(d[0], 2);
    return Instance{[](const Inputs& x) { return instance_norm(x[0]); },
                    {normal(r, vol(d, pick(r, 1, 3)))}};
  });
  op("channel_affine", [](Rng& r, std::size_t) {
    const std::size_t ch = pick(r, 1, 4);
    return Instance{[](const Inputs& x) { return channel_affine(x[0], x[1], x[2]); },
                    {normal(r, {pick(r, 1, 3), pick(r, 1, 3), ch}), normal(r, {ch}),
                     normal(r, {ch})}};
  });
  op("add_bias", [](Rng& r, std::size_t) {
    const std::size_t ch = pick(r, 1, 4);
    return Instance{[](const Inputs& x) { return add_bias(x[0], x[1]); },
                    {normal(r, {pick(r, 1, 4), ch}), normal(r, {ch})}};
  });
  op("concat", [](Rng& r, std::size_t) {
    const std::size_t axis = pick(r, 0, 2);
    Shape a{pick(r, 1, 3), pick(r, 1, 3), pick(r, 1, 3)};
    Shape b = a;
    b[axis] = pick(r, 1, 3);
    return Instance{[axis](const Inputs& x) { return concat(x, axis); },
                    {normal(r, a), normal(r, b)}};
  });
  op("slice", [](Rng& r, std::size_t) {
    const std::size_t axis = pick(r, 0, 1);
    Shape s{pick(r, 2, 4), pick(r, 2, 4)};
    const std::size_t start = pick(r, 0, s[axis] - 1);
    const std::size_t len = pick(r, 1, s[axis] - start);
    return Instance{[=](const Inputs& x) { return slice(x[0], axis, start, len); },
                    {normal(r, s)}};
  });
  op("add", [](Rng& r, std::size_t) {
    Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    return Instance{[](const Inputs& x) { return add(x[0], x[1]); }, {normal(r, s), normal(r, s)}};
  });
  op("sub", [](Rng& r, std::size_t) {
    Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    return Instance{[](const Inputs& x) { return sub(x[0], x[1]); }, {normal(r, s), normal(r, s)}};
  });
  op("mul", [](Rng& r, std::size_t) {
    Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    return Instance{[](const Inputs& x) { return mul(x[0], x[1]); }, {normal(r, s), normal(r, s)}};
  });
  op("div", [](Rng& r, std::size_t) {
    Shape s{pick(r, 1, 4), pick(r, 1, 4)};
    return Instance{[](const Inputs& x) { return div(x[0], x[1]); },
                    {normal(r, s), uniform(r, s, 0.5, 2.0)}};
  });
  op("scale", [](Rng& r, std::size_t) {
    const double f = std::normal_distribution<double>(0.0, 2.0)(r);
    return Instance{[f](const Inputs& x) { return scale(x[0], f); },
                    {normal(r, {pick(r, 1, 4), pick(r, 1, 4)})}};
  });
  op("add_scalar", [](Rng& r, std::size_t) {
    const double f = std::normal_distribution<double>(0.0, 2.0)(r);
    return Instance{[f](const Inputs& x) { return add_scalar(x[0], f); },
                    {normal(r, {pick(r, 1, 4), pick(r, 1, 4)})}};
  });
  op("reduce_sum", [](Rng& r, std::size_t) { return unary(r, sum_d, false); });
  op("reduce_mean", [](Rng& r, std::size_t) { return unary(r, mean_d, false); });

  block("adapter", [](Rng& r, std::size_t) {
    const std::size_t ch = pick(r, 2, 5), l = pick(r, 1, ch - 1);
    // Pre-activations land away from the relu kink often enough; kinks
    // that remain are detected and excluded by the checker.
    return Instance{[](const Inputs& x) {
                      return adapter_forward(x[0], AdapterParams<double>{x[1], x[2]});
                    },
                    {normal(r, {pick(r, 1, 4), ch}), normal(r, {ch, l}), normal(r, {l, ch})}};
  });
  block("self_attention", [](Rng& r, std::size_t) {
    const std::size_t heads = pick(r, 1, 2), ch = heads * pick(r, 1, 3);
    Inputs in{normal(r, vol(dims3(r, 1, 2), ch))};
    for (int k = 0; k < 4; ++k) {
      in.push_back(normal(r, {ch, ch}, 0.6));
      in.push_back(normal(r, {ch}, 0.1));
    }
    return Instance{[heads](const Inputs& x) {
                      AttentionParams<double> p{x[1], x[2], x[3], x[4], x[5], x[6], x[7], x[8]};
                      return self_attention(x[0], p, heads);
                    },
                    in};
  });
  block("mlp", [](Rng& r, std::size_t i) {
    const std::size_t ch = pick(r, 2, 4), hidden = 2 * ch;
    Inputs in{normal(r, {pick(r, 1, 4), ch})};
    Inputs lp = layer_inputs(r, ch, hidden, 1);
    in.insert(in.end(), lp.begin(), lp.end());
    const Activation act = i % 4 == 3 ? Activation::kRelu : Activation::kGelu;
    return Instance{[act](const Inputs& x) { return mlp_forward(x[0], layer_from(x, 1), act); },
                    in};
  });
  block("encoder_layer", [](Rng& r, std::size_t i) {
    EncoderConfig cfg;
    cfg.heads = pick(r, 1, 2);
    const std::size_t ch = 4;
    cfg.layers = 1;
    cfg.taps = {1};
    cfg.mlp_ratio = 2;
    cfg.adapter_dim = 1;
    cfg.scale = std::uniform_real_distribution<double>(0.1, 1.0)(r);
    cfg.mlp_residual = i % 2 == 1;
    Inputs in{normal(r, vol(dims3(r, 1, 2), ch))};
    Inputs lp = layer_inputs(r, ch, 2 * ch, 1);
    in.insert(in.end(), lp.begin(), lp.end());
    return Instance{[cfg](const Inputs& x) { return layer_forward(x[0], layer_from(x, 1), cfg); },
                    in};
  });
  block("encoder_2layer", [](Rng& r, std::size_t) {
    EncoderConfig cfg;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.taps = {1, 2};
    cfg.mlp_ratio = 2;
    cfg.adapter_dim = 1;
    cfg.scale = 0.5;
    const std::size_t ch = 4;
    Inputs in{normal(r, vol({2, 1, 2}, ch))};
    for (int l = 0; l < 2; ++l) {
      Inputs lp = layer_inputs(r, ch, 2 * ch, 1);
      in.insert(in.end(), lp.begin(), lp.end());
    }
    return Instance{[cfg](const Inputs& x) {
                      std::vector<LayerParams<double>> layers{layer_from(x, 1), layer_from(x, 19)};
                      auto taps = encode(x[0], layers, cfg);
                      return concat(taps.maps, 3);
                    },
                    in};
  });
  block("spatial_attention", [](Rng& r, std::size_t i) {
    const Index3 grid = dims3(r, 1, 2);
    const std::size_t ch = 2 * pick(r, 2, 3), n = pick(r, 1, std::min<std::size_t>(3, grid[0] * grid[1] * grid[2]));
    const bool scaling = i % 3 != 2;
    return Instance{[=](const Inputs& x) {
                      return spatial_attention(x[0], prompt_from(x, true),
                                               prompt_cfg(n, true, scaling));
                    },
                    prompt_inputs(r, grid, ch, n, true)};
  });
  block("channel_attention", [](Rng& r, std::size_t i) {
    const Index3 grid = dims3(r, 1, 2);
    const std::size_t ch = 2 * pick(r, 2, 3), n = 1;
    const bool share = i % 2 == 0, scaling = i % 3 != 2;
    return Instance{[=](const Inputs& x) {
                      return channel_attention(x[0], prompt_from(x, share),
                                               prompt_cfg(n, share, scaling));
                    },
                    prompt_inputs(r, grid, ch, n, share)};
  });
  block("dual_prompt", [](Rng& r, std::size_t i) {
    const Index3 grid = dims3(r, 1, 2);
    const std::size_t ch = 2 * pick(r, 2, 3), n = pick(r, 1, std::min<std::size_t>(3, grid[0] * grid[1] * grid[2]));
    const bool share = i % 2 == 0;
    return Instance{[=](const Inputs& x) {
                      return dual_prompt(x[0], prompt_from(x, share), prompt_cfg(n, share, true));
                    },
                    prompt_inputs(r, grid, ch, n, share)};
  });
  block("pseudo3d_patch_embed", [](Rng& r, std::size_t) {
    PatchConfig cfg;
    cfg.mode = PatchMode::kPseudo3d;
    cfg.patch = dims3(r, 1, 2);
    cfg.embed_dim = 8;
    const std::size_t nin = pick(r, 1, 2);
    const Index3 d{2 * cfg.patch[0], cfg.patch[1], 2 * cfg.patch[2]};
    const auto [ph, pw, pd] = cfg.patch;
    Inputs in{normal(r, vol(d, nin)), normal(r, {ph, pw, 1, nin, 8}, 0.5), normal(r, {8}, 0.1),
              normal(r, {1, 1, pd, 8}, 0.5), normal(r, {8}, 0.1)};
    return Instance{[cfg](const Inputs& x) {
                      PatchParams<double> p;
                      p.w2d = x[1];
                      p.b2d = x[2];
                      p.wdepth = x[3];
                      p.bdepth = x[4];
                      return pseudo3d_patch_embed(x[0], p, cfg);
                    },
                    in};
  });
  block("true3d_patch_embed", [](Rng& r, std::size_t) {
    PatchConfig cfg;
    cfg.mode = PatchMode::kTrue3d;
    cfg.patch = dims3(r, 1, 2);
    cfg.embed_dim = 8;
    const std::size_t nin = pick(r, 1, 2);
    const Index3 d{2 * cfg.patch[0], cfg.patch[1], 2 * cfg.patch[2]};
    const auto [ph, pw, pd] = cfg.patch;
    Inputs in{normal(r, vol(d, nin)), normal(r, {ph, pw, pd, nin, 8}, 0.5), normal(r, {8}, 0.1)};
    return Instance{[cfg](const Inputs& x) {
                      PatchParams<double> p;
                      p.w3d = x[1];
                      p.b3d = x[2];
                      return true3d_patch_embed(x[0], p, cfg);
                    },
                    in};
  });
  block("conv_block", [](Rng& r, std::size_t) {
    const std::size_t cin = pick(r, 1, 2), cout = pick(r, 1, 2);
    Inputs in{normal(r, vol({2, 2, 2}, cin))};
    Inputs b = block_inputs(r, cin, cout);
    in.insert(in.end(), b.begin(), b.end());
    return Instance{[](const Inputs& x) { return conv_block(x[0], block_from(x, 1)); }, in};
  });
  block("image_branch", [](Rng& r, std::size_t) {
    const std::size_t w = pick(r, 1, 2);
    Inputs in{normal(r, vol({4, 4, 4}, 1)), normal(r, {3, 3, 3, 1, w}, 0.4)};
    Inputs b = block_inputs(r, w, w);
    in.insert(in.end(), b.begin(), b.end());
    return Instance{[](const Inputs& x) {
                      ImageBranchParams<double> p;
                      p.stage_w = {x[1]};
                      p.strides = {Index3{2, 2, 2}};
                      p.block = block_from(x, 2);
                      return image_branch(x[0], p);
                    },
                    in};
  });
  block("enhancer", [](Rng& r, std::size_t i) {
    const std::size_t ch = pick(r, 1, 2), w = pick(r, 1, 2);
    const bool zeros = i % 4 == 3;
    Inputs in{normal(r, vol({1, 1, 1}, ch)), normal(r, vol({2, 2, 2}, w))};
    Inputs b = block_inputs(r, ch + w, w);
    in.insert(in.end(), b.begin(), b.end());
    return Instance{[zeros](const Inputs& x) {
                      EnhancerParams<double> p;
                      p.image_branch = zeros ? -1 : 0;
                      p.fuse = block_from(x, 2);
                      return original_feature_enhancer(x[0], zeros ? T() : x[1], p);
                    },
                    in};
  });
  block("predict", [](Rng& r, std::size_t) {
    const std::size_t w = 1, head = pick(r, 1, 2), smooth = pick(r, 1, 2);
    const Index3 out{3, 4, 3};
    Inputs in{normal(r, vol({2, 2, 2}, w)), normal(r, vol({2, 2, 2}, w))};
    Inputs b = block_inputs(r, 2 * w, head);
    in.insert(in.end(), b.begin(), b.end());
    in.push_back(normal(r, {3, 3, 3, head, smooth}, 0.4));
    in.push_back(normal(r, {smooth}, 0.1));
    in.push_back(normal(r, {1, 1, 1, smooth, 1}, 0.6));
    in.push_back(normal(r, {1}, 0.1));
    return Instance{[out](const Inputs& x) {
                      PredictParams<double> p;
                      p.head = block_from(x, 2);
                      p.smooth_w = x[4];
                      p.smooth_b = x[5];
                      p.proj_w = x[6];
                      p.proj_b = x[7];
                      return predict(std::vector<T>{x[0], x[1]}, p, out);
                    },
                    in};
  });
  block("combined_loss", [](Rng& r, std::size_t i) {
    const Index3 d = dims3(r, 1, 3);
    T target = uniform(r, vol(d, 1), 0.0, 1.0);
    for (auto& v : target.mutable_values()) v = v < 0.4 ? 1.0 : 0.0;
    LossConfig cfg;
    if (i % 3 == 1) cfg.w_dice = 1.0, cfg.w_ce = 0.0;
    if (i % 3 == 2) cfg.w_dice = 0.0, cfg.w_ce = 1.0;
    return Instance{[target, cfg](const Inputs& x) { return combined_loss(x[0], target, cfg); },
                    {uniform(r, vol(d, 1), 0.05, 0.95)}};
  });
  return c;
}

}  // namespace

std::vector<std::string> gradcheck_suite_names() {
  std::vector<std::string> names;
  for (const auto& c : build_checks()) names.push_back(c.name);
  return names;
}

std::vector<SuiteResult> run_gradcheck_suite(const SuiteOptions& options,
                                             const std::function<void(const SuiteResult&)>& on_result) {
  require(options.instances > 0, ErrorCode::kInvalidArgument, "gradcheck suite: instances must be > 0");
  const auto checks = build_checks();
  for (const auto& name : options.only) {
    const bool known = std::any_of(checks.begin(), checks.end(),
                                   [&](const Check& c) { return c.name == name; });
    require(known, ErrorCode::kInvalidArgument, "gradcheck suite: unknown check " + name);
  }
  std::vector<SuiteResult> results;
  for (std::size_t k = 0; k < checks.size(); ++k) {
    const auto& check = checks[k];
    if (!options.only.empty() &&
        std::find(options.only.begin(), options.only.end(), check.name) == options.only.end()) {
      continue;
    }
    SuiteResult res;
    res.name = check.name;
    res.composite = check.composite;
    for (std::size_t i = 0; i < options.instances; ++i) {
      Rng rng(options.seed * 0x9E3779B97F4A7C15ULL + k * 1000003ULL + i);
      Instance inst = check.make(rng, i);
      const auto rep = gradient_check(inst.fn, inst.inputs, options.tolerance);
      ++res.instances;
      if (rep.passed) ++res.passed;
      res.worst = std::max(res.worst, rep.max_rel_error);
      res.kinks += rep.kinks.size();
    }
    if (on_result) on_result(res);
    results.push_back(std::move(res));
  }
  return results;
}

}  // namespace deap
