// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "deap/ops.hpp"
#include "op_util.hpp"

namespace deap {

using detail::grad_of;
using detail::make_result;

namespace {

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  detail::check_inputs<T>({&a, &b}, op);
  if (a.shape() != b.shape()) {
    detail::shape_error(op, shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// Unary map whose derivative is expressed through (x, y).
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, const char* op, Fwd fwd, Deriv deriv) {
  detail::check_inputs<T>({&x}, op);
  const auto xs = x.values();
  std::vector<T> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = fwd(xs[i]);
  Node<T>* xn = x.node();
  return make_result<T>(x.shape(), std::move(out), {x}, op, [xn, deriv](Node<T>& self) {
    T* gx = grad_of(xn);
    if (!gx) return;
    const auto& xv = xn->value;
    const auto& yv = self.value;
    const auto& g = self.grad;
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

template <typename T>
T gelu_inner(T x) {
  constexpr T kAlpha = T(0.7978845608028654);  // sqrt(2 / pi)
  constexpr T kBeta = T(0.044715);
  return kAlpha * (x + kBeta * x * x * x);
}

}  // namespace

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  // Derivative at exactly 0 is 0.
  return unary(
      x, "relu", [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  return unary(
      x, "gelu",
      [](T v) { return T(0.5) * v * (T(1) + std::tanh(gelu_inner(v))); },
      [](T v, T) {
        constexpr T kAlpha = T(0.7978845608028654);
        constexpr T kBeta = T(0.044715);
        const T t = std::tanh(gelu_inner(v));
        return T(0.5) * (T(1) + t) +
               T(0.5) * v * (T(1) - t * t) * kAlpha * (T(1) + T(3) * kBeta * v * v);
      });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary(
      x, "sigmoid",
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  for (T v : x.values()) {
    require(v > T(0), ErrorCode::kInvalidArgument, "log: input must be positive");
  }
  return unary(
      x, "log", [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  require(lo <= hi, ErrorCode::kInvalidArgument, "clamp: lo > hi");
  return unary(
      x, "clamp", [lo, hi](T v) { return v < lo ? lo : (v > hi ? hi : v); },
      [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  require(std::isfinite(factor), ErrorCode::kNonFinite, "scale: non-finite factor");
  return unary(
      x, "scale", [factor](T v) { return v * factor; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T value) {
  require(std::isfinite(value), ErrorCode::kNonFinite, "add_scalar: non-finite value");
  return unary(
      x, "add_scalar", [value](T v) { return v + value; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "add");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {a, b}, "add", [an, bn](Node<T>& self) {
    const auto& g = self.grad;
    if (T* ga = grad_of(an)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (T* gb = grad_of(bn)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "sub");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {a, b}, "sub", [an, bn](Node<T>& self) {
    const auto& g = self.grad;
    if (T* ga = grad_of(an)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (T* gb = grad_of(bn)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "mul");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {a, b}, "mul", [an, bn](Node<T>& self) {
    const auto& g = self.grad;
    if (T* ga = grad_of(an)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->value[i];
    }
    if (T* gb = grad_of(bn)) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->value[i];
    }
  });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  check_same_shape(a, b, "div");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<T> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    require(bv[i] != T(0), ErrorCode::kInvalidArgument, "div: division by zero");
    out[i] = av[i] / bv[i];
  }
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>(a.shape(), std::move(out), {a, b}, "div", [an, bn](Node<T>& self) {
    const auto& g = self.grad;
    if (T* ga = grad_of(an)) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bn->value[i];
    }
    if (T* gb = grad_of(bn)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        gb[i] -= g[i] * self.value[i] / bn->value[i];
      }
    }
  });
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x) {
  detail::check_inputs<T>({&x}, "reduce_sum");
  T total = T(0);
  for (T v : x.values()) total += v;
  Node<T>* xn = x.node();
  return make_result<T>({1}, {total}, {x}, "reduce_sum", [xn](Node<T>& self) {
    T* gx = grad_of(xn);
    if (!gx) return;
    const T g = self.grad[0];
    for (std::size_t i = 0; i < xn->value.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x) {
  detail::check_inputs<T>({&x}, "reduce_mean");
  require(x.numel() > 0, ErrorCode::kShapeMismatch, "reduce_mean: empty tensor");
  T total = T(0);
  for (T v : x.values()) total += v;
  const T inv = T(1) / static_cast<T>(x.numel());
  Node<T>* xn = x.node();
  return make_result<T>({1}, {total * inv}, {x}, "reduce_mean", [xn, inv](Node<T>& self) {
    T* gx = grad_of(xn);
    if (!gx) return;
    const T g = self.grad[0] * inv;
    for (std::size_t i = 0; i < xn->value.size(); ++i) gx[i] += g;
  });
}

template <typename T>
Tensor<T> channel_affine(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta) {
  detail::check_inputs<T>({&x, &gamma, &beta}, "channel_affine");
  require(x.rank() >= 1, ErrorCode::kShapeMismatch, "channel_affine: scalar input");
  const std::size_t c = x.shape().back();
  if (gamma.shape() != Shape{c} || beta.shape() != Shape{c}) {
    detail::shape_error("channel_affine", "gamma/beta must be [" + std::to_string(c) + "]");
  }
  const auto xv = x.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * gv[i % c] + bv[i % c];
  Node<T>* xn = x.node();
  Node<T>* gn = gamma.node();
  Node<T>* bn = beta.node();
  return make_result<T>(x.shape(), std::move(out), {x, gamma, beta}, "channel_affine",
                        [xn, gn, bn, c](Node<T>& self) {
                          const auto& g = self.grad;
                          T* gx = grad_of(xn);
                          T* gg = grad_of(gn);
                          T* gb = grad_of(bn);
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            const std::size_t ch = i % c;
                            if (gx) gx[i] += g[i] * gn->value[ch];
                            if (gg) gg[ch] += g[i] * xn->value[i];
                            if (gb) gb[ch] += g[i];
                          }
                        });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  detail::check_inputs<T>({&x, &bias}, "add_bias");
  require(x.rank() >= 1, ErrorCode::kShapeMismatch, "add_bias: scalar input");
  const std::size_t c = x.shape().back();
  if (bias.shape() != Shape{c}) {
    detail::shape_error("add_bias", "bias must be [" + std::to_string(c) + "], got " +
                                        shape_str(bias.shape()));
  }
  const auto xv = x.values();
  const auto bv = bias.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] + bv[i % c];
  Node<T>* xn = x.node();
  Node<T>* bn = bias.node();
  return make_result<T>(x.shape(), std::move(out), {x, bias}, "add_bias",
                        [xn, bn, c](Node<T>& self) {
                          const auto& g = self.grad;
                          if (T* gx = grad_of(xn)) {
                            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                          }
                          if (T* gb = grad_of(bn)) {
                            for (std::size_t i = 0; i < g.size(); ++i) gb[i % c] += g[i];
                          }
                        });
}

#define DEAP_INSTANTIATE(T)                                                              \
  template Tensor<T> relu<T>(const Tensor<T>&);                                          \
  template Tensor<T> gelu<T>(const Tensor<T>&);                                          \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                       \
  template Tensor<T> log<T>(const Tensor<T>&);                                           \
  template Tensor<T> clamp<T>(const Tensor<T>&, T, T);                                   \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                      \
  template Tensor<T> add_scalar<T>(const Tensor<T>&, T);                                 \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> div<T>(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> reduce_sum<T>(const Tensor<T>&);                                    \
  template Tensor<T> reduce_mean<T>(const Tensor<T>&);                                   \
  template Tensor<T> channel_affine<T>(const Tensor<T>&, const Tensor<T>&,               \
                                       const Tensor<T>&);                                \
  template Tensor<T> add_bias<T>(const Tensor<T>&, const Tensor<T>&);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
