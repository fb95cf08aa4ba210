// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Internal helpers shared by the op implementations.

#ifndef DEAP_SRC_OP_UTIL_HPP_
#define DEAP_SRC_OP_UTIL_HPP_

#include <cmath>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "deap/error.hpp"
#include "deap/tensor.hpp"

namespace deap::detail {

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
  for (T v : t.values()) {
    if (!std::isfinite(v)) {
      fail(ErrorCode::kNonFinite, std::string(op) + ": non-finite input value");
    }
  }
}

template <typename T>
void check_defined(const Tensor<T>& t, const char* op) {
  require(t.defined(), ErrorCode::kInvalidArgument, std::string(op) + ": undefined tensor");
}

template <typename T>
void check_inputs(std::initializer_list<const Tensor<T>*> inputs, const char* op) {
  for (const auto* t : inputs) {
    check_defined(*t, op);
    check_finite(*t, op);
  }
}

[[noreturn]] inline void shape_error(const char* op, const std::string& what) {
  fail(ErrorCode::kShapeMismatch, std::string(op) + ": " + what);
}

// Wraps a freshly computed value into a Tensor. When grad mode is on and any
// input requires grad, the result records the inputs as parents.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> value,
                      const std::vector<Tensor<T>>& inputs, const char* op,
                      std::function<void(Node<T>&)> backward_fn) {
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  bool needs_grad = false;
  if (grad_enabled()) {
    for (const auto& in : inputs) {
      if (in.defined() && in.requires_grad()) needs_grad = true;
    }
  }
  if (needs_grad) {
    node->requires_grad = true;
    for (const auto& in : inputs) {
      if (in.defined()) node->parents.push_back(in.node_ptr());
    }
    node->backward = std::move(backward_fn);
  }
  return Tensor<T>(std::move(node));
}

// Gradient buffer of an input node, or nullptr when it does not need one.
// Backward closures hold raw input pointers; the result's parent list keeps
// them alive.
template <typename T>
T* grad_of(Node<T>* input) {
  return (input != nullptr && input->requires_grad) ? input->grad_buffer() : nullptr;
}

// Row-major strides.
inline std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

}  // namespace deap::detail

#define DEAP_INSTANTIATE_FOR_REALS(MACRO) \
  MACRO(float)                            \
  MACRO(double)

#endif  // DEAP_SRC_OP_UTIL_HPP_
