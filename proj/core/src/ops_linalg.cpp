// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <numeric>

#include "deap/ops.hpp"
#include "gemm.hpp"
#include "op_util.hpp"

namespace deap {

using detail::grad_of;
using detail::make_result;

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_inputs<T>({&a, &b}, "matmul");
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    detail::shape_error("matmul", shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  detail::gemm<T>(false, false, m, n, k, a.values().data(), b.values().data(), out.data(),
                  false);
  Node<T>* an = a.node();
  Node<T>* bn = b.node();
  return make_result<T>({m, n}, std::move(out), {a, b}, "matmul",
                        [an, bn, m, n, k](Node<T>& self) {
                          if (T* ga = grad_of(an)) {
                            // dA = dC * B^T
                            detail::gemm<T>(false, true, m, k, n, self.grad.data(),
                                            bn->value.data(), ga, true);
                          }
                          if (T* gb = grad_of(bn)) {
                            // dB = A^T * dC
                            detail::gemm<T>(true, false, k, n, m, an->value.data(),
                                            self.grad.data(), gb, true);
                          }
                        });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  detail::check_defined(a, "transpose");
  require(a.rank() == 2, ErrorCode::kInvalidAxis, "transpose: expects rank 2");
  return permute(a, {1, 0});
}

template <typename T>
Tensor<T> permute(const Tensor<T>& a, const std::vector<std::size_t>& axes) {
  detail::check_inputs<T>({&a}, "permute");
  const std::size_t rank = a.rank();
  require(axes.size() == rank, ErrorCode::kInvalidAxis, "permute: axis count mismatch");
  std::vector<bool> seen(rank, false);
  for (auto ax : axes) {
    require(ax < rank && !seen[ax], ErrorCode::kInvalidAxis, "permute: invalid permutation");
    seen[ax] = true;
  }
  Shape out_shape(rank);
  for (std::size_t i = 0; i < rank; ++i) out_shape[i] = a.dim(axes[i]);
  const auto in_strides = detail::strides_of(a.shape());
  // Source stride for each output axis.
  std::vector<std::size_t> src_strides(rank);
  for (std::size_t i = 0; i < rank; ++i) src_strides[i] = in_strides[axes[i]];

  // Maps output flat index -> input flat index.
  const std::size_t total = a.numel();
  std::vector<std::size_t> gather(total);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t src = 0;
  for (std::size_t flat = 0; flat < total; ++flat) {
    gather[flat] = src;
    for (std::size_t ax = rank; ax-- > 0;) {
      if (++idx[ax] < out_shape[ax]) {
        src += src_strides[ax];
        break;
      }
      src -= src_strides[ax] * (out_shape[ax] - 1);
      idx[ax] = 0;
    }
  }
  const auto av = a.values();
  std::vector<T> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = av[gather[i]];
  Node<T>* an = a.node();
  return make_result<T>(std::move(out_shape), std::move(out), {a}, "permute",
                        [an, gather = std::move(gather)](Node<T>& self) {
                          T* ga = grad_of(an);
                          if (!ga) return;
                          for (std::size_t i = 0; i < gather.size(); ++i) {
                            ga[gather[i]] += self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  detail::check_inputs<T>({&a}, "reshape");
  if (shape_numel(shape) != a.numel()) {
    detail::shape_error("reshape", shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<T> out(a.values().begin(), a.values().end());
  Node<T>* an = a.node();
  return make_result<T>(std::move(shape), std::move(out), {a}, "reshape",
                        [an](Node<T>& self) {
                          T* ga = grad_of(an);
                          if (!ga) return;
                          for (std::size_t i = 0; i < self.grad.size(); ++i) {
                            ga[i] += self.grad[i];
                          }
                        });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  require(!parts.empty(), ErrorCode::kInvalidArgument, "concat: no inputs");
  for (const auto& p : parts) {
    detail::check_defined(p, "concat");
    detail::check_finite(p, "concat");
  }
  const Shape& first = parts.front().shape();
  require(axis < first.size(), ErrorCode::kInvalidAxis, "concat: axis out of range");
  std::size_t axis_total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (i != axis && s[i] != first[i]) ok = false;
    }
    if (!ok) detail::shape_error("concat", shape_str(s) + " vs " + shape_str(first));
    axis_total += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= first[i];
  for (std::size_t i = axis + 1; i < first.size(); ++i) inner *= first[i];
  Shape out_shape = first;
  out_shape[axis] = axis_total;
  std::vector<T> out(shape_numel(out_shape));
  const std::size_t out_row = axis_total * inner;
  std::size_t offset = 0;
  std::vector<std::size_t> offsets;
  std::vector<Node<T>*> nodes;
  for (const auto& p : parts) {
    const std::size_t row = p.shape()[axis] * inner;
    const auto pv = p.values();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pv.begin() + o * row, row, out.begin() + o * out_row + offset);
    }
    offsets.push_back(offset);
    nodes.push_back(p.node());
    offset += row;
  }
  return make_result<T>(std::move(out_shape), std::move(out), parts, "concat",
                        [nodes, offsets, outer, out_row](Node<T>& self) {
                          for (std::size_t j = 0; j < nodes.size(); ++j) {
                            T* gp = grad_of(nodes[j]);
                            if (!gp) continue;
                            const std::size_t row = nodes[j]->value.size() / outer;
                            for (std::size_t o = 0; o < outer; ++o) {
                              const T* src = self.grad.data() + o * out_row + offsets[j];
                              T* dst = gp + o * row;
                              for (std::size_t i = 0; i < row; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  detail::check_inputs<T>({&x}, "slice");
  require(axis < x.rank(), ErrorCode::kInvalidAxis, "slice: axis out of range");
  if (start + length > x.dim(axis)) {
    detail::shape_error("slice", "range exceeds axis length " + std::to_string(x.dim(axis)));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t in_row = x.dim(axis) * inner;
  const std::size_t out_row = length * inner;
  const std::size_t offset = start * inner;
  const auto xv = x.values();
  std::vector<T> out(outer * out_row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + o * in_row + offset, out_row, out.begin() + o * out_row);
  }
  Node<T>* xn = x.node();
  return make_result<T>(std::move(out_shape), std::move(out), {x}, "slice",
                        [xn, outer, in_row, out_row, offset](Node<T>& self) {
                          T* gx = grad_of(xn);
                          if (!gx) return;
                          for (std::size_t o = 0; o < outer; ++o) {
                            const T* src = self.grad.data() + o * out_row;
                            T* dst = gx + o * in_row + offset;
                            for (std::size_t i = 0; i < out_row; ++i) dst[i] += src[i];
                          }
                        });
}

#define DEAP_INSTANTIATE(T)                                                          \
  template Tensor<T> matmul<T>(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> transpose<T>(const Tensor<T>&);                                 \
  template Tensor<T> permute<T>(const Tensor<T>&, const std::vector<std::size_t>&);  \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);                            \
  template Tensor<T> concat<T>(const std::vector<Tensor<T>>&, std::size_t);          \
  template Tensor<T> slice<T>(const Tensor<T>&, std::size_t, std::size_t, std::size_t);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
