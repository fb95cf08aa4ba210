// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_SRC_GEMM_HPP_
#define DEAP_SRC_GEMM_HPP_

#include <cstddef>

namespace deap::detail {

// C[m, n] (+)= op(A) * op(B) on row-major buffers, where op transposes when
// the matching flag is set. A is [m, k] (or [k, m] when trans_a), B is [k, n]
// (or [n, k] when trans_b).
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate);

}  // namespace deap::detail

#endif  // DEAP_SRC_GEMM_HPP_
