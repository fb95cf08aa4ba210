// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "gemm.hpp"

#include <Eigen/Core>

namespace deap::detail {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const T* a, const T* b, T* c, bool accumulate) {
  using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstMap = Eigen::Map<const RowMat>;
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  Eigen::Map<RowMat> out(c, mi, ni);
  if (!accumulate) out.setZero();
  if (m == 0 || n == 0 || k == 0) return;
  ConstMap am(a, trans_a ? ki : mi, trans_a ? mi : ki);
  ConstMap bm(b, trans_b ? ni : ki, trans_b ? ki : ni);
  if (!trans_a && !trans_b) {
    out.noalias() += am * bm;
  } else if (trans_a && !trans_b) {
    out.noalias() += am.transpose() * bm;
  } else if (!trans_a && trans_b) {
    out.noalias() += am * bm.transpose();
  } else {
    out.noalias() += am.transpose() * bm.transpose();
  }
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*,
                          const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*,
                           const double*, double*, bool);

}  // namespace deap::detail
