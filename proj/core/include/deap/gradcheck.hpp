// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_GRADCHECK_HPP_
#define DEAP_GRADCHECK_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "deap/tensor.hpp"

namespace deap {

struct GradCheckOptions {
  double step = 1e-5;
  // Seed of the fixed random projection that turns a tensor output into a
  // scalar: L = sum(f(x) * R).
  std::uint64_t projection_seed = 0x6a09e667f3bcc908ULL;
};

struct KinkPoint {
  std::size_t input = 0;
  std::size_t index = 0;
};

struct GradCheckReport {
  // max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf), taken over
  // all coordinates that are not flagged as kinks.
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  std::size_t coordinates = 0;
  // Coordinates where the one-sided difference quotients disagree, i.e.
  // points of non-differentiability (relu at exactly 0). Excluded from the
  // error; the analytic side uses the subgradient convention there.
  std::vector<KinkPoint> kinks;
  bool passed = false;
};

using MultiTensorFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

// Compares reverse-mode gradients of f against central differences with
// respect to every input. f must be deterministic; it is evaluated twice up
// front and rejected with kNonDeterministic if the outputs differ.
GradCheckReport gradient_check(const MultiTensorFn& f, const std::vector<Tensor<double>>& inputs,
                               double tolerance, const GradCheckOptions& options = {});

GradCheckReport gradient_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                               const Tensor<double>& x, double tolerance,
                               const GradCheckOptions& options = {});

}  // namespace deap

#endif  // DEAP_GRADCHECK_HPP_
