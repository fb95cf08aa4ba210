// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference sweep over every differentiable op and the model's
// composite blocks, in double precision, on small random instances.

#ifndef DEAP_GRADCHECK_SUITE_HPP_
#define DEAP_GRADCHECK_SUITE_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace deap {

struct SuiteOptions {
  std::size_t instances = 20;
  double tolerance = 1e-4;
  std::uint64_t seed = 1;
  // Empty runs everything; otherwise exact check names.
  std::vector<std::string> only;
};

struct SuiteResult {
  std::string name;
  bool composite = false;
  std::size_t instances = 0;
  std::size_t passed = 0;
  double worst = 0.0;  // largest relative error seen
  std::size_t kinks = 0;

  bool ok() const { return instances > 0 && passed == instances; }
};

std::vector<std::string> gradcheck_suite_names();

std::vector<SuiteResult> run_gradcheck_suite(
    const SuiteOptions& options = {},
    const std::function<void(const SuiteResult&)>& on_result = {});

}  // namespace deap

#endif  // DEAP_GRADCHECK_SUITE_HPP_
