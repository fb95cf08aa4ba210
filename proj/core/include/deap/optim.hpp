// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_OPTIM_HPP_
#define DEAP_OPTIM_HPP_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "deap/params.hpp"

namespace deap {

struct AdamWConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

void validate_adamw_config(const AdamWConfig& cfg);

// Decoupled weight decay with bias-corrected moments:
//   theta -= lr * wd * theta
//   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
//   theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Frozen entries and entries without a gradient are skipped.
template <typename T>
class AdamW {
 public:
  AdamW(ParameterStore<T>& store, const AdamWConfig& cfg);

  // Returns false, leaving every parameter and moment untouched, when any
  // trainable gradient is non-finite. The reason is kept in last_incident().
  bool step();

  std::uint64_t steps() const { return t_; }
  const AdamWConfig& config() const { return cfg_; }
  const std::string& last_incident() const { return incident_; }

  // Moments, aligned with store.entries().
  std::vector<std::vector<T>>& first_moments() { return m_; }
  std::vector<std::vector<T>>& second_moments() { return v_; }
  void set_steps(std::uint64_t t) { t_ = t; }

 private:
  ParameterStore<T>& store_;
  AdamWConfig cfg_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t t_ = 0;
  std::string incident_;
};

}  // namespace deap

#endif  // DEAP_OPTIM_HPP_
