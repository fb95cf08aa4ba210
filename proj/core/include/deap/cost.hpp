// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Analytic FLOP and parameter accounting. Nothing is executed.
//
// Each term records multiply-accumulates and a kind:
//   kLayer      weight-carrying maps (linear layers, convolutions, token reducers)
//   kAttention  weight-free products inside attention (scores, mixing)
//   kOther      parameter-only entries (norm affines, positional table)
// Normalization, softmax, activations and resampling are not counted.

#ifndef DEAP_COST_HPP_
#define DEAP_COST_HPP_

#include <cstddef>
#include <string>
#include <vector>

#include "deap/model.hpp"

namespace deap {

enum class CostKind { kLayer, kAttention, kOther };

enum class CostScope {
  kLayers,  // kLayer terms only
  kAllOps,  // kLayer + kAttention
};

struct CostTerm {
  std::string module;
  std::string name;
  CostKind kind = CostKind::kLayer;
  double macs = 0.0;
  std::size_t params = 0;
};

struct CostReport {
  std::vector<CostTerm> terms;
  // 2 counts a multiply-accumulate as two FLOPs, 1 as one.
  double flops_per_mac = 2.0;

  double flops(CostScope scope = CostScope::kLayers) const;
  double module_flops(const std::string& module, CostScope scope = CostScope::kLayers) const;
  std::size_t params() const;
  std::size_t module_params(const std::string& module) const;
  // Module names in first-appearance order.
  std::vector<std::string> modules() const;
};

enum class PrompterVariant { kSpatialOnly, kDualShared, kDualFull };

std::string prompter_variant_name(PrompterVariant v);
PrompterVariant parse_prompter_variant(const std::string& name);

// Prompter alone on a [H, W, D, C] map with n reduced tokens.
CostReport count_prompter_cost(const Index3& grid, std::size_t channels, std::size_t n,
                               PrompterVariant variant, double flops_per_mac = 2.0);

// (full - shared) / full for the dual prompter.
double sharing_reduction(const Index3& grid, std::size_t channels, std::size_t n,
                         CostScope scope = CostScope::kLayers);

// Whole model for cfg.volume inputs.
CostReport count_cost(const ModelConfig& cfg, double flops_per_mac = 2.0);

}  // namespace deap

#endif  // DEAP_COST_HPP_
