// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Training objective and overlap / surface metrics.

#ifndef DEAP_METRICS_HPP_
#define DEAP_METRICS_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "deap/ops.hpp"
#include "deap/volume_io.hpp"

namespace deap {

struct LossConfig {
  double w_dice = 0.5;
  double w_ce = 0.5;
  // Added to numerator and denominator of the soft dice ratio.
  double smooth = 1e-5;
  // Cross-entropy clamps predictions to [eps, 1 - eps].
  double eps = 1e-7;
};

void validate_loss_config(const LossConfig& cfg);

// w_dice * (1 - soft dice) + w_ce * mean binary cross-entropy.
// pred holds probabilities, target holds 0/1 labels of the same shape.
template <typename T>
Tensor<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& target, const LossConfig& cfg = {});

template <typename T>
Tensor<T> mask_to_tensor(const Mask& mask);

// Foreground where p >= threshold.
Mask threshold_mask(std::span<const float> prob, const Index3& dims, double threshold = 0.5);
Mask threshold_mask(std::span<const double> prob, const Index3& dims, double threshold = 0.5);

// 2|P ∩ G| / (|P| + |G|); 1 when both are empty.
double dice_score(const Mask& pred, const Mask& gt);

// Foreground voxels with at least one face neighbour that is background or
// outside the grid.
std::vector<std::uint8_t> boundary_voxels(const Mask& mask);

// Exact squared Euclidean distance (voxel units) from every voxel to the
// nearest set voxel of `sites`; +inf everywhere when `sites` is empty.
std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& sites,
                                               const Index3& dims);

// Symmetric normalized surface dice with tolerance tau (voxels): the share
// of both boundaries lying within tau of the other. 1 when both boundaries
// are empty.
double nsd(const Mask& pred, const Mask& gt, double tau = 1.0);

struct MetricReport {
  double dice = 0.0;
  double nsd = 0.0;
  double tau = 1.0;
};

MetricReport evaluate_masks(const Mask& pred, const Mask& gt, double tau = 1.0);

}  // namespace deap

#endif  // DEAP_METRICS_HPP_
