// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Run configuration as flat "key = value" text with dotted keys. Blank
// lines and lines starting with '#' are ignored. Unknown keys are errors.

#ifndef DEAP_CONFIG_HPP_
#define DEAP_CONFIG_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "deap/metrics.hpp"
#include "deap/model.hpp"
#include "deap/optim.hpp"
#include "deap/tensor.hpp"

namespace deap {

struct TrainConfig {
  AdamWConfig optimizer;
  std::size_t epochs = 60;
  std::size_t batch_size = 2;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat32;
  // Per-axis (H, W, D) flip probabilities.
  std::array<double, 3> flip{0.0, 0.0, 0.0};
  // Validation every this many epochs; 0 disables it.
  std::size_t val_every = 1;
};

struct EvalConfig {
  double tau = 1.0;
  double threshold = 0.5;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  EvalConfig eval;
};

using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap read_config_file(const std::filesystem::path& path);

// Applies each key onto `cfg`. Throws kConfig naming the key on unknown keys
// or unparsable values.
void apply_config(RunConfig& cfg, const ConfigMap& values);

// Every key in a fixed order, one "key = value" line each. Reals use the
// shortest representation that round-trips, so parse(echo(c)) == c.
std::string echo_config(const RunConfig& cfg);

// Throws kConfig on any invalid field.
void validate_run_config(const RunConfig& cfg);

}  // namespace deap

#endif  // DEAP_CONFIG_HPP_
