// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// DEAPCKPT1 layout, all integers and reals little-endian:
//
//   "DEAPCKPT1\n"
//   u64 config length, config echo bytes
//   u64 step, u64 epoch, u64 position, u64 optimizer steps
//   f64 best metric, u64 best epoch, f64 running epoch loss sum
//   u64 entry count, then per entry:
//     u64 name length, name bytes
//     u64 rank, u64 dims[rank]
//     u8 frozen
//     f32 values[n], f32 first moment[n], f32 second moment[n]

#ifndef DEAP_CHECKPOINT_HPP_
#define DEAP_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deap/optim.hpp"
#include "deap/params.hpp"
#include "deap/tensor.hpp"

namespace deap {

struct CheckpointEntry {
  std::string name;
  Shape shape;
  bool frozen = false;
  std::vector<float> values;
  std::vector<float> m;
  std::vector<float> v;
};

struct Checkpoint {
  std::string config;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  // Batches already consumed within `epoch`.
  std::uint64_t position = 0;
  std::uint64_t optimizer_steps = 0;
  double best_metric = -1.0;
  std::uint64_t best_epoch = 0;
  // Sum of batch losses seen so far in `epoch`.
  double epoch_loss_sum = 0.0;
  std::vector<CheckpointEntry> entries;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Snapshot of parameters and optimizer moments (stored as 32-bit reals).
template <typename T>
std::vector<CheckpointEntry> capture_entries(const ParameterStore<T>& store, AdamW<T>& opt);

// Writes values, frozen flags and moments back. Names and shapes must match
// the store exactly, in order.
template <typename T>
void restore_entries(const std::vector<CheckpointEntry>& entries, ParameterStore<T>& store,
                     AdamW<T>& opt);

}  // namespace deap

#endif  // DEAP_CHECKPOINT_HPP_
