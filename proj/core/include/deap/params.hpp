// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_PARAMS_HPP_
#define DEAP_PARAMS_HPP_

#include <cstddef>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "deap/tensor.hpp"

namespace deap {

// Named trainable arrays with per-entry freeze flags. Entries keep insertion
// order, which is also checkpoint order.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool frozen = false;
  };

  Tensor<T> add(const std::string& name, Shape shape, std::vector<T> values);
  Tensor<T> get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  void set_frozen(const std::string& name, bool frozen);
  bool frozen(const std::string& name) const;

  // When enabled, frozen entries still receive gradients (which the
  // optimizer ignores). Off by default to skip that work.
  void set_track_frozen_grads(bool track);
  bool track_frozen_grads() const { return track_frozen_grads_; }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_count() const;
  std::size_t trainable_count() const;
  // Element count of entries whose name starts with `prefix`.
  std::size_t count_with_prefix(const std::string& prefix) const;

  void zero_grad();

 private:
  void sync_requires_grad(Entry& e) const {
    e.tensor.set_requires_grad(!e.frozen || track_frozen_grads_);
  }

  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  bool track_frozen_grads_ = false;
};

// Initializers. All draw from the caller's engine in a fixed order.
template <typename T>
std::vector<T> truncated_normal(std::mt19937_64& rng, std::size_t n, double sd);

// N(0, gain^2 / fan_in), truncated at two standard deviations.
template <typename T>
std::vector<T> scaled_normal(std::mt19937_64& rng, std::size_t n, std::size_t fan_in,
                             double gain = 1.0);

}  // namespace deap

#endif  // DEAP_PARAMS_HPP_
