// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/params.hpp"

#include <cmath>

#include "deap/error.hpp"

namespace deap {

template <typename T>
Tensor<T> ParameterStore<T>::add(const std::string& name, Shape shape, std::vector<T> values) {
  require(!contains(name), ErrorCode::kDuplicateId, "duplicate parameter name: " + name);
  Entry e{name, Tensor<T>::from_values(std::move(shape), std::move(values), true), false};
  sync_requires_grad(e);
  index_.emplace(name, entries_.size());
  entries_.push_back(e);
  return e.tensor;
}

template <typename T>
Tensor<T> ParameterStore<T>::get(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::kUnknownParameter, "unknown parameter: " + name);
  return entries_[it->second].tensor;
}

template <typename T>
void ParameterStore<T>::set_frozen(const std::string& name, bool frozen) {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::kUnknownParameter, "unknown parameter: " + name);
  Entry& e = entries_[it->second];
  e.frozen = frozen;
  sync_requires_grad(e);
}

template <typename T>
bool ParameterStore<T>::frozen(const std::string& name) const {
  auto it = index_.find(name);
  require(it != index_.end(), ErrorCode::kUnknownParameter, "unknown parameter: " + name);
  return entries_[it->second].frozen;
}

template <typename T>
void ParameterStore<T>::set_track_frozen_grads(bool track) {
  track_frozen_grads_ = track;
  for (auto& e : entries_) sync_requires_grad(e);
}

template <typename T>
std::size_t ParameterStore<T>::total_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

template <typename T>
std::size_t ParameterStore<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (!e.frozen) n += e.tensor.numel();
  }
  return n;
}

template <typename T>
std::size_t ParameterStore<T>::count_with_prefix(const std::string& prefix) const {
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.name.compare(0, prefix.size(), prefix) == 0) n += e.tensor.numel();
  }
  return n;
}

template <typename T>
void ParameterStore<T>::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

template <typename T>
std::vector<T> truncated_normal(std::mt19937_64& rng, std::size_t n, double sd) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<T> out(n);
  for (auto& v : out) {
    double z;
    do {
      z = normal(rng);
    } while (std::abs(z) > 2.0);
    v = static_cast<T>(z * sd);
  }
  return out;
}

template <typename T>
std::vector<T> scaled_normal(std::mt19937_64& rng, std::size_t n, std::size_t fan_in,
                             double gain) {
  return truncated_normal<T>(rng, n, gain / std::sqrt(static_cast<double>(fan_in)));
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template std::vector<float> truncated_normal<float>(std::mt19937_64&, std::size_t, double);
template std::vector<double> truncated_normal<double>(std::mt19937_64&, std::size_t, double);
template std::vector<float> scaled_normal<float>(std::mt19937_64&, std::size_t, std::size_t, double);
template std::vector<double> scaled_normal<double>(std::mt19937_64&, std::size_t, std::size_t, double);

}  // namespace deap
