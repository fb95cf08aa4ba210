// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_TESTS_FIXTURES_HPP_
#define DEAP_TESTS_FIXTURES_HPP_

#include <filesystem>
#include <optional>
#include <random>
#include <string>

#include "deap/config.hpp"
#include "deap/error.hpp"
#include "deap/tensor.hpp"

namespace fixture {

// Code of the deap::Error thrown by f, if any.
template <typename F>
std::optional<deap::ErrorCode> code_of(F&& f) {
  try {
    f();
  } catch (const deap::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

// 16^3 volumes, C = 8, three layers: small enough for many training steps
// in a unit test.
inline deap::RunConfig tiny_config() {
  deap::RunConfig c;
  c.model.volume = {16, 16, 16};
  c.model.patch.embed_dim = 8;
  c.model.encoder.layers = 3;
  c.model.encoder.heads = 2;
  c.model.encoder.adapter_dim = 2;
  c.model.encoder.taps = {2, 3};
  c.model.prompter.reduced_tokens = 8;
  c.model.prompter.prompt_layer = 3;
  c.model.decoder.head_channels = 4;
  c.model.decoder.smooth_channels = 2;
  c.train.epochs = 2;
  c.train.batch_size = 2;
  c.train.optimizer.lr = 1e-3;
  return c;
}

inline deap::Tensor<double> random_tensor(std::mt19937_64& rng, deap::Shape shape, double sd = 1.0,
                                          bool requires_grad = false) {
  std::normal_distribution<double> n(0.0, sd);
  std::vector<double> v(deap::shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return deap::Tensor<double>::from_values(std::move(shape), std::move(v), requires_grad);
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("deap_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixture

#endif  // DEAP_TESTS_FIXTURES_HPP_
