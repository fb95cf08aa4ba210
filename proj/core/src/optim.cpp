// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/optim.hpp"

#include <cmath>

#include "deap/error.hpp"

namespace deap {

void validate_adamw_config(const AdamWConfig& cfg) {
  require(std::isfinite(cfg.lr) && cfg.lr > 0.0, ErrorCode::kConfig, "train.lr must be > 0");
  require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
          ErrorCode::kConfig, "train.beta1 and train.beta2 must be in [0, 1)");
  require(std::isfinite(cfg.eps) && cfg.eps > 0.0, ErrorCode::kConfig, "train.eps must be > 0");
  require(std::isfinite(cfg.weight_decay) && cfg.weight_decay >= 0.0, ErrorCode::kConfig,
          "train.weight_decay must be >= 0");
}

template <typename T>
AdamW<T>::AdamW(ParameterStore<T>& store, const AdamWConfig& cfg) : store_(store), cfg_(cfg) {
  validate_adamw_config(cfg_);
  for (const auto& e : store_.entries()) {
    m_.emplace_back(e.tensor.numel(), T(0));
    v_.emplace_back(e.tensor.numel(), T(0));
  }
}

template <typename T>
bool AdamW<T>::step() {
  const auto& entries = store_.entries();
  require(entries.size() == m_.size(), ErrorCode::kInvalidArgument,
          "AdamW: parameter store changed after construction");
  for (const auto& e : entries) {
    if (e.frozen || !e.tensor.has_grad()) continue;
    for (T g : e.tensor.grad()) {
      if (!std::isfinite(g)) {
        incident_ = "non-finite gradient in " + e.name + " at step " + std::to_string(t_ + 1) +
                    "; step skipped";
        return false;
      }
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  const double decay = 1.0 - cfg_.lr * cfg_.weight_decay;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    const auto& e = entries[k];
    if (e.frozen || !e.tensor.has_grad()) continue;
    Tensor<T> param = e.tensor;
    auto theta = param.mutable_values();
    const auto grad = e.tensor.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      const double mi = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g;
      const double vi = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
      theta[i] = static_cast<T>(theta[i] * decay - cfg_.lr * update);
    }
  }
  return true;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace deap
