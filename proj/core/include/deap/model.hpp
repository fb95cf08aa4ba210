// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEAP_MODEL_HPP_
#define DEAP_MODEL_HPP_

#include <cstddef>
#include <cstdint>

#include "deap/decoder.hpp"
#include "deap/encoder.hpp"
#include "deap/params.hpp"
#include "deap/patch_embed.hpp"
#include "deap/prompter.hpp"

namespace deap {

struct ModelConfig {
  Index3 volume{32, 32, 32};
  std::size_t in_channels = 1;
  PatchConfig patch;
  EncoderConfig encoder;
  PrompterConfig prompter;
  DecoderConfig decoder;
};

// Checks every cross-module constraint; returns the token grid.
Index3 validate_model_config(const ModelConfig& cfg);

// Patch embedding + positional embedding -> encoder -> prompter on one tap
// -> decoder. Parameter names:
//   patch.*, pos_embed, encoder.layerNN.*, prompter.*, decoder.*
// The freeze policy is applied on construction.
template <typename T>
class Model {
 public:
  struct Trace {
    Tensor<T> embedded;
    EncoderTaps<T> taps;
    EncoderTaps<T> prompted;
  };

  Model(const ModelConfig& cfg, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  const Index3& grid() const { return grid_; }
  ParameterStore<T>& params() { return store_; }
  const ParameterStore<T>& params() const { return store_; }

  // volume: [H̄, W̄, D̄, N] -> probabilities [H̄, W̄, D̄, 1].
  Tensor<T> forward(const Tensor<T>& volume, Trace* trace = nullptr) const;

  const PatchParams<T>& patch_params() const { return patch_; }
  const std::vector<LayerParams<T>>& encoder_params() const { return layers_; }
  const PrompterParams<T>& prompter_params() const { return prompter_; }
  const DecoderParams<T>& decoder_params() const { return decoder_; }

 private:
  ModelConfig cfg_;
  Index3 grid_{};
  ParameterStore<T> store_;
  PatchParams<T> patch_;
  Tensor<T> pos_embed_;
  std::vector<LayerParams<T>> layers_;
  PrompterParams<T> prompter_;
  DecoderParams<T> decoder_;
};

}  // namespace deap

#endif  // DEAP_MODEL_HPP_
