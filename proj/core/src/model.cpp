// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/model.hpp"

#include <algorithm>
#include <random>

#include "deap/error.hpp"

namespace deap {

Index3 validate_model_config(const ModelConfig& cfg) {
  require(cfg.in_channels >= 1, ErrorCode::kConfig, "model.in_channels must be >= 1");
  for (int a = 0; a < 3; ++a) {
    require(cfg.patch.patch[a] > 0 && cfg.volume[a] % cfg.patch.patch[a] == 0 &&
                cfg.volume[a] >= cfg.patch.patch[a],
            ErrorCode::kConfig,
            "model.volume " + std::to_string(cfg.volume[a]) + " is not a multiple of patch size " +
                std::to_string(cfg.patch.patch[a]));
  }
  const Index3 grid = token_grid(cfg.volume, cfg.patch);
  const std::size_t c = cfg.patch.embed_dim;
  validate_encoder_config(cfg.encoder, c);
  validate_prompter_config(cfg.prompter, c, grid[0] * grid[1] * grid[2]);
  const auto& taps = cfg.encoder.taps;
  require(std::find(taps.begin(), taps.end(), cfg.prompter.prompt_layer) != taps.end(),
          ErrorCode::kConfig,
          "prompter.layer " + std::to_string(cfg.prompter.prompt_layer) + " is not an encoder tap");
  decoder_width(cfg.decoder, c);
  image_branch_strides(cfg.volume, grid);
  return grid;
}

template <typename T>
Model<T>::Model(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  grid_ = validate_model_config(cfg_);
  const std::size_t c = cfg_.patch.embed_dim;
  const std::size_t tokens = grid_[0] * grid_[1] * grid_[2];
  std::mt19937_64 rng(seed);
  patch_ = add_patch_params(store_, "patch", cfg_.patch, cfg_.in_channels, rng);
  pos_embed_ = store_.add("pos_embed", {grid_[0], grid_[1], grid_[2], c},
                          truncated_normal<T>(rng, tokens * c, 0.02));
  layers_ = add_encoder_params(store_, "encoder", c, cfg_.encoder, rng);
  prompter_ = add_prompter_params(store_, "prompter", c, tokens, cfg_.prompter, rng);
  decoder_ = add_decoder_params(store_, "decoder", cfg_.decoder, cfg_.volume, cfg_.in_channels,
                                grid_, c, cfg_.encoder.taps.size(), rng);
  apply_freeze_policy(store_);
}

template <typename T>
Tensor<T> Model<T>::forward(const Tensor<T>& volume, Trace* trace) const {
  require(volume.defined() && volume.rank() == 4 && volume.dim(0) == cfg_.volume[0] &&
              volume.dim(1) == cfg_.volume[1] && volume.dim(2) == cfg_.volume[2] &&
              volume.dim(3) == cfg_.in_channels,
          ErrorCode::kShapeMismatch,
          "model input must be [" + std::to_string(cfg_.volume[0]) + ", " +
              std::to_string(cfg_.volume[1]) + ", " + std::to_string(cfg_.volume[2]) + ", " +
              std::to_string(cfg_.in_channels) + "]");
  Tensor<T> embedded = add(patch_embed(volume, patch_, cfg_.patch), pos_embed_);
  EncoderTaps<T> taps = encode(embedded, layers_, cfg_.encoder);
  EncoderTaps<T> prompted = attach_prompter(taps, prompter_, cfg_.prompter);
  if (trace) {
    trace->embedded = embedded;
    trace->taps = taps;
    trace->prompted = prompted;
  }
  return decode(prompted, volume, decoder_);
}

template class Model<float>;
template class Model<double>;

}  // namespace deap
