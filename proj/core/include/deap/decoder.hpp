// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Decoder that fuses each encoder tap with features extracted from the raw
// input volume, then predicts a full-resolution probability map.
//
//   enhancer j   Eu = upsample2(Z_i)                        [2H, 2W, 2D, C]
//                Ei = image_branch(I)                       [2H, 2W, 2D, C']
//                E_j = conv_block(concat(Eu, Ei))           [2H, 2W, 2D, C']
//   predict      Y = sigmoid(proj(relu(smooth(resize(conv_block(concat(E_1..E_4)))))))
//
// conv_block = (conv 3x3x3 pad 1 -> instance norm -> relu) twice. The image
// branch is a stack of stride-2 conv -> IN -> relu stages from the volume
// size down to twice the token grid, followed by a conv_block.

#ifndef DEAP_DECODER_HPP_
#define DEAP_DECODER_HPP_

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "deap/encoder.hpp"
#include "deap/ops.hpp"
#include "deap/params.hpp"

namespace deap {

struct DecoderConfig {
  // Enhancer width C'. 0 means C / 4.
  std::size_t channels = 0;
  // Replaces the image-branch features with zeros (ablation).
  bool no_image_branch = false;
  // One image branch shared by all enhancers instead of one each.
  bool share_image_branch = false;
  std::size_t head_channels = 16;
  std::size_t smooth_channels = 8;
};

std::size_t decoder_width(const DecoderConfig& cfg, std::size_t embed_dim);

// Per-axis stride plan of the image branch: stages[k][a] is 1 or 2. Throws
// kConfig unless each volume/grid ratio is twice a power of two.
std::vector<Index3> image_branch_strides(const Index3& volume_dims, const Index3& grid);

template <typename T>
struct ConvBlockParams {
  Tensor<T> w1;  // [3, 3, 3, Cin, Cout]
  Tensor<T> w2;  // [3, 3, 3, Cout, Cout]
};

template <typename T>
struct ImageBranchParams {
  std::vector<Tensor<T>> stage_w;  // [3, 3, 3, cin, C']
  std::vector<Index3> strides;
  ConvBlockParams<T> block;
};

template <typename T>
struct EnhancerParams {
  // Index into DecoderParams::image_branches; -1 with no_image_branch.
  int image_branch = -1;
  ConvBlockParams<T> fuse;  // C + C' -> C'
};

template <typename T>
struct PredictParams {
  ConvBlockParams<T> head;  // n_taps * C' -> head_channels
  Tensor<T> smooth_w, smooth_b;  // [3, 3, 3, head, smooth], [smooth]
  Tensor<T> proj_w, proj_b;      // [1, 1, 1, smooth, 1], [1]
};

template <typename T>
struct DecoderParams {
  std::vector<ImageBranchParams<T>> image_branches;
  std::vector<EnhancerParams<T>> enhancers;
  PredictParams<T> predict;
  std::size_t width = 0;
};

template <typename T>
DecoderParams<T> add_decoder_params(ParameterStore<T>& store, const std::string& prefix,
                                    const DecoderConfig& cfg, const Index3& volume_dims,
                                    std::size_t in_channels, const Index3& grid,
                                    std::size_t embed_dim, std::size_t taps,
                                    std::mt19937_64& rng);

template <typename T>
Tensor<T> conv_block(const Tensor<T>& x, const ConvBlockParams<T>& p);

template <typename T>
Tensor<T> image_branch(const Tensor<T>& volume, const ImageBranchParams<T>& p);

// `image_features` may be undefined, meaning zeros of the right shape.
template <typename T>
Tensor<T> original_feature_enhancer(const Tensor<T>& tap, const Tensor<T>& image_features,
                                    const EnhancerParams<T>& p);

// Y has shape [volume_dims..., 1] with values in [0, 1].
template <typename T>
Tensor<T> predict(const std::vector<Tensor<T>>& enhanced, const PredictParams<T>& p,
                  const Index3& volume_dims);

template <typename T>
Tensor<T> decode(const EncoderTaps<T>& taps, const Tensor<T>& volume, const DecoderParams<T>& p);

}  // namespace deap

#endif  // DEAP_DECODER_HPP_
