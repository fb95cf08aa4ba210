// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/decoder.hpp"

#include <cmath>

#include "deap/error.hpp"
#include "op_util.hpp"

namespace deap {

std::size_t decoder_width(const DecoderConfig& cfg, std::size_t embed_dim) {
  const std::size_t w = cfg.channels == 0 ? embed_dim / 4 : cfg.channels;
  require(w >= 1, ErrorCode::kConfig, "decoder.channels must be >= 1");
  return w;
}

std::vector<Index3> image_branch_strides(const Index3& volume_dims, const Index3& grid) {
  std::size_t levels[3];
  std::size_t depth = 0;
  for (int a = 0; a < 3; ++a) {
    require(grid[a] > 0 && volume_dims[a] % grid[a] == 0, ErrorCode::kConfig,
            "image branch: volume dims must be multiples of the token grid");
    std::size_t ratio = volume_dims[a] / grid[a];
    require(ratio >= 2 && ratio % 2 == 0, ErrorCode::kConfig,
            "image branch: volume/grid ratio " + std::to_string(ratio) +
                " cannot reach twice the grid with stride-2 stages");
    ratio /= 2;
    levels[a] = 0;
    while (ratio > 1) {
      require(ratio % 2 == 0, ErrorCode::kConfig,
              "image branch: volume/grid ratio must be twice a power of two");
      ratio /= 2;
      ++levels[a];
    }
    depth = std::max(depth, levels[a]);
  }
  std::vector<Index3> stages(depth);
  for (std::size_t k = 0; k < depth; ++k) {
    for (int a = 0; a < 3; ++a) stages[k][a] = k < levels[a] ? 2 : 1;
  }
  return stages;
}

namespace {

template <typename T>
Tensor<T> he_conv(ParameterStore<T>& store, const std::string& name, std::size_t k,
                  std::size_t cin, std::size_t cout, std::mt19937_64& rng) {
  const std::size_t fan_in = k * k * k * cin;
  return store.add(name, {k, k, k, cin, cout},
                   scaled_normal<T>(rng, fan_in * cout, fan_in, std::sqrt(2.0)));
}

template <typename T>
ConvBlockParams<T> add_block(ParameterStore<T>& store, const std::string& prefix,
                             std::size_t cin, std::size_t cout, std::mt19937_64& rng) {
  return {he_conv(store, prefix + ".w1", 3, cin, cout, rng),
          he_conv(store, prefix + ".w2", 3, cout, cout, rng)};
}

template <typename T>
Tensor<T> conv_in_relu(const Tensor<T>& x, const Tensor<T>& w, const Conv3dOptions& opt) {
  return relu(instance_norm(conv3d(x, w, Tensor<T>(), opt)));
}

}  // namespace

template <typename T>
DecoderParams<T> add_decoder_params(ParameterStore<T>& store, const std::string& prefix,
                                    const DecoderConfig& cfg, const Index3& volume_dims,
                                    std::size_t in_channels, const Index3& grid,
                                    std::size_t embed_dim, std::size_t taps,
                                    std::mt19937_64& rng) {
  require(taps >= 1, ErrorCode::kConfig, "decoder needs at least one tap");
  DecoderParams<T> p;
  p.width = decoder_width(cfg, embed_dim);
  const std::size_t w = p.width;
  const auto strides = image_branch_strides(volume_dims, grid);
  if (!cfg.no_image_branch) {
    const std::size_t branches = cfg.share_image_branch ? 1 : taps;
    for (std::size_t b = 0; b < branches; ++b) {
      const std::string base =
          prefix + (cfg.share_image_branch ? ".image" : ".enh" + std::to_string(b + 1) + ".image");
      ImageBranchParams<T> ib;
      ib.strides = strides;
      std::size_t cin = in_channels;
      for (std::size_t k = 0; k < strides.size(); ++k) {
        ib.stage_w.push_back(he_conv(store, base + ".down" + std::to_string(k + 1), 3, cin, w, rng));
        cin = w;
      }
      ib.block = add_block(store, base + ".block", cin, w, rng);
      p.image_branches.push_back(ib);
    }
  }
  for (std::size_t j = 0; j < taps; ++j) {
    EnhancerParams<T> e;
    if (!cfg.no_image_branch) e.image_branch = cfg.share_image_branch ? 0 : static_cast<int>(j);
    e.fuse = add_block(store, prefix + ".enh" + std::to_string(j + 1) + ".fuse", embed_dim + w, w, rng);
    p.enhancers.push_back(e);
  }
  const std::size_t head = cfg.head_channels, smooth = cfg.smooth_channels;
  require(head >= 1 && smooth >= 1, ErrorCode::kConfig, "decoder head widths must be >= 1");
  p.predict.head = add_block(store, prefix + ".predict.head", taps * w, head, rng);
  p.predict.smooth_w = he_conv(store, prefix + ".predict.smooth.w", 3, head, smooth, rng);
  p.predict.smooth_b = store.add(prefix + ".predict.smooth.b", {smooth}, std::vector<T>(smooth, T(0)));
  p.predict.proj_w = store.add(prefix + ".predict.proj.w", {1, 1, 1, smooth, 1},
                               scaled_normal<T>(rng, smooth, smooth));
  p.predict.proj_b = store.add(prefix + ".predict.proj.b", {1}, std::vector<T>(1, T(0)));
  return p;
}

template <typename T>
Tensor<T> conv_block(const Tensor<T>& x, const ConvBlockParams<T>& p) {
  Conv3dOptions same;
  same.padding = {1, 1, 1};
  return conv_in_relu(conv_in_relu(x, p.w1, same), p.w2, same);
}

template <typename T>
Tensor<T> image_branch(const Tensor<T>& volume, const ImageBranchParams<T>& p) {
  Tensor<T> x = volume;
  for (std::size_t k = 0; k < p.stage_w.size(); ++k) {
    Conv3dOptions down;
    down.stride = p.strides.at(k);
    down.padding = {1, 1, 1};
    x = conv_in_relu(x, p.stage_w[k], down);
  }
  return conv_block(x, p.block);
}

template <typename T>
Tensor<T> original_feature_enhancer(const Tensor<T>& tap, const Tensor<T>& image_features,
                                    const EnhancerParams<T>& p) {
  detail::check_defined(tap, "original_feature_enhancer");
  if (tap.rank() != 4) {
    detail::shape_error("original_feature_enhancer", "tap must be [H, W, D, C], got " +
                                                         shape_str(tap.shape()));
  }
  Tensor<T> up = trilinear_upsample(tap, 2);
  const std::size_t width = p.fuse.w1.dim(3) - tap.dim(3);
  Tensor<T> img = image_features;
  if (!img.defined()) {
    img = Tensor<T>::zeros({up.dim(0), up.dim(1), up.dim(2), width});
  } else if (img.rank() != 4 || img.dim(0) != up.dim(0) || img.dim(1) != up.dim(1) ||
             img.dim(2) != up.dim(2)) {
    detail::shape_error("original_feature_enhancer",
                        "image features " + shape_str(img.shape()) +
                            " do not match the upsampled tap " + shape_str(up.shape()));
  }
  return conv_block(concat<T>({up, img}, 3), p.fuse);
}

template <typename T>
Tensor<T> predict(const std::vector<Tensor<T>>& enhanced, const PredictParams<T>& p,
                  const Index3& volume_dims) {
  require(!enhanced.empty(), ErrorCode::kInvalidArgument, "predict: no enhancer outputs");
  for (const auto& e : enhanced) {
    detail::check_defined(e, "predict");
    if (e.shape() != enhanced[0].shape()) {
      detail::shape_error("predict", "enhancer outputs differ in shape: " +
                                         shape_str(enhanced[0].shape()) + " vs " +
                                         shape_str(e.shape()));
    }
  }
  Tensor<T> x = enhanced.size() == 1 ? enhanced[0] : concat(enhanced, 3);
  x = conv_block(x, p.head);
  x = trilinear_resize(x, volume_dims);
  Conv3dOptions same;
  same.padding = {1, 1, 1};
  x = relu(conv3d(x, p.smooth_w, p.smooth_b, same));
  return sigmoid(conv3d(x, p.proj_w, p.proj_b));
}

template <typename T>
Tensor<T> decode(const EncoderTaps<T>& taps, const Tensor<T>& volume, const DecoderParams<T>& p) {
  require(taps.maps.size() == p.enhancers.size(), ErrorCode::kInvalidArgument,
          "decode: " + std::to_string(taps.maps.size()) + " taps for " +
              std::to_string(p.enhancers.size()) + " enhancers");
  std::vector<Tensor<T>> features(p.image_branches.size());
  std::vector<Tensor<T>> enhanced;
  for (std::size_t j = 0; j < p.enhancers.size(); ++j) {
    const auto& e = p.enhancers[j];
    Tensor<T> img;
    if (e.image_branch >= 0) {
      auto& f = features[e.image_branch];
      if (!f.defined()) f = image_branch(volume, p.image_branches[e.image_branch]);
      img = f;
    }
    enhanced.push_back(original_feature_enhancer(taps.maps[j], img, e));
  }
  return predict(enhanced, p.predict, {volume.dim(0), volume.dim(1), volume.dim(2)});
}

#define DEAP_INSTANTIATE(T)                                                                      \
  template DecoderParams<T> add_decoder_params<T>(ParameterStore<T>&, const std::string&,        \
                                                  const DecoderConfig&, const Index3&,           \
                                                  std::size_t, const Index3&, std::size_t,       \
                                                  std::size_t, std::mt19937_64&);                \
  template Tensor<T> conv_block<T>(const Tensor<T>&, const ConvBlockParams<T>&);                \
  template Tensor<T> image_branch<T>(const Tensor<T>&, const ImageBranchParams<T>&);            \
  template Tensor<T> original_feature_enhancer<T>(const Tensor<T>&, const Tensor<T>&,           \
                                                  const EnhancerParams<T>&);                     \
  template Tensor<T> predict<T>(const std::vector<Tensor<T>>&, const PredictParams<T>&,         \
                                const Index3&);                                                  \
  template Tensor<T> decode<T>(const EncoderTaps<T>&, const Tensor<T>&, const DecoderParams<T>&);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
