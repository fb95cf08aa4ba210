// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/patch_embed.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "deap/error.hpp"
#include "op_util.hpp"

namespace deap {

std::string patch_mode_name(PatchMode mode) {
  return mode == PatchMode::kPseudo3d ? "pseudo3d" : "true3d";
}

PatchMode parse_patch_mode(const std::string& name) {
  if (name == "pseudo3d") return PatchMode::kPseudo3d;
  if (name == "true3d") return PatchMode::kTrue3d;
  fail(ErrorCode::kConfig, "unknown patch mode '" + name + "' (expected pseudo3d or true3d)");
}

Index3 token_grid(const Index3& volume_dims, const PatchConfig& cfg) {
  require(cfg.embed_dim >= 8, ErrorCode::kConfig, "embed_dim must be >= 8");
  Index3 grid{};
  for (int a = 0; a < 3; ++a) {
    require(cfg.patch[a] > 0, ErrorCode::kConfig, "patch sizes must be positive");
    require(volume_dims[a] % cfg.patch[a] == 0 && volume_dims[a] >= cfg.patch[a],
            ErrorCode::kShapeMismatch,
            "volume dim " + std::to_string(volume_dims[a]) + " is not divisible by patch size " +
                std::to_string(cfg.patch[a]));
    grid[a] = volume_dims[a] / cfg.patch[a];
  }
  return grid;
}

template <typename T>
PatchParams<T> add_patch_params(ParameterStore<T>& store, const std::string& prefix,
                                const PatchConfig& cfg, std::size_t in_channels,
                                std::mt19937_64& rng) {
  const auto [ph, pw, pd] = cfg.patch;
  const std::size_t c = cfg.embed_dim;
  PatchParams<T> p;
  if (cfg.mode == PatchMode::kPseudo3d) {
    p.w2d = store.add(prefix + ".w2d", {ph, pw, 1, in_channels, c},
                      truncated_normal<T>(rng, ph * pw * in_channels * c, 0.02));
    p.b2d = store.add(prefix + ".b2d", {c}, std::vector<T>(c, T(0)));
    p.wdepth = store.add(prefix + ".wdepth", {1, 1, pd, c}, truncated_normal<T>(rng, pd * c, 0.02));
    p.bdepth = store.add(prefix + ".bdepth", {c}, std::vector<T>(c, T(0)));
  } else {
    p.w3d = store.add(prefix + ".w3d", {ph, pw, pd, in_channels, c},
                      truncated_normal<T>(rng, ph * pw * pd * in_channels * c, 0.02));
    p.b3d = store.add(prefix + ".b3d", {c}, std::vector<T>(c, T(0)));
  }
  return p;
}

namespace {

template <typename T>
void check_volume_input(const Tensor<T>& x, const PatchConfig& cfg, const char* op) {
  detail::check_defined(x, op);
  if (x.rank() != 4) detail::shape_error(op, "expected [H, W, D, N], got " + shape_str(x.shape()));
  token_grid({x.dim(0), x.dim(1), x.dim(2)}, cfg);
}

}  // namespace

template <typename T>
Tensor<T> pseudo3d_patch_embed(const Tensor<T>& x, const PatchParams<T>& p,
                               const PatchConfig& cfg) {
  check_volume_input(x, cfg, "pseudo3d_patch_embed");
  require(p.w2d.defined() && p.wdepth.defined(), ErrorCode::kInvalidArgument,
          "pseudo3d_patch_embed: missing pseudo3d weights");
  const auto [ph, pw, pd] = cfg.patch;
  Conv3dOptions in_plane;
  in_plane.stride = {ph, pw, 1};
  Tensor<T> slices = conv3d(x, p.w2d, p.b2d, in_plane);
  Conv3dOptions depth;
  depth.stride = {1, 1, pd};
  return depthwise_conv3d(slices, p.wdepth, p.bdepth, depth);
}

template <typename T>
Tensor<T> true3d_patch_embed(const Tensor<T>& x, const PatchParams<T>& p,
                             const PatchConfig& cfg) {
  check_volume_input(x, cfg, "true3d_patch_embed");
  require(p.w3d.defined(), ErrorCode::kInvalidArgument, "true3d_patch_embed: missing 3-D weights");
  Conv3dOptions opt;
  opt.stride = cfg.patch;
  return conv3d(x, p.w3d, p.b3d, opt);
}

template <typename T>
Tensor<T> patch_embed(const Tensor<T>& x, const PatchParams<T>& p, const PatchConfig& cfg) {
  return cfg.mode == PatchMode::kPseudo3d ? pseudo3d_patch_embed(x, p, cfg)
                                          : true3d_patch_embed(x, p, cfg);
}

template <typename T>
Tensor<T> volume_to_tensor(const Volume& v) {
  v.validate();
  std::vector<T> values(v.data.begin(), v.data.end());
  return Tensor<T>::from_values({v.dims[0], v.dims[1], v.dims[2], v.channels}, std::move(values));
}

SeparableFactors separable_factorize(const std::vector<double>& kernel, const Index3& patch,
                                     std::size_t in_channels, std::size_t out_channels) {
  const auto [ph, pw, pd] = patch;
  const std::size_t rows = ph * pw * in_channels;
  require(kernel.size() == rows * pd * out_channels, ErrorCode::kShapeMismatch,
          "separable_factorize: kernel size does not match patch and channels");
  SeparableFactors f;
  f.in_plane.assign(rows * out_channels, 0.0);
  f.depth.assign(pd * out_channels, 0.0);
  // kernel index: (((a * pw + b) * pd + c) * N + n) * C + o
  auto kidx = [&](std::size_t a, std::size_t b, std::size_t c, std::size_t n, std::size_t o) {
    return (((a * pw + b) * pd + c) * in_channels + n) * out_channels + o;
  };
  for (std::size_t o = 0; o < out_channels; ++o) {
    Eigen::MatrixXd m(rows, pd);
    for (std::size_t a = 0; a < ph; ++a)
      for (std::size_t b = 0; b < pw; ++b)
        for (std::size_t n = 0; n < in_channels; ++n)
          for (std::size_t c = 0; c < pd; ++c)
            m((a * pw + b) * in_channels + n, c) = kernel[kidx(a, b, c, n, o)];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma = svd.singularValues()(0);
    Eigen::VectorXd u = svd.matrixU().col(0) * sigma;
    Eigen::VectorXd w = svd.matrixV().col(0);
    for (std::size_t r = 0; r < rows; ++r) f.in_plane[r * out_channels + o] = u(r);
    for (std::size_t c = 0; c < pd; ++c) f.depth[c * out_channels + o] = w(c);
    const Eigen::MatrixXd diff = m - u * w.transpose();
    f.residual = std::max(f.residual, diff.cwiseAbs().maxCoeff());
  }
  return f;
}

#define DEAP_INSTANTIATE(T)                                                                     \
  template PatchParams<T> add_patch_params<T>(ParameterStore<T>&, const std::string&,           \
                                              const PatchConfig&, std::size_t, std::mt19937_64&); \
  template Tensor<T> pseudo3d_patch_embed<T>(const Tensor<T>&, const PatchParams<T>&,          \
                                             const PatchConfig&);                               \
  template Tensor<T> true3d_patch_embed<T>(const Tensor<T>&, const PatchParams<T>&,            \
                                           const PatchConfig&);                                 \
  template Tensor<T> patch_embed<T>(const Tensor<T>&, const PatchParams<T>&, const PatchConfig&); \
  template Tensor<T> volume_to_tensor<T>(const Volume&);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
