// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/metrics.hpp"

#include <cmath>
#include <limits>

#include "deap/error.hpp"
#include "op_util.hpp"

namespace deap {

void validate_loss_config(const LossConfig& cfg) {
  require(std::isfinite(cfg.w_dice) && cfg.w_dice >= 0.0 && std::isfinite(cfg.w_ce) &&
              cfg.w_ce >= 0.0,
          ErrorCode::kConfig, "loss weights must be finite and non-negative");
  require(std::isfinite(cfg.smooth) && cfg.smooth > 0.0, ErrorCode::kConfig,
          "loss.smooth must be positive");
  require(cfg.eps > 0.0 && cfg.eps < 0.5, ErrorCode::kConfig, "loss.eps must be in (0, 0.5)");
}

template <typename T>
Tensor<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& target, const LossConfig& cfg) {
  validate_loss_config(cfg);
  detail::check_defined(pred, "combined_loss");
  detail::check_defined(target, "combined_loss");
  if (pred.shape() != target.shape()) {
    detail::shape_error("combined_loss", "prediction " + shape_str(pred.shape()) +
                                             " vs target " + shape_str(target.shape()));
  }
  const T smooth = static_cast<T>(cfg.smooth);
  Tensor<T> inter = reduce_sum(mul(pred, target));
  Tensor<T> denom = add_scalar(add(reduce_sum(pred), reduce_sum(target)), smooth);
  Tensor<T> dice = div(add_scalar(scale(inter, T(2)), smooth), denom);
  Tensor<T> dice_term = add_scalar(scale(dice, T(-1)), T(1));

  const T eps = static_cast<T>(cfg.eps);
  Tensor<T> p = clamp(pred, eps, T(1) - eps);
  Tensor<T> one_minus_p = add_scalar(scale(p, T(-1)), T(1));
  Tensor<T> one_minus_t = add_scalar(scale(target, T(-1)), T(1));
  Tensor<T> ll = add(mul(target, log(p)), mul(one_minus_t, log(one_minus_p)));
  Tensor<T> bce = scale(reduce_mean(ll), T(-1));

  return add(scale(dice_term, static_cast<T>(cfg.w_dice)), scale(bce, static_cast<T>(cfg.w_ce)));
}

template <typename T>
Tensor<T> mask_to_tensor(const Mask& mask) {
  mask.validate();
  std::vector<T> values(mask.data.begin(), mask.data.end());
  return Tensor<T>::from_values({mask.dims[0], mask.dims[1], mask.dims[2], 1}, std::move(values));
}

namespace {

template <typename T>
Mask threshold_impl(std::span<const T> prob, const Index3& dims, double threshold) {
  require(prob.size() == dims[0] * dims[1] * dims[2], ErrorCode::kShapeMismatch,
          "threshold_mask: probability count does not match dims");
  Mask m;
  m.dims = dims;
  m.data.resize(prob.size());
  for (std::size_t i = 0; i < prob.size(); ++i) m.data[i] = prob[i] >= threshold ? 1 : 0;
  return m;
}

void check_pair(const Mask& a, const Mask& b, const char* op) {
  require(a.dims == b.dims && a.data.size() == b.data.size() &&
              a.data.size() == a.dims[0] * a.dims[1] * a.dims[2],
          ErrorCode::kShapeMismatch, std::string(op) + ": masks differ in shape");
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas; f holds squared distances (inf = no site).
void edt_1d(const double* f, double* d, std::size_t n, std::vector<std::size_t>& v,
            std::vector<double>& z) {
  v.resize(n);
  z.resize(n + 1);
  std::ptrdiff_t k = -1;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    const double fq = f[q] + static_cast<double>(q) * q;
    while (k >= 0) {
      const std::size_t p = v[k];
      const double s = (fq - (f[p] + static_cast<double>(p) * p)) / (2.0 * (double(q) - double(p)));
      if (s <= z[k]) {
        --k;
      } else {
        ++k;
        v[k] = q;
        z[k] = s;
        break;
      }
    }
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
    }
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (std::size_t q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  std::ptrdiff_t j = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[j + 1] < static_cast<double>(q)) ++j;
    const double diff = static_cast<double>(q) - static_cast<double>(v[j]);
    d[q] = diff * diff + f[v[j]];
  }
}

}  // namespace

Mask threshold_mask(std::span<const float> prob, const Index3& dims, double threshold) {
  return threshold_impl(prob, dims, threshold);
}

Mask threshold_mask(std::span<const double> prob, const Index3& dims, double threshold) {
  return threshold_impl(prob, dims, threshold);
}

double dice_score(const Mask& pred, const Mask& gt) {
  check_pair(pred, gt, "dice_score");
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    p += pred.data[i] != 0;
    g += gt.data[i] != 0;
    both += pred.data[i] != 0 && gt.data[i] != 0;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(p + g);
}

std::vector<std::uint8_t> boundary_voxels(const Mask& mask) {
  const auto [nh, nw, nd] = mask.dims;
  std::vector<std::uint8_t> out(mask.data.size(), 0);
  auto fg = [&](std::ptrdiff_t h, std::ptrdiff_t w, std::ptrdiff_t d) {
    if (h < 0 || w < 0 || d < 0 || h >= std::ptrdiff_t(nh) || w >= std::ptrdiff_t(nw) ||
        d >= std::ptrdiff_t(nd)) {
      return false;
    }
    return mask.data[mask.index(h, w, d)] != 0;
  };
  for (std::ptrdiff_t h = 0; h < std::ptrdiff_t(nh); ++h)
    for (std::ptrdiff_t w = 0; w < std::ptrdiff_t(nw); ++w)
      for (std::ptrdiff_t d = 0; d < std::ptrdiff_t(nd); ++d) {
        if (!fg(h, w, d)) continue;
        if (!fg(h - 1, w, d) || !fg(h + 1, w, d) || !fg(h, w - 1, d) || !fg(h, w + 1, d) ||
            !fg(h, w, d - 1) || !fg(h, w, d + 1)) {
          out[mask.index(h, w, d)] = 1;
        }
      }
  return out;
}

std::vector<double> squared_distance_transform(const std::vector<std::uint8_t>& sites,
                                               const Index3& dims) {
  const auto [nh, nw, nd] = dims;
  require(sites.size() == nh * nw * nd, ErrorCode::kShapeMismatch,
          "squared_distance_transform: site count does not match dims");
  std::vector<double> g(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) g[i] = sites[i] ? 0.0 : kInf;
  const std::size_t longest = std::max({nh, nw, nd});
  std::vector<double> line(longest), out(longest), z;
  std::vector<std::size_t> v;
  auto pass = [&](std::size_t n, std::size_t stride, auto&& starts) {
    for (std::size_t base : starts) {
      for (std::size_t i = 0; i < n; ++i) line[i] = g[base + i * stride];
      edt_1d(line.data(), out.data(), n, v, z);
      for (std::size_t i = 0; i < n; ++i) g[base + i * stride] = out[i];
    }
  };
  std::vector<std::size_t> starts;
  // Along d (contiguous).
  starts.clear();
  for (std::size_t h = 0; h < nh; ++h)
    for (std::size_t w = 0; w < nw; ++w) starts.push_back((h * nw + w) * nd);
  pass(nd, 1, starts);
  // Along w.
  starts.clear();
  for (std::size_t h = 0; h < nh; ++h)
    for (std::size_t d = 0; d < nd; ++d) starts.push_back(h * nw * nd + d);
  pass(nw, nd, starts);
  // Along h.
  starts.clear();
  for (std::size_t w = 0; w < nw; ++w)
    for (std::size_t d = 0; d < nd; ++d) starts.push_back(w * nd + d);
  pass(nh, nw * nd, starts);
  return g;
}

double nsd(const Mask& pred, const Mask& gt, double tau) {
  check_pair(pred, gt, "nsd");
  require(std::isfinite(tau) && tau >= 0.0, ErrorCode::kInvalidArgument, "nsd: tau must be >= 0");
  const auto bp = boundary_voxels(pred);
  const auto bg = boundary_voxels(gt);
  std::size_t np = 0, ng = 0;
  for (std::size_t i = 0; i < bp.size(); ++i) {
    np += bp[i];
    ng += bg[i];
  }
  if (np + ng == 0) return 1.0;
  const double tau2 = tau * tau;
  std::size_t close = 0;
  if (ng > 0) {
    const auto dist_to_g = squared_distance_transform(bg, gt.dims);
    for (std::size_t i = 0; i < bp.size(); ++i) close += bp[i] && dist_to_g[i] <= tau2;
  }
  if (np > 0) {
    const auto dist_to_p = squared_distance_transform(bp, pred.dims);
    for (std::size_t i = 0; i < bg.size(); ++i) close += bg[i] && dist_to_p[i] <= tau2;
  }
  return static_cast<double>(close) / static_cast<double>(np + ng);
}

MetricReport evaluate_masks(const Mask& pred, const Mask& gt, double tau) {
  return {dice_score(pred, gt), nsd(pred, gt, tau), tau};
}

template Tensor<float> combined_loss<float>(const Tensor<float>&, const Tensor<float>&,
                                            const LossConfig&);
template Tensor<double> combined_loss<double>(const Tensor<double>&, const Tensor<double>&,
                                              const LossConfig&);
template Tensor<float> mask_to_tensor<float>(const Mask&);
template Tensor<double> mask_to_tensor<double>(const Mask&);

}  // namespace deap
