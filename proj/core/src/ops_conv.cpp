// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "deap/ops.hpp"
#include "deap/parallel.hpp"
#include "gemm.hpp"
#include "op_util.hpp"

namespace deap {

using detail::grad_of;
using detail::make_result;

namespace {

// Patch-matrix rows are processed in blocks of at most this many elements.
constexpr std::size_t kColumnBudget = std::size_t{1} << 20;

struct ConvGeometry {
  Index3 in{};
  Index3 kernel{};
  Index3 out{};
  Index3 stride{};
  Index3 pad{};
  std::size_t cin = 0;
  std::size_t cout = 0;

  std::size_t out_voxels() const { return out[0] * out[1] * out[2]; }
  std::size_t patch() const { return kernel[0] * kernel[1] * kernel[2] * cin; }
  bool pointwise() const {
    return kernel == Index3{1, 1, 1} && stride == Index3{1, 1, 1} && pad == Index3{0, 0, 0};
  }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Shape& kshape, std::size_t cin_axis_dim,
                           const Conv3dOptions& opt, const char* op) {
  if (x.rank() != 4) detail::shape_error(op, "input must be [H, W, D, C], got " + shape_str(x.shape()));
  ConvGeometry g;
  g.cin = x.dim(3);
  if (cin_axis_dim != g.cin) {
    detail::shape_error(op, "kernel expects " + std::to_string(cin_axis_dim) +
                                " input channels, input has " + std::to_string(g.cin));
  }
  for (int a = 0; a < 3; ++a) {
    require(opt.stride[a] >= 1, ErrorCode::kInvalidArgument, std::string(op) + ": stride must be >= 1");
    g.in[a] = x.dim(a);
    g.kernel[a] = kshape[a];
    g.stride[a] = opt.stride[a];
    g.pad[a] = opt.padding[a];
    const std::size_t padded = g.in[a] + 2 * g.pad[a];
    if (g.kernel[a] == 0 || padded < g.kernel[a]) {
      detail::shape_error(op, "kernel larger than padded input");
    }
    g.out[a] = (padded - g.kernel[a]) / g.stride[a] + 1;
  }
  return g;
}

// Fills rows [row0, row0 + rows) of the patch matrix.
template <typename T>
void im2col(const ConvGeometry& g, const T* x, std::size_t row0, std::size_t rows, T* cols) {
  const std::size_t patch = g.patch();
  const std::size_t plane = g.out[1] * g.out[2];
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t o = row0 + r;
    const std::size_t oh = o / plane, ow = (o / g.out[2]) % g.out[1], od = o % g.out[2];
    T* dst = cols + r * patch;
    for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
      const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride[0] + kh) -
                                static_cast<std::ptrdiff_t>(g.pad[0]);
      for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride[1] + kw) -
                                  static_cast<std::ptrdiff_t>(g.pad[1]);
        for (std::size_t kd = 0; kd < g.kernel[2]; ++kd) {
          const std::ptrdiff_t id = static_cast<std::ptrdiff_t>(od * g.stride[2] + kd) -
                                    static_cast<std::ptrdiff_t>(g.pad[2]);
          const bool inside = ih >= 0 && iw >= 0 && id >= 0 &&
                              ih < static_cast<std::ptrdiff_t>(g.in[0]) &&
                              iw < static_cast<std::ptrdiff_t>(g.in[1]) &&
                              id < static_cast<std::ptrdiff_t>(g.in[2]);
          if (inside) {
            const T* src = x + ((static_cast<std::size_t>(ih) * g.in[1] + iw) * g.in[2] + id) * g.cin;
            std::copy_n(src, g.cin, dst);
          } else {
            std::fill_n(dst, g.cin, T(0));
          }
          dst += g.cin;
        }
      }
    }
  }
}

template <typename T>
void col2im(const ConvGeometry& g, const T* cols, std::size_t row0, std::size_t rows, T* dx) {
  const std::size_t patch = g.patch();
  const std::size_t plane = g.out[1] * g.out[2];
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t o = row0 + r;
    const std::size_t oh = o / plane, ow = (o / g.out[2]) % g.out[1], od = o % g.out[2];
    const T* src = cols + r * patch;
    for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
      const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride[0] + kh) -
                                static_cast<std::ptrdiff_t>(g.pad[0]);
      for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
        const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride[1] + kw) -
                                  static_cast<std::ptrdiff_t>(g.pad[1]);
        for (std::size_t kd = 0; kd < g.kernel[2]; ++kd) {
          const std::ptrdiff_t id = static_cast<std::ptrdiff_t>(od * g.stride[2] + kd) -
                                    static_cast<std::ptrdiff_t>(g.pad[2]);
          const bool inside = ih >= 0 && iw >= 0 && id >= 0 &&
                              ih < static_cast<std::ptrdiff_t>(g.in[0]) &&
                              iw < static_cast<std::ptrdiff_t>(g.in[1]) &&
                              id < static_cast<std::ptrdiff_t>(g.in[2]);
          if (inside) {
            T* dst = dx + ((static_cast<std::size_t>(ih) * g.in[1] + iw) * g.in[2] + id) * g.cin;
            for (std::size_t c = 0; c < g.cin; ++c) dst[c] += src[c];
          }
          src += g.cin;
        }
      }
    }
  }
}

std::size_t block_rows(const ConvGeometry& g) {
  return std::max<std::size_t>(1, kColumnBudget / std::max<std::size_t>(1, g.patch()));
}

template <typename T>
void check_conv_weight(const Tensor<T>& weight, const Tensor<T>& bias, const char* op) {
  if (weight.rank() != 5) {
    detail::shape_error(op, "weight must be [kh, kw, kd, Cin, Cout], got " + shape_str(weight.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{weight.dim(4)}) {
    detail::shape_error(op, "bias must be [Cout]");
  }
}

}  // namespace

template <typename T>
Tensor<T> conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv3dOptions& options) {
  detail::check_inputs<T>({&x, &weight}, "conv3d");
  if (bias.defined()) detail::check_finite(bias, "conv3d");
  check_conv_weight(weight, bias, "conv3d");
  ConvGeometry geo = conv_geometry(x, weight.shape(), weight.dim(3), options, "conv3d");
  geo.cout = weight.dim(4);
  const std::size_t rows_total = geo.out_voxels();
  const std::size_t patch = geo.patch();
  std::vector<T> out(rows_total * geo.cout);
  const T* xv = x.values().data();
  const T* wv = weight.values().data();

  if (geo.pointwise()) {
    detail::gemm<T>(false, false, rows_total, geo.cout, patch, xv, wv, out.data(), false);
  } else {
    const std::size_t block = block_rows(geo);
    parallel_chunks(rows_total, [&](int, std::size_t begin, std::size_t end) {
      std::vector<T> cols(std::min(block, end - begin) * patch);
      for (std::size_t r0 = begin; r0 < end; r0 += block) {
        const std::size_t rows = std::min(block, end - r0);
        im2col(geo, xv, r0, rows, cols.data());
        detail::gemm<T>(false, false, rows, geo.cout, patch, cols.data(), wv,
                        out.data() + r0 * geo.cout, false);
      }
    });
  }
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t r = 0; r < rows_total; ++r) {
      for (std::size_t c = 0; c < geo.cout; ++c) out[r * geo.cout + c] += bv[c];
    }
  }

  Node<T>* xn = x.node();
  Node<T>* wn = weight.node();
  Node<T>* bn = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>(
      {geo.out[0], geo.out[1], geo.out[2], geo.cout}, std::move(out), inputs, "conv3d",
      [xn, wn, bn, geo](Node<T>& self) {
        const std::size_t rows_total = geo.out_voxels();
        const std::size_t patch = geo.patch();
        const T* gy = self.grad.data();
        if (T* gb = grad_of(bn)) {
          for (std::size_t r = 0; r < rows_total; ++r) {
            for (std::size_t c = 0; c < geo.cout; ++c) gb[c] += gy[r * geo.cout + c];
          }
        }
        T* gw = grad_of(wn);
        T* gx = grad_of(xn);
        if (!gw && !gx) return;
        if (geo.pointwise()) {
          if (gw) detail::gemm<T>(true, false, patch, geo.cout, rows_total, xn->value.data(), gy, gw, true);
          if (gx) detail::gemm<T>(false, true, rows_total, patch, geo.cout, gy, wn->value.data(), gx, true);
          return;
        }
        const std::size_t block = block_rows(geo);
        const std::size_t chunks = parallel_chunk_count(rows_total);
        // Per-chunk partial sums keep the reduction order fixed for a given
        // thread count.
        std::vector<std::vector<T>> gw_parts(gw ? chunks : 0);
        std::vector<std::vector<T>> gx_parts(gx && chunks > 1 ? chunks - 1 : 0);
        parallel_chunks(rows_total, [&](int chunk, std::size_t begin, std::size_t end) {
          std::vector<T> cols(std::min(block, end - begin) * patch);
          std::vector<T> dcols(gx ? cols.size() : 0);
          T* gw_local = nullptr;
          if (gw) {
            gw_parts[chunk].assign(patch * geo.cout, T(0));
            gw_local = gw_parts[chunk].data();
          }
          T* gx_local = gx;
          if (gx && chunk > 0) {
            gx_parts[chunk - 1].assign(xn->value.size(), T(0));
            gx_local = gx_parts[chunk - 1].data();
          }
          for (std::size_t r0 = begin; r0 < end; r0 += block) {
            const std::size_t rows = std::min(block, end - r0);
            const T* gy_block = gy + r0 * geo.cout;
            if (gw_local) {
              im2col(geo, xn->value.data(), r0, rows, cols.data());
              detail::gemm<T>(true, false, patch, geo.cout, rows, cols.data(), gy_block,
                              gw_local, true);
            }
            if (gx_local) {
              detail::gemm<T>(false, true, rows, patch, geo.cout, gy_block, wn->value.data(),
                              dcols.data(), false);
              col2im(geo, dcols.data(), r0, rows, gx_local);
            }
          }
        });
        for (const auto& part : gw_parts) {
          for (std::size_t i = 0; i < part.size(); ++i) gw[i] += part[i];
        }
        for (const auto& part : gx_parts) {
          for (std::size_t i = 0; i < part.size(); ++i) gx[i] += part[i];
        }
      });
}

template <typename T>
Tensor<T> conv3d_direct(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                        const Conv3dOptions& options) {
  detail::check_inputs<T>({&x, &weight}, "conv3d_direct");
  check_conv_weight(weight, bias, "conv3d_direct");
  ConvGeometry g = conv_geometry(x, weight.shape(), weight.dim(3), options, "conv3d_direct");
  g.cout = weight.dim(4);
  const auto xv = x.values();
  const auto wv = weight.values();
  std::vector<T> out(g.out_voxels() * g.cout, T(0));
  for (std::size_t oh = 0; oh < g.out[0]; ++oh) {
    for (std::size_t ow = 0; ow < g.out[1]; ++ow) {
      for (std::size_t od = 0; od < g.out[2]; ++od) {
        T* dst = out.data() + ((oh * g.out[1] + ow) * g.out[2] + od) * g.cout;
        for (std::size_t co = 0; co < g.cout; ++co) {
          T acc = bias.defined() ? bias.values()[co] : T(0);
          for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride[0] + kh) -
                                      static_cast<std::ptrdiff_t>(g.pad[0]);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in[0])) continue;
            for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride[1] + kw) -
                                        static_cast<std::ptrdiff_t>(g.pad[1]);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in[1])) continue;
              for (std::size_t kd = 0; kd < g.kernel[2]; ++kd) {
                const std::ptrdiff_t id = static_cast<std::ptrdiff_t>(od * g.stride[2] + kd) -
                                          static_cast<std::ptrdiff_t>(g.pad[2]);
                if (id < 0 || id >= static_cast<std::ptrdiff_t>(g.in[2])) continue;
                for (std::size_t ci = 0; ci < g.cin; ++ci) {
                  const T xval = xv[((static_cast<std::size_t>(ih) * g.in[1] + iw) * g.in[2] + id) * g.cin + ci];
                  const T wval = wv[(((kh * g.kernel[1] + kw) * g.kernel[2] + kd) * g.cin + ci) * g.cout + co];
                  acc += xval * wval;
                }
              }
            }
          }
          dst[co] = acc;
        }
      }
    }
  }
  return Tensor<T>::from_values({g.out[0], g.out[1], g.out[2], g.cout}, std::move(out));
}

template <typename T>
Tensor<T> depthwise_conv3d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           const Conv3dOptions& options) {
  detail::check_inputs<T>({&x, &weight}, "depthwise_conv3d");
  if (bias.defined()) detail::check_finite(bias, "depthwise_conv3d");
  if (weight.rank() != 4) {
    detail::shape_error("depthwise_conv3d", "weight must be [kh, kw, kd, C], got " + shape_str(weight.shape()));
  }
  ConvGeometry g = conv_geometry(x, weight.shape(), weight.dim(3), options, "depthwise_conv3d");
  g.cout = g.cin;
  if (bias.defined() && bias.shape() != Shape{g.cin}) {
    detail::shape_error("depthwise_conv3d", "bias must be [C]");
  }
  const std::size_t c = g.cin;
  // Visits every (output voxel, input voxel, kernel tap) triple.
  auto for_each_tap = [g, c](auto&& fn) {
    for (std::size_t oh = 0; oh < g.out[0]; ++oh)
      for (std::size_t ow = 0; ow < g.out[1]; ++ow)
        for (std::size_t od = 0; od < g.out[2]; ++od) {
          const std::size_t o = ((oh * g.out[1] + ow) * g.out[2] + od) * c;
          for (std::size_t kh = 0; kh < g.kernel[0]; ++kh) {
            const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * g.stride[0] + kh) -
                                      static_cast<std::ptrdiff_t>(g.pad[0]);
            if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.in[0])) continue;
            for (std::size_t kw = 0; kw < g.kernel[1]; ++kw) {
              const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * g.stride[1] + kw) -
                                        static_cast<std::ptrdiff_t>(g.pad[1]);
              if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(g.in[1])) continue;
              for (std::size_t kd = 0; kd < g.kernel[2]; ++kd) {
                const std::ptrdiff_t id = static_cast<std::ptrdiff_t>(od * g.stride[2] + kd) -
                                          static_cast<std::ptrdiff_t>(g.pad[2]);
                if (id < 0 || id >= static_cast<std::ptrdiff_t>(g.in[2])) continue;
                const std::size_t i = ((static_cast<std::size_t>(ih) * g.in[1] + iw) * g.in[2] + id) * c;
                const std::size_t k = ((kh * g.kernel[1] + kw) * g.kernel[2] + kd) * c;
                fn(o, i, k);
              }
            }
          }
        }
  };
  const auto xv = x.values();
  const auto wv = weight.values();
  std::vector<T> out(g.out_voxels() * c, T(0));
  for_each_tap([&](std::size_t o, std::size_t i, std::size_t k) {
    for (std::size_t ch = 0; ch < c; ++ch) out[o + ch] += xv[i + ch] * wv[k + ch];
  });
  if (bias.defined()) {
    const auto bv = bias.values();
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += bv[r % c];
  }
  Node<T>* xn = x.node();
  Node<T>* wn = weight.node();
  Node<T>* bn = bias.defined() ? bias.node() : nullptr;
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return make_result<T>({g.out[0], g.out[1], g.out[2], c}, std::move(out), inputs,
                        "depthwise_conv3d", [xn, wn, bn, c, for_each_tap](Node<T>& self) {
                          const T* gy = self.grad.data();
                          if (T* gb = grad_of(bn)) {
                            for (std::size_t r = 0; r < self.grad.size(); ++r) gb[r % c] += gy[r];
                          }
                          T* gx = grad_of(xn);
                          T* gw = grad_of(wn);
                          if (!gx && !gw) return;
                          for_each_tap([&](std::size_t o, std::size_t i, std::size_t k) {
                            for (std::size_t ch = 0; ch < c; ++ch) {
                              if (gx) gx[i + ch] += gy[o + ch] * wn->value[k + ch];
                              if (gw) gw[k + ch] += gy[o + ch] * xn->value[i + ch];
                            }
                          });
                        });
}

namespace {

struct AxisTable {
  std::vector<std::size_t> lo, hi;
  std::vector<double> frac;
};

AxisTable axis_table(std::size_t in, std::size_t out) {
  AxisTable t;
  t.lo.resize(out);
  t.hi.resize(out);
  t.frac.resize(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t o = 0; o < out; ++o) {
    double src = (static_cast<double>(o) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    std::size_t lo = static_cast<std::size_t>(src);
    if (lo > in - 1) lo = in - 1;
    t.lo[o] = lo;
    t.hi[o] = std::min(lo + 1, in - 1);
    t.frac[o] = src - static_cast<double>(lo);
  }
  return t;
}

}  // namespace

template <typename T>
Tensor<T> trilinear_resize(const Tensor<T>& x, const Index3& size) {
  detail::check_inputs<T>({&x}, "trilinear_resize");
  if (x.rank() != 4) detail::shape_error("trilinear_resize", "input must be [H, W, D, C]");
  for (auto s : size) {
    require(s > 0, ErrorCode::kInvalidArgument, "trilinear_resize: empty target size");
  }
  const std::size_t c = x.dim(3);
  const Index3 in{x.dim(0), x.dim(1), x.dim(2)};
  const AxisTable th = axis_table(in[0], size[0]);
  const AxisTable tw = axis_table(in[1], size[1]);
  const AxisTable td = axis_table(in[2], size[2]);
  auto for_each_corner = [=](auto&& fn) {
    for (std::size_t oh = 0; oh < size[0]; ++oh)
      for (std::size_t ow = 0; ow < size[1]; ++ow)
        for (std::size_t od = 0; od < size[2]; ++od) {
          const std::size_t o = ((oh * size[1] + ow) * size[2] + od) * c;
          const std::size_t hs[2] = {th.lo[oh], th.hi[oh]};
          const std::size_t ws[2] = {tw.lo[ow], tw.hi[ow]};
          const std::size_t ds[2] = {td.lo[od], td.hi[od]};
          const T hf[2] = {T(1 - th.frac[oh]), T(th.frac[oh])};
          const T wf[2] = {T(1 - tw.frac[ow]), T(tw.frac[ow])};
          const T df[2] = {T(1 - td.frac[od]), T(td.frac[od])};
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int e = 0; e < 2; ++e) {
                const std::size_t i = ((hs[a] * in[1] + ws[b]) * in[2] + ds[e]) * c;
                fn(o, i, hf[a] * wf[b] * df[e]);
              }
        }
  };
  const auto xv = x.values();
  std::vector<T> out(size[0] * size[1] * size[2] * c, T(0));
  for_each_corner([&](std::size_t o, std::size_t i, T w) {
    for (std::size_t ch = 0; ch < c; ++ch) out[o + ch] += w * xv[i + ch];
  });
  Node<T>* xn = x.node();
  return make_result<T>({size[0], size[1], size[2], c}, std::move(out), {x}, "trilinear_resize",
                        [xn, c, for_each_corner](Node<T>& self) {
                          T* gx = grad_of(xn);
                          if (!gx) return;
                          const T* gy = self.grad.data();
                          for_each_corner([&](std::size_t o, std::size_t i, T w) {
                            for (std::size_t ch = 0; ch < c; ++ch) gx[i + ch] += w * gy[o + ch];
                          });
                        });
}

template <typename T>
Tensor<T> trilinear_upsample(const Tensor<T>& x, std::size_t factor) {
  detail::check_defined(x, "trilinear_upsample");
  require(factor >= 1, ErrorCode::kInvalidArgument, "trilinear_upsample: factor must be >= 1");
  if (x.rank() != 4) detail::shape_error("trilinear_upsample", "input must be [H, W, D, C]");
  return trilinear_resize(x, Index3{x.dim(0) * factor, x.dim(1) * factor, x.dim(2) * factor});
}

#define DEAP_INSTANTIATE(T)                                                                \
  template Tensor<T> conv3d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                               const Conv3dOptions&);                                      \
  template Tensor<T> conv3d_direct<T>(const Tensor<T>&, const Tensor<T>&,                  \
                                      const Tensor<T>&, const Conv3dOptions&);             \
  template Tensor<T> depthwise_conv3d<T>(const Tensor<T>&, const Tensor<T>&,               \
                                         const Tensor<T>&, const Conv3dOptions&);          \
  template Tensor<T> trilinear_resize<T>(const Tensor<T>&, const Index3&);                 \
  template Tensor<T> trilinear_upsample<T>(const Tensor<T>&, std::size_t);
DEAP_INSTANTIATE_FOR_REALS(DEAP_INSTANTIATE)
#undef DEAP_INSTANTIATE

}  // namespace deap
