// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Slow, literal reference implementations used as test oracles. Nothing here
// calls into the library's kernels; inputs and outputs are plain vectors.

#ifndef DEAP_TESTS_ORACLES_HPP_
#define DEAP_TESTS_ORACLES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "deap/tensor.hpp"
#include "deap/volume_io.hpp"

namespace oracle {

// Row-major dense matrix.
struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}
  double& operator()(std::size_t i, std::size_t j) { return v[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return v[i * cols + j]; }
};

template <typename T>
inline Mat from_tensor(const deap::Tensor<T>& t) {
  const std::size_t c = t.shape().back();
  Mat m(t.numel() / c, c);
  const auto vals = t.values();
  for (std::size_t i = 0; i < vals.size(); ++i) m.v[i] = static_cast<double>(vals[i]);
  return m;
}

inline std::vector<double> vec(const deap::Tensor<double>& t) {
  return {t.values().begin(), t.values().end()};
}

inline Mat mm(const Mat& a, const Mat& b) {
  Mat out(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < b.cols; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

inline Mat tr(const Mat& a) {
  Mat out(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
  return out;
}

inline Mat add(const Mat& a, const Mat& b) {
  Mat out = a;
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] += b.v[i];
  return out;
}

inline Mat scaled(const Mat& a, double s) {
  Mat out = a;
  for (auto& x : out.v) x *= s;
  return out;
}

inline Mat plus_row(const Mat& a, const std::vector<double>& b) {
  Mat out = a;
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) += b[j];
  return out;
}

inline Mat softmax_rows(const Mat& a) {
  Mat out = a;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < a.cols; ++j) mx = std::max(mx, a(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) s += out(i, j) = std::exp(a(i, j) - mx);
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) /= s;
  }
  return out;
}

// Per-row normalization followed by gamma * x + beta.
inline Mat layer_norm_rows(const Mat& a, const std::vector<double>& g, const std::vector<double>& b,
                           double eps = 1e-6) {
  Mat out = a;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double mu = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) mu += a(i, j);
    mu /= static_cast<double>(a.cols);
    double var = 0.0;
    for (std::size_t j = 0; j < a.cols; ++j) var += (a(i, j) - mu) * (a(i, j) - mu);
    var /= static_cast<double>(a.cols);
    for (std::size_t j = 0; j < a.cols; ++j) {
      out(i, j) = (a(i, j) - mu) / std::sqrt(var + eps) * g[j] + b[j];
    }
  }
  return out;
}

inline Mat relu(Mat a) {
  for (auto& x : a.v) x = std::max(x, 0.0);
  return a;
}

inline Mat gelu(Mat a) {
  const double k = std::sqrt(2.0 / M_PI);
  for (auto& x : a.v) x = 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
  return a;
}

inline Mat cols(const Mat& a, std::size_t start, std::size_t n) {
  Mat out(a.rows, n);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = a(i, start + j);
  return out;
}

inline Mat hcat(const Mat& a, const Mat& b) {
  Mat out(a.rows, a.cols + b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out(i, j) = a(i, j);
    for (std::size_t j = 0; j < b.cols; ++j) out(i, a.cols + j) = b(i, j);
  }
  return out;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = a.size() == b.size() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---- Model blocks, written out term by term.

// relu(X Wd) Wu
inline Mat adapter(const Mat& x, const Mat& down, const Mat& up) { return mm(relu(mm(x, down)), up); }

struct AttnWeights {
  Mat wq, wk, wv, wo;
  std::vector<double> bq, bk, bv, bo;
};

// Multi-head attention over all rows of x; heads take contiguous column
// blocks of width C / heads.
inline Mat multihead(const Mat& x, const AttnWeights& w, std::size_t heads) {
  const Mat q = plus_row(mm(x, w.wq), w.bq), k = plus_row(mm(x, w.wk), w.bk),
            v = plus_row(mm(x, w.wv), w.bv);
  const std::size_t dh = x.cols / heads;
  Mat merged(x.rows, 0);
  for (std::size_t h = 0; h < heads; ++h) {
    const Mat qh = cols(q, h * dh, dh), kh = cols(k, h * dh, dh), vh = cols(v, h * dh, dh);
    const Mat a = softmax_rows(scaled(mm(qh, tr(kh)), 1.0 / std::sqrt(static_cast<double>(dh))));
    merged = h == 0 ? mm(a, vh) : hcat(merged, mm(a, vh));
  }
  return plus_row(mm(merged, w.wo), w.bo);
}

struct LayerWeights {
  std::vector<double> g1, b1, g2, b2;
  AttnWeights attn;
  Mat w1, w2;
  std::vector<double> c1, c2;
  Mat down, up;
};

// Zd = LN1(Z); Zh = Z + Attn(Zd); Zdd = LN2(Zh); Z' = MLP(Zdd) + s Adapter(Zdd)
inline Mat encoder_layer(const Mat& z, const LayerWeights& w, std::size_t heads, double s,
                         bool gelu_act = true, bool mlp_residual = false) {
  const Mat zd = layer_norm_rows(z, w.g1, w.b1);
  const Mat zh = add(z, multihead(zd, w.attn, heads));
  const Mat zdd = layer_norm_rows(zh, w.g2, w.b2);
  Mat hidden = plus_row(mm(zdd, w.w1), w.c1);
  hidden = gelu_act ? gelu(hidden) : relu(hidden);
  Mat out = plus_row(mm(hidden, w.w2), w.c2);
  out = add(out, scaled(adapter(zdd, w.down, w.up), s));
  if (mlp_residual) out = add(out, zh);
  return out;
}

// Plain softmax(Q K^T t) V over all M tokens, with Q = LN(Z Wq).
inline Mat full_self_attention(const Mat& z, const Mat& wq, const Mat& wk, const Mat& wv,
                               const std::vector<double>& g, const std::vector<double>& b,
                               double t) {
  const Mat q = layer_norm_rows(mm(z, wq), g, b);
  const Mat k = mm(z, wk), v = mm(z, wv);
  return mm(softmax_rows(scaled(mm(q, tr(k)), t)), v);
}

// Spatial branch with explicit token reducers.
inline Mat reduced_attention(const Mat& z, const Mat& wq, const Mat& wk, const Mat& wv,
                             const Mat& rk, const Mat& rv, const std::vector<double>& g,
                             const std::vector<double>& b, double t) {
  const Mat q = layer_norm_rows(mm(z, wq), g, b);
  const Mat kr = mm(rk, mm(z, wk)), vr = mm(rv, mm(z, wv));
  return mm(softmax_rows(scaled(mm(q, tr(kr)), t)), vr);
}

// A = softmax_rows(Q^T K t) over channels; out[m, j] = sum_i V[m, i] A[j, i].
inline Mat channel_attention(const Mat& z, const Mat& wq, const Mat& wk, const Mat& wv,
                             const std::vector<double>& gq, const std::vector<double>& bq,
                             const std::vector<double>& gk, const std::vector<double>& bk,
                             double t) {
  const Mat q = layer_norm_rows(mm(z, wq), gq, bq);
  const Mat k = layer_norm_rows(mm(z, wk), gk, bk);
  const Mat a = softmax_rows(scaled(mm(tr(q), k), t));
  const Mat v = mm(z, wv);
  Mat out(v.rows, v.cols);
  for (std::size_t m = 0; m < v.rows; ++m)
    for (std::size_t j = 0; j < v.cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < v.cols; ++i) s += v(m, i) * a(j, i);
      out(m, j) = s;
    }
  return out;
}

// ---- Volumes

// Direct convolution on channels-last [H, W, D, Cin] data; w is
// [kh, kw, kd, Cin, Cout].
inline std::vector<double> conv3d(const std::vector<double>& x, const std::array<std::size_t, 3>& d,
                                  std::size_t cin, const std::vector<double>& w,
                                  const std::array<std::size_t, 3>& k, std::size_t cout,
                                  const std::vector<double>& bias,
                                  const std::array<std::size_t, 3>& stride,
                                  const std::array<std::size_t, 3>& pad,
                                  std::array<std::size_t, 3>* out_dims = nullptr) {
  std::array<std::size_t, 3> o{};
  for (int a = 0; a < 3; ++a) o[a] = (d[a] + 2 * pad[a] - k[a]) / stride[a] + 1;
  if (out_dims) *out_dims = o;
  std::vector<double> y(o[0] * o[1] * o[2] * cout, 0.0);
  for (std::size_t i = 0; i < o[0]; ++i)
    for (std::size_t j = 0; j < o[1]; ++j)
      for (std::size_t l = 0; l < o[2]; ++l)
        for (std::size_t co = 0; co < cout; ++co) {
          double s = bias.empty() ? 0.0 : bias[co];
          for (std::size_t a = 0; a < k[0]; ++a)
            for (std::size_t b = 0; b < k[1]; ++b)
              for (std::size_t c = 0; c < k[2]; ++c) {
                const long h = long(i * stride[0] + a) - long(pad[0]);
                const long ww = long(j * stride[1] + b) - long(pad[1]);
                const long dd = long(l * stride[2] + c) - long(pad[2]);
                if (h < 0 || ww < 0 || dd < 0 || h >= long(d[0]) || ww >= long(d[1]) ||
                    dd >= long(d[2])) {
                  continue;
                }
                for (std::size_t ci = 0; ci < cin; ++ci) {
                  s += x[((h * d[1] + ww) * d[2] + dd) * cin + ci] *
                       w[(((a * k[1] + b) * k[2] + c) * cin + ci) * cout + co];
                }
              }
          y[((i * o[1] + j) * o[2] + l) * cout + co] = s;
        }
  return y;
}

// ---- Metrics

inline double dice(const deap::Mask& p, const deap::Mask& g) {
  std::size_t a = 0, b = 0, both = 0;
  for (std::size_t i = 0; i < p.data.size(); ++i) {
    a += p.data[i] ? 1 : 0;
    b += g.data[i] ? 1 : 0;
    both += (p.data[i] && g.data[i]) ? 1 : 0;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * double(both) / double(a + b);
}

using Voxel = std::array<long, 3>;

// Foreground voxels with at least one 6-neighbour that is background or
// outside the grid.
inline std::vector<Voxel> surface(const deap::Mask& m) {
  const long H = long(m.dims[0]), W = long(m.dims[1]), D = long(m.dims[2]);
  auto at = [&](long h, long w, long d) -> bool {
    if (h < 0 || w < 0 || d < 0 || h >= H || w >= W || d >= D) return false;
    return m.data[(h * W + w) * D + d] != 0;
  };
  std::vector<Voxel> out;
  const long nb[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  for (long h = 0; h < H; ++h)
    for (long w = 0; w < W; ++w)
      for (long d = 0; d < D; ++d) {
        if (!at(h, w, d)) continue;
        for (const auto& n : nb) {
          if (!at(h + n[0], w + n[1], d + n[2])) {
            out.push_back({h, w, d});
            break;
          }
        }
      }
  return out;
}

// All-pairs surface distances.
inline double nsd(const deap::Mask& p, const deap::Mask& g, double tau) {
  const auto sp = surface(p), sg = surface(g);
  if (sp.empty() && sg.empty()) return 1.0;
  const double tau2 = tau * tau;
  auto within = [&](const Voxel& v, const std::vector<Voxel>& other) {
    for (const auto& o : other) {
      const double d2 = double((v[0] - o[0]) * (v[0] - o[0]) + (v[1] - o[1]) * (v[1] - o[1]) +
                               (v[2] - o[2]) * (v[2] - o[2]));
      if (d2 <= tau2) return true;
    }
    return false;
  };
  std::size_t close = 0;
  for (const auto& v : sp) close += within(v, sg) ? 1 : 0;
  for (const auto& v : sg) close += within(v, sp) ? 1 : 0;
  return double(close) / double(sp.size() + sg.size());
}

// Squared distance to the nearest site, by exhaustive search.
inline std::vector<double> squared_distances(const std::vector<std::uint8_t>& sites,
                                             const std::array<std::size_t, 3>& dims) {
  std::vector<Voxel> s;
  const long H = long(dims[0]), W = long(dims[1]), D = long(dims[2]);
  for (long h = 0; h < H; ++h)
    for (long w = 0; w < W; ++w)
      for (long d = 0; d < D; ++d)
        if (sites[(h * W + w) * D + d]) s.push_back({h, w, d});
  std::vector<double> out(sites.size(), std::numeric_limits<double>::infinity());
  for (long h = 0; h < H; ++h)
    for (long w = 0; w < W; ++w)
      for (long d = 0; d < D; ++d) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& o : s) {
          best = std::min(best, double((h - o[0]) * (h - o[0]) + (w - o[1]) * (w - o[1]) +
                                       (d - o[2]) * (d - o[2])));
        }
        out[(h * W + w) * D + d] = best;
      }
  return out;
}

// Random blobby mask: a few boxes and balls, sometimes empty or full.
inline deap::Mask random_mask(std::mt19937_64& rng, const std::array<std::size_t, 3>& dims) {
  deap::Mask m;
  m.dims = dims;
  m.data.assign(dims[0] * dims[1] * dims[2], 0);
  const int kind = std::uniform_int_distribution<int>(0, 19)(rng);
  if (kind == 0) return m;
  if (kind == 1) {
    std::fill(m.data.begin(), m.data.end(), 1);
    return m;
  }
  if (kind == 2) {
    std::bernoulli_distribution coin(0.3);
    for (auto& v : m.data) v = coin(rng) ? 1 : 0;
    return m;
  }
  const int shapes = std::uniform_int_distribution<int>(1, 3)(rng);
  for (int s = 0; s < shapes; ++s) {
    std::array<double, 3> c{}, r{};
    for (int a = 0; a < 3; ++a) {
      c[a] = std::uniform_real_distribution<double>(0.0, double(dims[a]))(rng);
      r[a] = std::uniform_real_distribution<double>(0.8, 0.45 * double(dims[a]) + 1.0)(rng);
    }
    const bool ball = rng() % 2 == 0;
    for (std::size_t h = 0; h < dims[0]; ++h)
      for (std::size_t w = 0; w < dims[1]; ++w)
        for (std::size_t d = 0; d < dims[2]; ++d) {
          const double u = (double(h) - c[0]) / r[0], v = (double(w) - c[1]) / r[1],
                       x = (double(d) - c[2]) / r[2];
          const bool in = ball ? u * u + v * v + x * x <= 1.0
                               : std::abs(u) <= 1.0 && std::abs(v) <= 1.0 && std::abs(x) <= 1.0;
          if (in) m.data[(h * dims[1] + w) * dims[2] + d] = 1;
        }
  }
  return m;
}

// ---- Optimizer

struct AdamState {
  double m = 0.0, v = 0.0;
  std::uint64_t t = 0;
};

// One decoupled-weight-decay Adam step on a scalar.
inline double adamw_step(double theta, double g, AdamState& s, double lr, double b1, double b2,
                         double eps, double wd) {
  s.t += 1;
  theta -= lr * wd * theta;
  s.m = b1 * s.m + (1 - b1) * g;
  s.v = b2 * s.v + (1 - b2) * g * g;
  const double mhat = s.m / (1 - std::pow(b1, double(s.t)));
  const double vhat = s.v / (1 - std::pow(b2, double(s.t)));
  return theta - lr * mhat / (std::sqrt(vhat) + eps);
}

}  // namespace oracle

#endif  // DEAP_TESTS_ORACLES_HPP_
