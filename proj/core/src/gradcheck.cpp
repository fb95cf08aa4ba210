// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "deap/error.hpp"
#include "deap/ops.hpp"

namespace deap {
namespace {

double projected(const Tensor<double>& y, const std::vector<double>& weights) {
  double total = 0.0;
  const auto v = y.values();
  for (std::size_t i = 0; i < v.size(); ++i) total += v[i] * weights[i];
  return total;
}

}  // namespace

GradCheckReport gradient_check(const MultiTensorFn& f, const std::vector<Tensor<double>>& inputs,
                               double tolerance, const GradCheckOptions& options) {
  require(tolerance > 0.0, ErrorCode::kInvalidArgument, "gradient_check: tolerance must be > 0");
  std::vector<Tensor<double>> leaves;
  leaves.reserve(inputs.size());
  for (const auto& in : inputs) {
    require(in.defined(), ErrorCode::kInvalidArgument, "gradient_check: undefined input");
    for (double v : in.values()) {
      require(std::isfinite(v), ErrorCode::kNonFinite, "gradient_check: non-finite input");
    }
    leaves.push_back(Tensor<double>::from_values(
        in.shape(), std::vector<double>(in.values().begin(), in.values().end()), true));
  }

  Tensor<double> first, second;
  {
    NoGradGuard guard;
    first = f(leaves);
    second = f(leaves);
  }
  const auto a = first.values();
  const auto b = second.values();
  require(first.shape() == second.shape() && std::equal(a.begin(), a.end(), b.begin()),
          ErrorCode::kNonDeterministic, "gradient_check: function is not deterministic");

  std::mt19937_64 rng(options.projection_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> weights(first.numel());
  for (auto& w : weights) w = normal(rng);

  // Analytic side.
  auto y = f(leaves);
  auto loss = reduce_sum(mul(y, Tensor<double>::from_values(y.shape(), weights)));
  backward(loss);

  GradCheckReport report;
  report.tolerance = tolerance;
  const double h = options.step;
  const double base = projected(first, weights);
  std::vector<std::vector<double>> numeric(leaves.size());
  std::vector<std::vector<bool>> skip(leaves.size());
  double scale = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    auto values = leaves[i].mutable_values();
    numeric[i].assign(values.size(), 0.0);
    skip[i].assign(values.size(), false);
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double saved = values[j];
      double plus, minus;
      {
        NoGradGuard guard;
        values[j] = saved + h;
        plus = projected(f(leaves), weights);
        values[j] = saved - h;
        minus = projected(f(leaves), weights);
      }
      values[j] = saved;
      const double central = (plus - minus) / (2.0 * h);
      const double right = (plus - base) / h;
      const double left = (base - minus) / h;
      numeric[i][j] = central;
      if (std::abs(right - left) > 100.0 * h * std::max(1.0, std::abs(central))) {
        skip[i][j] = true;
        report.kinks.push_back({i, j});
        continue;
      }
      scale = std::max(scale, std::abs(central));
      const double analytic = leaves[i].has_grad() ? leaves[i].grad()[j] : 0.0;
      scale = std::max(scale, std::abs(analytic));
      ++report.coordinates;
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    for (std::size_t j = 0; j < numeric[i].size(); ++j) {
      if (skip[i][j]) continue;
      const double analytic = leaves[i].has_grad() ? leaves[i].grad()[j] : 0.0;
      worst = std::max(worst, std::abs(analytic - numeric[i][j]));
    }
  }
  report.max_rel_error = scale > 0.0 ? worst / scale : worst;
  report.passed = report.max_rel_error <= tolerance;
  return report;
}

GradCheckReport gradient_check(const std::function<Tensor<double>(const Tensor<double>&)>& f,
                               const Tensor<double>& x, double tolerance,
                               const GradCheckOptions& options) {
  return gradient_check([&f](const std::vector<Tensor<double>>& in) { return f(in[0]); },
                        std::vector<Tensor<double>>{x}, tolerance, options);
}

}  // namespace deap
