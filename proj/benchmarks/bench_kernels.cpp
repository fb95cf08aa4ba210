// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "deap/ops.hpp"
#include "deap/prompter.hpp"

namespace {

using TF = deap::Tensor<float>;

TF random_tf(std::mt19937_64& rng, deap::Shape shape) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  std::vector<float> v(deap::shape_numel(shape));
  for (auto& x : v) x = n(rng);
  return TF::from_values(std::move(shape), std::move(v));
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  auto a = random_tf(rng, {n, n}), b = random_tf(rng, {n, n});
  deap::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(deap::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->RangeMultiplier(2)->Range(64, 512)->Unit(benchmark::kMicrosecond);

// Lowered (im2col + GEMM) against the naive loop nest, k3 s1 p1.
template <bool kDirect>
void BM_Conv3d(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const auto c = static_cast<std::size_t>(state.range(1));
  std::mt19937_64 rng(2);
  auto x = random_tf(rng, {s, s, s, c});
  auto w = random_tf(rng, {3, 3, 3, c, c});
  auto b = TF::zeros({c});
  deap::Conv3dOptions opt;
  opt.padding = {1, 1, 1};
  deap::NoGradGuard guard;
  for (auto _ : state) {
    if constexpr (kDirect) {
      benchmark::DoNotOptimize(deap::conv3d_direct(x, w, b, opt));
    } else {
      benchmark::DoNotOptimize(deap::conv3d(x, w, b, opt));
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<int64_t>(2 * s * s * s * 27 * c * c));
}
BENCHMARK(BM_Conv3d<false>)->Name("BM_Conv3d_im2col")->Args({16, 8})->Args({16, 16})->Args({32, 8})
    ->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3d<true>)->Name("BM_Conv3d_direct")->Args({16, 8})->Args({16, 16})->Args({32, 8})
    ->Unit(benchmark::kMillisecond);

deap::PrompterParams<float> prompter(std::size_t c, std::size_t m, deap::PrompterConfig& cfg,
                                     deap::ParameterStore<float>& store) {
  std::mt19937_64 rng(3);
  cfg.reduced_tokens = 64;
  return deap::add_prompter_params(store, "prompter", c, m, cfg, rng);
}

deap::Index3 grid_for(std::size_t m) {
  switch (m) {
    case 512: return {8, 8, 8};
    case 4096: return {16, 16, 16};
    default: return {32, 32, 32};
  }
}

// Fixed n = 64: time should grow linearly with the token count M.
void BM_SpatialAttention(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t c = 64;
  const auto g = grid_for(m);
  deap::PrompterConfig cfg;
  deap::ParameterStore<float> store;
  auto p = prompter(c, m, cfg, store);
  std::mt19937_64 rng(4);
  auto z = random_tf(rng, {g[0], g[1], g[2], c});
  deap::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(deap::spatial_attention(z, p, cfg));
  state.SetComplexityN(static_cast<int64_t>(m));
}
BENCHMARK(BM_SpatialAttention)->Arg(512)->Arg(4096)->Arg(32768)->Complexity(benchmark::oN)
    ->Unit(benchmark::kMillisecond);

void BM_DualPrompt(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const std::size_t c = 64;
  const auto g = grid_for(m);
  deap::PrompterConfig cfg;
  deap::ParameterStore<float> store;
  auto p = prompter(c, m, cfg, store);
  std::mt19937_64 rng(5);
  auto z = random_tf(rng, {g[0], g[1], g[2], c});
  deap::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(deap::dual_prompt(z, p, cfg));
  state.SetComplexityN(static_cast<int64_t>(m));
}
BENCHMARK(BM_DualPrompt)->Arg(512)->Arg(4096)->Arg(32768)->Complexity(benchmark::oN)
    ->Unit(benchmark::kMillisecond);

}  // namespace
