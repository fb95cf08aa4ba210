// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "deap/trainer.hpp"

namespace {

// Forward only, desk model on one 32^3 phantom.
void BM_ModelForward(benchmark::State& state) {
  deap::ModelConfig cfg;
  deap::Model<float> model(cfg, 1);
  const auto cases = deap::synthesize_cases(1, 1, cfg.volume);
  const auto x = deap::volume_to_tensor<float>(cases[0].volume);
  deap::NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

// One optimizer step (forward, backward, AdamW) with batch 2.
void BM_TrainStep(benchmark::State& state) {
  deap::RunConfig cfg;
  cfg.train.epochs = 1000000;
  deap::Trainer<float> trainer(cfg, deap::synthesize_cases(2, 2, cfg.model.volume));
  for (auto _ : state) benchmark::DoNotOptimize(trainer.step());
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
