// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Deterministic training and evaluation. Batch order and flips depend only
// on (train.seed, epoch, position), so a run resumed from a checkpoint
// replays the uninterrupted run exactly at a fixed thread count.

#ifndef DEAP_TRAINER_HPP_
#define DEAP_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deap/checkpoint.hpp"
#include "deap/config.hpp"
#include "deap/metrics.hpp"
#include "deap/model.hpp"
#include "deap/optim.hpp"
#include "deap/volume_io.hpp"

namespace deap {

struct Case {
  std::string id;
  Volume volume;
  Mask mask;
};

// Phantoms with ids case000, case001, ...; per-case seeds are drawn from
// mt19937_64(seed).
std::vector<Case> synthesize_cases(std::size_t count, std::uint64_t seed, const Index3& dims,
                                   std::size_t lesions = 1, double noise_sd = 0.02);

// <dir>/cases.txt lists ids; each case is <id>.vol plus <id>.mask.
void write_dataset(const std::vector<Case>& cases, const std::filesystem::path& dir);
std::vector<Case> read_dataset(const std::filesystem::path& dir);

std::vector<Case> select_cases(const std::vector<Case>& cases, const std::vector<std::string>& ids);

using Logger = std::function<void(const std::string&)>;

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  bool validated = false;
  double val_dice = 0.0;
  double val_nsd = 0.0;
};

struct CaseMetrics {
  std::string id;
  MetricReport report;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  // Batch losses computed by this trainer object, in order.
  std::vector<double> step_losses;
  bool aborted = false;
  std::string abort_reason;
  Checkpoint best;
  Checkpoint last;
};

template <typename T>
class Trainer {
 public:
  Trainer(const RunConfig& cfg, std::vector<Case> train, std::vector<Case> val = {});

  Model<T>& model() { return *model_; }
  AdamW<T>& optimizer() { return *opt_; }
  const RunConfig& config() const { return cfg_; }
  void set_logger(Logger logger) { log_ = std::move(logger); }

  std::size_t steps_per_epoch() const;
  std::uint64_t steps_done() const { return step_; }
  std::size_t epochs_done() const { return epoch_; }
  bool finished() const { return epoch_ >= cfg_.train.epochs; }

  // One optimizer step on the next batch; returns the batch mean loss.
  // Rolls over to the next epoch (without validation) when the current one
  // is exhausted.
  double step();

  // Finishes the current epoch, validates if due, updates the best
  // snapshot.
  EpochLog run_epoch();

  // Trains to completion. With `out_dir`, writes last.ckpt every epoch and
  // best.ckpt whenever validation improves. A non-finite loss stops the run
  // and leaves the last good snapshot in `last` (and on disk).
  TrainResult run(const std::filesystem::path& out_dir = {});

  Checkpoint checkpoint() const;
  void resume(const Checkpoint& ckpt);

  MetricReport evaluate_case(const Case& c) const;
  std::vector<CaseMetrics> evaluate(const std::vector<Case>& cases) const;
  // Probability map for one volume.
  std::vector<T> predict_probabilities(const Volume& v) const;

 private:
  std::vector<std::size_t> epoch_order(std::size_t epoch) const;
  Tensor<T> sample_input(const Case& c, std::size_t epoch, std::size_t slot, Tensor<T>& target) const;

  RunConfig cfg_;
  std::vector<Case> train_, val_;
  std::unique_ptr<Model<T>> model_;
  std::unique_ptr<AdamW<T>> opt_;
  Logger log_;
  std::uint64_t step_ = 0;
  std::size_t epoch_ = 0;     // completed epochs
  std::size_t position_ = 0;  // batches consumed in the current epoch
  double epoch_loss_sum_ = 0.0;
  // Every batch loss this object has computed, resumed runs included.
  std::vector<double> step_losses_;
  double best_metric_ = -1.0;
  std::size_t best_epoch_ = 0;
  Checkpoint best_;
};

struct FoldReport {
  std::size_t fold = 0;
  std::vector<CaseMetrics> cases;
  MetricReport mean;
};

struct CrossValReport {
  std::vector<FoldReport> folds;
  MetricReport mean;
};

// k models, each trained on the remaining folds and scored on its holdout.
// Dispatches on cfg.train.precision.
CrossValReport crossvalidate(const RunConfig& cfg, const std::vector<Case>& cases, std::size_t k,
                             const Logger& log = {});

MetricReport mean_report(const std::vector<CaseMetrics>& cases, double tau);

}  // namespace deap

#endif  // DEAP_TRAINER_HPP_
