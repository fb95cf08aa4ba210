// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include "deap/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "deap/error.hpp"
#include "deap/patch_embed.hpp"

namespace deap {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename V>
void flip_axis(std::vector<V>& data, const Index3& dims, std::size_t channels, int axis) {
  const auto [nh, nw, nd] = dims;
  std::vector<V> out(data.size());
  for (std::size_t h = 0; h < nh; ++h)
    for (std::size_t w = 0; w < nw; ++w)
      for (std::size_t d = 0; d < nd; ++d) {
        std::size_t sh = h, sw = w, sd = d;
        if (axis == 0) sh = nh - 1 - h;
        if (axis == 1) sw = nw - 1 - w;
        if (axis == 2) sd = nd - 1 - d;
        for (std::size_t c = 0; c < channels; ++c) {
          out[((h * nw + w) * nd + d) * channels + c] = data[((sh * nw + sw) * nd + sd) * channels + c];
        }
      }
  data = std::move(out);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

std::vector<Case> synthesize_cases(std::size_t count, std::uint64_t seed, const Index3& dims,
                                   std::size_t lesions, double noise_sd) {
  std::mt19937_64 rng(seed);
  std::vector<Case> out;
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t case_seed = rng();
    Phantom p = generate_phantom(case_seed, dims, lesions, noise_sd);
    char id[32];
    std::snprintf(id, sizeof(id), "case%03zu", i);
    out.push_back({id, std::move(p.volume), std::move(p.mask)});
  }
  return out;
}

void write_dataset(const std::vector<Case>& cases, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream index(dir / "cases.txt");
  require(index.good(), ErrorCode::kIo, "cannot write " + (dir / "cases.txt").string());
  for (const auto& c : cases) {
    write_volume(c.volume, dir / (c.id + ".vol"));
    write_mask(c.mask, dir / (c.id + ".mask"));
    index << c.id << '\n';
  }
}

std::vector<Case> read_dataset(const std::filesystem::path& dir) {
  std::ifstream index(dir / "cases.txt");
  require(index.good(), ErrorCode::kIo, "cannot read " + (dir / "cases.txt").string());
  std::vector<Case> out;
  std::string id;
  while (std::getline(index, id)) {
    if (id.empty()) continue;
    Case c{id, read_volume(dir / (id + ".vol")), read_mask(dir / (id + ".mask"))};
    require(c.volume.dims == c.mask.dims, ErrorCode::kShapeMismatch,
            "case " + id + ": volume and mask dims differ");
    out.push_back(std::move(c));
  }
  require(!out.empty(), ErrorCode::kIo, "no cases listed in " + (dir / "cases.txt").string());
  return out;
}

std::vector<Case> select_cases(const std::vector<Case>& cases, const std::vector<std::string>& ids) {
  std::vector<Case> out;
  for (const auto& id : ids) {
    bool found = false;
    for (const auto& c : cases) {
      if (c.id == id) {
        out.push_back(c);
        found = true;
        break;
      }
    }
    require(found, ErrorCode::kInvalidArgument, "unknown case id " + id);
  }
  return out;
}

MetricReport mean_report(const std::vector<CaseMetrics>& cases, double tau) {
  MetricReport r;
  r.tau = tau;
  if (cases.empty()) return r;
  for (const auto& c : cases) {
    r.dice += c.report.dice;
    r.nsd += c.report.nsd;
  }
  r.dice /= static_cast<double>(cases.size());
  r.nsd /= static_cast<double>(cases.size());
  return r;
}

template <typename T>
Trainer<T>::Trainer(const RunConfig& cfg, std::vector<Case> train, std::vector<Case> val)
    : cfg_(cfg), train_(std::move(train)), val_(std::move(val)) {
  validate_run_config(cfg_);
  require(!train_.empty(), ErrorCode::kInvalidArgument, "no training cases");
  for (const auto* set : {&train_, &val_}) {
    for (const auto& c : *set) {
      require(c.volume.dims == cfg_.model.volume && c.volume.channels == cfg_.model.in_channels &&
                  c.mask.dims == c.volume.dims,
              ErrorCode::kShapeMismatch,
              "case " + c.id + " does not match model.volume / model.in_channels");
    }
  }
  model_ = std::make_unique<Model<T>>(cfg_.model, cfg_.train.seed);
  opt_ = std::make_unique<AdamW<T>>(model_->params(), cfg_.train.optimizer);
  best_ = checkpoint();
}

template <typename T>
std::size_t Trainer<T>::steps_per_epoch() const {
  return (train_.size() + cfg_.train.batch_size - 1) / cfg_.train.batch_size;
}

template <typename T>
std::vector<std::size_t> Trainer<T>::epoch_order(std::size_t epoch) const {
  std::vector<std::size_t> order(train_.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(mix(cfg_.train.seed, epoch));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

template <typename T>
Tensor<T> Trainer<T>::sample_input(const Case& c, std::size_t epoch, std::size_t slot,
                                   Tensor<T>& target) const {
  std::vector<float> vol = c.volume.data;
  std::vector<std::uint8_t> lab = c.mask.data;
  const auto& flip = cfg_.train.flip;
  if (flip[0] > 0 || flip[1] > 0 || flip[2] > 0) {
    std::mt19937_64 rng(mix(mix(cfg_.train.seed ^ 0xF11DULL, epoch), slot));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int a = 0; a < 3; ++a) {
      if (u(rng) < flip[a]) {
        flip_axis(vol, c.volume.dims, c.volume.channels, a);
        flip_axis(lab, c.mask.dims, 1, a);
      }
    }
  }
  const auto& d = c.volume.dims;
  target = Tensor<T>::from_values({d[0], d[1], d[2], 1}, std::vector<T>(lab.begin(), lab.end()));
  return Tensor<T>::from_values({d[0], d[1], d[2], c.volume.channels},
                                std::vector<T>(vol.begin(), vol.end()));
}

template <typename T>
double Trainer<T>::step() {
  require(!finished(), ErrorCode::kInvalidArgument, "training already finished");
  if (position_ >= steps_per_epoch()) {
    ++epoch_;
    position_ = 0;
    epoch_loss_sum_ = 0.0;
    require(!finished(), ErrorCode::kInvalidArgument, "training already finished");
  }
  const auto order = epoch_order(epoch_);
  const std::size_t begin = position_ * cfg_.train.batch_size;
  const std::size_t end = std::min(begin + cfg_.train.batch_size, train_.size());
  const T inv = T(1) / static_cast<T>(end - begin);
  model_->params().zero_grad();
  double loss_sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    Tensor<T> target;
    Tensor<T> x = sample_input(train_[order[i]], epoch_, i, target);
    Tensor<T> loss = combined_loss(model_->forward(x), target, cfg_.loss);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      fail(ErrorCode::kNonFinite, "non-finite loss at step " + std::to_string(step_ + 1));
    }
    backward(scale(loss, inv));
    loss_sum += value;
  }
  if (!opt_->step() && log_) log_("warning: " + opt_->last_incident());
  const double mean = loss_sum / static_cast<double>(end - begin);
  ++step_;
  ++position_;
  epoch_loss_sum_ += mean;
  step_losses_.push_back(mean);
  return mean;
}

template <typename T>
EpochLog Trainer<T>::run_epoch() {
  require(!finished(), ErrorCode::kInvalidArgument, "training already finished");
  const std::size_t spe = steps_per_epoch();
  if (position_ >= spe) {
    ++epoch_;
    position_ = 0;
    epoch_loss_sum_ = 0.0;
  }
  while (position_ < spe) step();
  EpochLog log;
  log.epoch = epoch_ + 1;
  log.train_loss = epoch_loss_sum_ / static_cast<double>(spe);
  const std::size_t every = cfg_.train.val_every;
  const bool last = epoch_ + 1 == cfg_.train.epochs;
  if (!val_.empty() && every > 0 && ((epoch_ + 1) % every == 0 || last)) {
    const auto report = mean_report(evaluate(val_), cfg_.eval.tau);
    log.validated = true;
    log.val_dice = report.dice;
    log.val_nsd = report.nsd;
  }
  ++epoch_;
  position_ = 0;
  epoch_loss_sum_ = 0.0;
  if (val_.empty()) {
    best_ = checkpoint();
  } else if (log.validated && log.val_dice > best_metric_) {
    best_metric_ = log.val_dice;
    best_epoch_ = log.epoch;
    best_ = checkpoint();
  }
  return log;
}

template <typename T>
TrainResult Trainer<T>::run(const std::filesystem::path& out_dir) {
  TrainResult result;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  Checkpoint last_good = checkpoint();
  while (!finished()) {
    const double best_before = best_metric_;
    try {
      EpochLog log = run_epoch();
      result.epochs.push_back(log);
      std::string line = "epoch " + std::to_string(log.epoch) + "/" +
                         std::to_string(cfg_.train.epochs) + " loss " + fmt("%.6f", log.train_loss);
      if (log.validated) {
        line += " val_dice " + fmt("%.4f", log.val_dice) + " val_nsd " + fmt("%.4f", log.val_nsd);
      }
      if (log_) log_(line);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kNonFinite) throw;
      result.aborted = true;
      result.abort_reason = e.what();
      if (log_) log_(std::string("aborting: ") + e.what());
      break;
    }
    last_good = checkpoint();
    if (!out_dir.empty()) {
      save_checkpoint(last_good, out_dir / "last.ckpt");
      if (best_metric_ > best_before || val_.empty()) save_checkpoint(best_, out_dir / "best.ckpt");
    }
  }
  result.last = last_good;
  result.best = best_;
  result.step_losses = step_losses_;
  if (result.aborted && !out_dir.empty()) save_checkpoint(last_good, out_dir / "last.ckpt");
  return result;
}

template <typename T>
Checkpoint Trainer<T>::checkpoint() const {
  Checkpoint c;
  c.config = echo_config(cfg_);
  c.step = step_;
  c.epoch = epoch_;
  c.position = position_;
  c.optimizer_steps = opt_->steps();
  c.best_metric = best_metric_;
  c.best_epoch = best_epoch_;
  c.epoch_loss_sum = epoch_loss_sum_;
  c.entries = capture_entries(model_->params(), *opt_);
  return c;
}

template <typename T>
void Trainer<T>::resume(const Checkpoint& ckpt) {
  RunConfig saved;
  apply_config(saved, parse_config_text(ckpt.config));
  // Epoch budget and evaluation settings may differ; nothing else may.
  saved.train.epochs = cfg_.train.epochs;
  saved.eval = cfg_.eval;
  require(echo_config(saved) == echo_config(cfg_), ErrorCode::kConfig,
          "checkpoint was written by a different configuration");
  restore_entries(ckpt.entries, model_->params(), *opt_);
  opt_->set_steps(ckpt.optimizer_steps);
  step_ = ckpt.step;
  epoch_ = ckpt.epoch;
  position_ = ckpt.position;
  epoch_loss_sum_ = ckpt.epoch_loss_sum;
  best_metric_ = ckpt.best_metric;
  best_epoch_ = ckpt.best_epoch;
}

template <typename T>
std::vector<T> Trainer<T>::predict_probabilities(const Volume& v) const {
  NoGradGuard guard;
  Tensor<T> prob = model_->forward(volume_to_tensor<T>(v));
  return {prob.values().begin(), prob.values().end()};
}

template <typename T>
MetricReport Trainer<T>::evaluate_case(const Case& c) const {
  const auto prob = predict_probabilities(c.volume);
  const Mask pred = threshold_mask(std::span<const T>(prob), c.volume.dims, cfg_.eval.threshold);
  return evaluate_masks(pred, c.mask, cfg_.eval.tau);
}

template <typename T>
std::vector<CaseMetrics> Trainer<T>::evaluate(const std::vector<Case>& cases) const {
  std::vector<CaseMetrics> out;
  for (const auto& c : cases) out.push_back({c.id, evaluate_case(c)});
  return out;
}

template class Trainer<float>;
template class Trainer<double>;

namespace {

template <typename T>
CrossValReport crossvalidate_impl(const RunConfig& cfg, const std::vector<Case>& cases,
                                  std::size_t k, const Logger& log) {
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.id);
  const auto folds = kfold(ids, k, cfg.train.seed);
  CrossValReport report;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (log) log("fold " + std::to_string(f + 1) + "/" + std::to_string(k));
    Trainer<T> trainer(cfg, select_cases(cases, folds[f].train));
    trainer.set_logger(log);
    const auto result = trainer.run();
    require(!result.aborted, ErrorCode::kNonFinite,
            "fold " + std::to_string(f + 1) + ": " + result.abort_reason);
    FoldReport fr;
    fr.fold = f + 1;
    fr.cases = trainer.evaluate(select_cases(cases, folds[f].holdout));
    fr.mean = mean_report(fr.cases, cfg.eval.tau);
    report.folds.push_back(std::move(fr));
  }
  report.mean.tau = cfg.eval.tau;
  for (const auto& fr : report.folds) {
    report.mean.dice += fr.mean.dice;
    report.mean.nsd += fr.mean.nsd;
  }
  report.mean.dice /= static_cast<double>(report.folds.size());
  report.mean.nsd /= static_cast<double>(report.folds.size());
  return report;
}

}  // namespace

CrossValReport crossvalidate(const RunConfig& cfg, const std::vector<Case>& cases, std::size_t k,
                             const Logger& log) {
  return cfg.train.precision == Precision::kFloat32 ? crossvalidate_impl<float>(cfg, cases, k, log)
                                                    : crossvalidate_impl<double>(cfg, cases, k, log);
}

}  // namespace deap
