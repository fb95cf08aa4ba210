// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "deap/trainer.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using deap::Case;
using deap::ErrorCode;
using deap::RunConfig;
using deap::Trainer;
using fixture::code_of;

namespace {

std::vector<Case> phantoms(std::size_t n, std::uint64_t seed = 11) {
  return deap::synthesize_cases(n, seed, {16, 16, 16});
}

std::vector<double> run_steps(Trainer<float>& t, std::size_t n) {
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(t.step());
  return out;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("same seed gives bit-identical loss sequences") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 10;
    cfg.train.flip = {0.5, 0.5, 0.0};
    const auto cases = phantoms(4);
    Trainer<float> a(cfg, cases), b(cfg, cases);
    const auto la = run_steps(a, 20), lb = run_steps(b, 20);
    CHECK(la == lb);
    for (double l : la) CHECK(std::isfinite(l));

    cfg.train.seed = 1;
    Trainer<float> c(cfg, cases);
    CHECK(run_steps(c, 20) != la);
  }

  TEST_CASE("training reduces the loss on a small set") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 8;
    Trainer<float> t(cfg, phantoms(4));
    const auto r = t.run();
    REQUIRE_FALSE(r.aborted);
    REQUIRE(r.epochs.size() == 8);
    CHECK(r.step_losses.size() == 16);
    CHECK(r.epochs.back().train_loss < r.epochs.front().train_loss);
    CHECK(r.epochs.front().train_loss == doctest::Approx((r.step_losses[0] + r.step_losses[1]) / 2));
  }

  TEST_CASE("resume from a saved checkpoint replays the next steps bit for bit") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 20;
    cfg.train.flip = {0.3, 0.0, 0.3};
    cfg.train.batch_size = 2;
    const auto cases = phantoms(5);
    fixture::TempDir dir("resume");

    Trainer<float> whole(cfg, cases);
    run_steps(whole, 7);  // lands mid-epoch: three steps per epoch
    deap::save_checkpoint(whole.checkpoint(), dir.path() / "mid.ckpt");
    const auto tail = run_steps(whole, 12);

    Trainer<float> resumed(cfg, cases);
    resumed.resume(deap::load_checkpoint(dir.path() / "mid.ckpt"));
    CHECK(resumed.steps_done() == 7);
    CHECK(run_steps(resumed, 12) == tail);
    const auto& pa = whole.model().params().entries();
    const auto& pb = resumed.model().params().entries();
    for (std::size_t k = 0; k < pa.size(); ++k) {
      const auto va = pa[k].tensor.values(), vb = pb[k].tensor.values();
      CHECK(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
    }
  }

  TEST_CASE("resume refuses a checkpoint from a different model") {
    auto cfg = fixture::tiny_config();
    const auto cases = phantoms(2);
    Trainer<float> a(cfg, cases);
    auto other = cfg;
    other.train.optimizer.lr = 5e-4;
    Trainer<float> b(other, cases);
    CHECK(code_of([&] { b.resume(a.checkpoint()); }) == ErrorCode::kConfig);
    auto longer = cfg;
    longer.train.epochs = 9;
    Trainer<float> c(longer, cases);
    CHECK_NOTHROW(c.resume(a.checkpoint()));
  }

  TEST_CASE("a diverging run aborts and keeps the last good snapshot") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 6;
    cfg.train.optimizer.lr = 1e30;
    fixture::TempDir dir("abort");
    Trainer<float> t(cfg, phantoms(4));
    std::vector<std::string> lines;
    t.set_logger([&](const std::string& s) { lines.push_back(s); });
    const auto r = t.run(dir.path());
    REQUIRE(r.aborted);
    CHECK(r.abort_reason.find("non-finite") != std::string::npos);
    CHECK(r.epochs.size() < 6);
    CHECK(r.last.epoch == r.epochs.size());
    for (const auto& e : r.last.entries)
      for (float v : e.values) CHECK(std::isfinite(v));
    CHECK(std::filesystem::exists(dir.path() / "last.ckpt"));
    CHECK(deap::load_checkpoint(dir.path() / "last.ckpt").step == r.last.step);
    bool logged = false;
    for (const auto& l : lines) logged |= l.rfind("aborting", 0) == 0;
    CHECK(logged);
  }

  TEST_CASE("validation is logged and the best snapshot follows val dice") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 4;
    cfg.train.val_every = 2;
    Trainer<float> t(cfg, phantoms(4), phantoms(2, 99));
    const auto r = t.run();
    REQUIRE(r.epochs.size() == 4);
    CHECK_FALSE(r.epochs[0].validated);
    CHECK(r.epochs[1].validated);
    CHECK(r.epochs[3].validated);
    const double best = std::max(r.epochs[1].val_dice, r.epochs[3].val_dice);
    CHECK(r.best.best_metric == best);
    CHECK(r.best.best_epoch == (r.epochs[3].val_dice > r.epochs[1].val_dice ? 4u : 2u));
  }

  TEST_CASE("evaluate_case agrees with thresholding the probability map") {
    auto cfg = fixture::tiny_config();
    const auto cases = phantoms(2);
    Trainer<float> t(cfg, cases);
    run_steps(t, 2);
    for (const auto& c : cases) {
      const auto prob = t.predict_probabilities(c.volume);
      REQUIRE(prob.size() == c.mask.voxel_count());
      deap::Mask pred;
      pred.dims = c.mask.dims;
      for (float p : prob) pred.data.push_back(p >= 0.5f ? 1 : 0);
      const auto want = deap::evaluate_masks(pred, c.mask, 1.0);
      const auto got = t.evaluate_case(c);
      CHECK(got.dice == want.dice);
      CHECK(got.nsd == want.nsd);
    }
  }

  TEST_CASE("cross-validation: k = 2 on 6 cases, mean is the fold average") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 1;
    const auto cases = phantoms(6);
    const auto r = deap::crossvalidate(cfg, cases, 2);
    REQUIRE(r.folds.size() == 2);
    std::size_t held = 0;
    for (const auto& f : r.folds) {
      held += f.cases.size();
      const auto m = deap::mean_report(f.cases, cfg.eval.tau);
      CHECK(f.mean.dice == m.dice);
      CHECK(f.mean.nsd == m.nsd);
    }
    CHECK(held == 6);
    CHECK(r.mean.dice == doctest::Approx((r.folds[0].mean.dice + r.folds[1].mean.dice) / 2).epsilon(1e-15));
    CHECK(r.mean.nsd == doctest::Approx((r.folds[0].mean.nsd + r.folds[1].mean.nsd) / 2).epsilon(1e-15));
  }

  TEST_CASE("duplicated cases give identical per-fold metrics") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 1;
    const auto one = phantoms(1).front();
    std::vector<Case> dup;
    for (int i = 0; i < 6; ++i) dup.push_back({"dup" + std::to_string(i), one.volume, one.mask});
    const auto r = deap::crossvalidate(cfg, dup, 2);
    REQUIRE(r.folds.size() == 2);
    CHECK(r.folds[0].mean.dice == r.folds[1].mean.dice);
    CHECK(r.folds[0].mean.nsd == r.folds[1].mean.nsd);
    for (const auto& f : r.folds)
      for (const auto& c : f.cases) CHECK(c.report.dice == r.folds[0].cases[0].report.dice);
  }

  TEST_CASE("datasets round-trip through disk; ids select cases") {
    fixture::TempDir dir("ds");
    const auto cases = phantoms(3);
    deap::write_dataset(cases, dir.path());
    const auto back = deap::read_dataset(dir.path());
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].id == cases[i].id);
      CHECK(back[i].volume == cases[i].volume);
      CHECK(back[i].mask == cases[i].mask);
    }
    CHECK(cases[0].id == "case000");
    const auto sel = deap::select_cases(back, {"case002", "case000"});
    REQUIRE(sel.size() == 2);
    CHECK(sel[0].id == "case002");
    CHECK(code_of([&] { deap::select_cases(back, {"case009"}); }).has_value());
    CHECK(code_of([&] { deap::read_dataset(dir.path() / "missing"); }) == ErrorCode::kIo);
  }

  TEST_CASE("stepping past the last epoch is an error") {
    auto cfg = fixture::tiny_config();
    cfg.train.epochs = 1;
    Trainer<float> t(cfg, phantoms(2));
    t.step();
    CHECK(code_of([&] { t.step(); }) == ErrorCode::kInvalidArgument);
  }
}
