// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <fstream>
#include <random>

#include "deap/config.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using deap::ErrorCode;
using deap::RunConfig;
using fixture::code_of;

namespace {

RunConfig reparse(const std::string& text) {
  RunConfig c;
  deap::apply_config(c, deap::parse_config_text(text));
  return c;
}

RunConfig with(const std::string& key, const std::string& value) {
  return reparse(key + " = " + value + "\n");
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("echo of the defaults parses back to the same echo") {
    const RunConfig c;
    const auto text = deap::echo_config(c);
    CHECK(deap::echo_config(reparse(text)) == text);
    CHECK_NOTHROW(deap::validate_run_config(c));
    CHECK(text.find("train.lr = 2e-04\n") != std::string::npos);
    CHECK(text.find("encoder.taps = 3,6,9,12\n") != std::string::npos);
  }

  TEST_CASE("awkward reals survive the round trip bit for bit") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1e-9, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
      RunConfig c = fixture::tiny_config();
      c.train.optimizer.lr = u(rng);
      c.train.optimizer.weight_decay = u(rng) / 3.0;
      c.loss.smooth = u(rng) * 1e-5;
      c.eval.tau = u(rng) * 7.0;
      c.model.encoder.scale = 0.1 + 0.2;  // not 0.3
      c.train.seed = rng();
      const auto back = reparse(deap::echo_config(c));
      CHECK(std::bit_cast<std::uint64_t>(back.train.optimizer.lr) ==
            std::bit_cast<std::uint64_t>(c.train.optimizer.lr));
      CHECK(std::bit_cast<std::uint64_t>(back.train.optimizer.weight_decay) ==
            std::bit_cast<std::uint64_t>(c.train.optimizer.weight_decay));
      CHECK(std::bit_cast<std::uint64_t>(back.loss.smooth) == std::bit_cast<std::uint64_t>(c.loss.smooth));
      CHECK(std::bit_cast<std::uint64_t>(back.eval.tau) == std::bit_cast<std::uint64_t>(c.eval.tau));
      CHECK(back.model.encoder.scale == c.model.encoder.scale);
      CHECK(back.train.seed == c.train.seed);
      CHECK(deap::echo_config(back) == deap::echo_config(c));
    }
  }

  TEST_CASE("non-default enums, lists and flags round-trip") {
    RunConfig c = fixture::tiny_config();
    c.model.patch.mode = deap::PatchMode::kTrue3d;
    c.model.encoder.mlp_residual = true;
    c.model.decoder.no_image_branch = true;
    c.model.prompter.share_qk = true;
    c.train.precision = deap::Precision::kFloat64;
    c.train.flip = {0.5, 0.0, 0.25};
    const auto text = deap::echo_config(c);
    const auto back = reparse(text);
    CHECK(back.model.patch.mode == deap::PatchMode::kTrue3d);
    CHECK(back.model.encoder.mlp_residual);
    CHECK(back.model.decoder.no_image_branch);
    CHECK(back.model.prompter.share_qk);
    CHECK(back.train.precision == deap::Precision::kFloat64);
    CHECK(back.model.encoder.taps == std::vector<std::size_t>{2, 3});
    CHECK(back.model.volume == deap::Index3{16, 16, 16});
    CHECK(deap::echo_config(back) == text);
  }

  TEST_CASE("comments, blank lines and whitespace are tolerated") {
    const auto c = reparse("# header\n\n  train.epochs =  7  \r\n\tencoder.taps = 1, 2 ,3\n");
    CHECK(c.train.epochs == 7);
    CHECK(c.model.encoder.taps == std::vector<std::size_t>{1, 2, 3});
  }

  TEST_CASE("unknown keys, duplicates and malformed lines are config errors") {
    CHECK(code_of([] { with("train.learning_rate", "1e-3"); }) == ErrorCode::kConfig);
    CHECK(code_of([] { reparse("train.lr = 1e-3\ntrain.lr = 2e-3\n"); }) == ErrorCode::kConfig);
    CHECK(code_of([] { reparse("train.lr 1e-3\n"); }) == ErrorCode::kConfig);
    CHECK(code_of([] { reparse(" = 3\n"); }) == ErrorCode::kConfig);
    try {
      with("train.bogus", "1");
      FAIL("no throw");
    } catch (const deap::Error& e) {
      CHECK(std::string(e.what()).find("train.bogus") != std::string::npos);
    }
  }

  TEST_CASE("unparsable values name the key") {
    const std::vector<std::pair<std::string, std::string>> bad{
        {"train.lr", "fast"},          {"train.lr", "1e-3x"},      {"train.lr", "nan"},
        {"train.epochs", "-1"},        {"train.epochs", "2.5"},    {"encoder.mlp_residual", "yes"},
        {"model.volume", "32,32"},     {"encoder.taps", ""},       {"encoder.taps", "3,,6"},
        {"patch.mode", "2.5d"},        {"prompter.mode", "magic"}, {"train.precision", "f16"},
        {"encoder.mlp_activation", "tanh"}};
    for (const auto& [k, v] : bad) {
      CAPTURE(k);
      CAPTURE(v);
      try {
        with(k, v);
        FAIL("no throw");
      } catch (const deap::Error& e) {
        CHECK(e.code() == ErrorCode::kConfig);
        CHECK(std::string(e.what()).find(k) != std::string::npos);
      }
    }
  }

  TEST_CASE("validation rejects out-of-range fields") {
    auto invalid = [](auto mutate) {
      RunConfig c = fixture::tiny_config();
      mutate(c);
      return code_of([&] { deap::validate_run_config(c); });
    };
    CHECK_FALSE(invalid([](RunConfig&) {}).has_value());
    CHECK(invalid([](RunConfig& c) { c.train.epochs = 0; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.train.batch_size = 0; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.train.flip[1] = 1.5; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.eval.threshold = 1.0; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.eval.tau = -1.0; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.train.optimizer.lr = -1.0; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.loss.w_ce = -0.5; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.model.volume = {18, 16, 16}; }) == ErrorCode::kConfig);
    CHECK(invalid([](RunConfig& c) { c.model.encoder.taps = {2, 9}; }) == ErrorCode::kConfig);
  }

  TEST_CASE("config files: read, and missing file is an IO error") {
    fixture::TempDir dir("config");
    const auto path = dir.path() / "run.cfg";
    std::ofstream(path) << deap::echo_config(fixture::tiny_config());
    RunConfig c;
    deap::apply_config(c, deap::read_config_file(path));
    CHECK(deap::echo_config(c) == deap::echo_config(fixture::tiny_config()));
    CHECK(code_of([&] { deap::read_config_file(dir.path() / "absent.cfg"); }) == ErrorCode::kIo);
  }
}
