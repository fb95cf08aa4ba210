// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "deap/encoder.hpp"
#include "deap/gradcheck.hpp"
#include "deap/optim.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using deap::EncoderConfig;
using deap::ErrorCode;
using deap::Tensor;
using fixture::code_of;
using fixture::random_tensor;
using TD = Tensor<double>;

namespace {

// Every entry drawn from N(0, sd^2), gammas from N(1, sd^2).
void randomize(deap::ParameterStore<double>& store, std::mt19937_64& rng, double sd = 0.4) {
  std::normal_distribution<double> n(0.0, sd);
  for (const auto& e : store.entries()) {
    auto t = e.tensor;
    const bool gamma = e.name.find("gamma") != std::string::npos;
    for (auto& v : t.mutable_values()) v = (gamma ? 1.0 : 0.0) + n(rng);
  }
}

std::vector<double> v1(const TD& t) { return oracle::vec(t); }

oracle::LayerWeights weights_of(const deap::LayerParams<double>& p) {
  oracle::LayerWeights w;
  w.g1 = v1(p.norm1_gamma);
  w.b1 = v1(p.norm1_beta);
  w.g2 = v1(p.norm2_gamma);
  w.b2 = v1(p.norm2_beta);
  w.attn.wq = oracle::from_tensor(p.attn.wq);
  w.attn.wk = oracle::from_tensor(p.attn.wk);
  w.attn.wv = oracle::from_tensor(p.attn.wv);
  w.attn.wo = oracle::from_tensor(p.attn.wo);
  w.attn.bq = v1(p.attn.bq);
  w.attn.bk = v1(p.attn.bk);
  w.attn.bv = v1(p.attn.bv);
  w.attn.bo = v1(p.attn.bo);
  w.w1 = oracle::from_tensor(p.mlp_w1);
  w.w2 = oracle::from_tensor(p.mlp_w2);
  w.c1 = v1(p.mlp_b1);
  w.c2 = v1(p.mlp_b2);
  w.down = oracle::from_tensor(p.adapter.down);
  w.up = oracle::from_tensor(p.adapter.up);
  return w;
}

void zero_frozen_core(deap::ParameterStore<double>& store) {
  for (const auto& e : store.entries()) {
    if (e.name.find(".attn.") != std::string::npos || e.name.find(".mlp.") != std::string::npos) {
      auto t = e.tensor;
      for (auto& v : t.mutable_values()) v = 0.0;
    }
  }
}

struct Fixture {
  deap::ParameterStore<double> store;
  std::vector<deap::LayerParams<double>> layers;
  EncoderConfig cfg;
  Fixture(std::size_t c, std::size_t n_layers, std::size_t heads, std::size_t l, std::uint64_t seed,
          bool random = true) {
    cfg.layers = n_layers;
    cfg.heads = heads;
    cfg.adapter_dim = l;
    cfg.taps = {n_layers};
    std::mt19937_64 rng(seed);
    layers = deap::add_encoder_params(store, "encoder", c, cfg, rng);
    if (random) randomize(store, rng);
  }
};

}  // namespace

TEST_SUITE("encoder") {
  TEST_CASE("adapter matches the dense oracle") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 10; ++trial) {
      auto x = random_tensor(rng, {2, 3, 1, 4});
      deap::AdapterParams<double> p{random_tensor(rng, {4, 2}), random_tensor(rng, {2, 4})};
      auto y = deap::adapter_forward(x, p);
      CHECK(y.shape() == x.shape());
      const auto ref = oracle::adapter(oracle::from_tensor(x), oracle::from_tensor(p.down),
                                       oracle::from_tensor(p.up));
      CHECK(oracle::max_abs_diff(v1(y), ref.v) < 1e-12);
    }
  }

  TEST_CASE("adapter: zero down-projection, identity on nonnegatives, channel mismatch") {
    std::mt19937_64 rng(2);
    auto x = random_tensor(rng, {2, 2, 2, 6});
    deap::AdapterParams<double> zero{TD::zeros({6, 3}), random_tensor(rng, {3, 6})};
    const auto y0 = deap::adapter_forward(x, zero);
    for (double v : y0.values()) CHECK(v == 0.0);

    std::vector<double> eye(36, 0.0);
    for (int i = 0; i < 6; ++i) eye[i * 7] = 1.0;
    deap::AdapterParams<double> id{TD::from_values({6, 6}, eye), TD::from_values({6, 6}, eye)};
    auto pos = x;
    pos = TD::from_values(x.shape(), v1(x));
    for (auto& v : pos.mutable_values()) v = std::abs(v);
    CHECK(v1(deap::adapter_forward(pos, id)) == v1(pos));

    CHECK(code_of([&] { deap::adapter_forward(random_tensor(rng, {2, 5}), zero); }) ==
          ErrorCode::kShapeMismatch);
  }

  TEST_CASE("layer forward matches the step-by-step oracle") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 6; ++trial) {
      Fixture f(8, 1, 2, 2, 100 + trial);
      f.cfg.scale = 0.7;
      f.cfg.mlp_residual = trial % 2 == 1;
      f.cfg.mlp_activation = trial % 3 == 2 ? deap::Activation::kRelu : deap::Activation::kGelu;
      auto z = random_tensor(rng, {2, 2, 2, 8});
      auto y = deap::layer_forward(z, f.layers[0], f.cfg);
      const auto ref = oracle::encoder_layer(oracle::from_tensor(z), weights_of(f.layers[0]), 2, 0.7,
                                             f.cfg.mlp_activation == deap::Activation::kGelu,
                                             f.cfg.mlp_residual);
      CHECK(y.shape() == z.shape());
      CHECK(oracle::max_abs_diff(v1(y), ref.v) < 1e-9);
    }
  }

  TEST_CASE("s = 0 gives the adapter-free layer") {
    Fixture f(8, 1, 2, 2, 4);
    std::mt19937_64 rng(4);
    auto z = random_tensor(rng, {2, 2, 1, 8});
    f.cfg.scale = 0.0;
    auto y = deap::layer_forward(z, f.layers[0], f.cfg);
    auto w = weights_of(f.layers[0]);
    w.up = oracle::Mat(w.up.rows, w.up.cols);
    const auto ref = oracle::encoder_layer(oracle::from_tensor(z), w, 2, 1.0);
    CHECK(oracle::max_abs_diff(v1(y), ref.v) < 1e-9);
  }

  TEST_CASE("zero attention and MLP weights with s = 1 leave only Adapter(Norm(Z))") {
    Fixture f(8, 1, 2, 4, 5);
    zero_frozen_core(f.store);
    std::mt19937_64 rng(5);
    auto z = random_tensor(rng, {2, 2, 2, 8});
    f.cfg.scale = 1.0;
    auto y = deap::layer_forward(z, f.layers[0], f.cfg);
    const auto w = weights_of(f.layers[0]);
    const auto ref = oracle::adapter(oracle::layer_norm_rows(oracle::from_tensor(z), w.g2, w.b2),
                                     w.down, w.up);
    CHECK(oracle::max_abs_diff(v1(y), ref.v) < 1e-9);
  }

  TEST_CASE("outputs are affine in s: Z(2s) - Z(s) = s Adapter(Norm2(Zh))") {
    Fixture f(8, 1, 4, 3, 6);
    std::mt19937_64 rng(6);
    auto z = random_tensor(rng, {3, 2, 1, 8});
    for (double s : {0.3, 1.0, -2.0}) {
      f.cfg.scale = s;
      auto a = v1(deap::layer_forward(z, f.layers[0], f.cfg));
      f.cfg.scale = 2 * s;
      auto b = v1(deap::layer_forward(z, f.layers[0], f.cfg));
      const auto w = weights_of(f.layers[0]);
      const auto zm = oracle::from_tensor(z);
      const auto zh = oracle::add(zm, oracle::multihead(oracle::layer_norm_rows(zm, w.g1, w.b1), w.attn, 4));
      const auto ad = oracle::scaled(oracle::adapter(oracle::layer_norm_rows(zh, w.g2, w.b2), w.down, w.up), s);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = b[i] - a[i];
      CHECK(oracle::max_abs_diff(a, ad.v) < 1e-9);
    }
  }

  TEST_CASE("attention rows sum to one") {
    Fixture f(8, 1, 4, 2, 7);
    std::mt19937_64 rng(7);
    auto z = random_tensor(rng, {2, 3, 2, 8});
    std::vector<TD> weights;
    deap::self_attention(z, f.layers[0].attn, 4, &weights);
    REQUIRE(weights.size() == 4);
    for (const auto& a : weights) {
      REQUIRE(a.shape() == deap::Shape{12, 12});
      for (std::size_t r = 0; r < 12; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < 12; ++c) s += a.values()[r * 12 + c];
        CHECK(std::abs(s - 1.0) < 1e-12);
      }
    }
  }

  TEST_CASE("taps keep the input shape and sit at the configured layers") {
    Fixture f(8, 6, 2, 2, 8);
    f.cfg.taps = {2, 4, 6};
    std::mt19937_64 rng(8);
    auto z = random_tensor(rng, {2, 2, 2, 8});
    auto taps = deap::encode(z, f.layers, f.cfg);
    CHECK(taps.layers == std::vector<std::size_t>{2, 4, 6});
    for (const auto& m : taps.maps) CHECK(m.shape() == z.shape());
    CHECK(code_of([&] { taps.at(3); }) == ErrorCode::kInvalidArgument);
    auto short_layers = f.layers;
    short_layers.pop_back();
    CHECK(code_of([&] { deap::encode(z, short_layers, f.cfg); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("residual-only flow through a zeroed core") {
    Fixture f(8, 12, 2, 2, 9, false);
    zero_frozen_core(f.store);
    f.cfg.taps = {3, 6, 9, 12};
    f.cfg.scale = 0.0;
    std::mt19937_64 rng(9);
    auto z = random_tensor(rng, {2, 2, 2, 8});
    // With the stream carried past the MLP the input survives all 12 layers.
    f.cfg.mlp_residual = true;
    CHECK(v1(deap::encode(z, f.layers, f.cfg).at(12)) == v1(z));
    // The literal recurrence replaces the stream with MLP output, here zero.
    f.cfg.mlp_residual = false;
    const auto taps = deap::encode(z, f.layers, f.cfg);
    for (double v : taps.at(12).values()) CHECK(v == 0.0);
  }

  TEST_CASE("freeze policy: adapters get gradients, the core does not move") {
    Fixture f(8, 2, 2, 2, 10);
    f.cfg.taps = {2};
    deap::apply_freeze_policy(f.store);
    CHECK(f.store.trainable_count() < f.store.total_count());
    CHECK(f.store.trainable_count() == 2 * 2 * 8 * 2);
    std::mt19937_64 rng(10);
    auto z = random_tensor(rng, {2, 2, 1, 8});
    auto head = deap::reduce_sum(deap::mul(deap::encode(z, f.layers, f.cfg).at(2), random_tensor(rng, z.shape())));
    deap::backward(head);
    for (const auto& e : f.store.entries()) {
      if (e.name.find("adapter") != std::string::npos) {
        CHECK(e.tensor.has_grad());
        double norm = 0.0;
        for (double g : e.tensor.grad()) norm += g * g;
        CHECK(norm > 0.0);
      } else {
        CHECK(e.frozen);
        CHECK_FALSE(e.tensor.has_grad());
      }
    }
    // Force gradients onto frozen entries too; the optimizer must ignore them.
    std::vector<std::vector<double>> before;
    for (const auto& e : f.store.entries()) before.push_back(v1(e.tensor));
    for (const auto& e : f.store.entries()) {
      auto t = e.tensor;
      for (auto& g : t.mutable_grad()) g = 1.0;
    }
    deap::AdamW<double> opt(f.store, {});
    for (int i = 0; i < 3; ++i) REQUIRE(opt.step());
    for (std::size_t i = 0; i < before.size(); ++i) {
      const auto& e = f.store.entries()[i];
      if (e.frozen) {
        CHECK(v1(e.tensor) == before[i]);
      } else {
        CHECK(v1(e.tensor) != before[i]);
      }
    }
  }

  TEST_CASE("freeze policy rejects unknown names without touching flags") {
    Fixture f(8, 1, 2, 2, 11);
    f.store.add("mystery", {1}, {0.0});
    CHECK(code_of([&] { deap::apply_freeze_policy(f.store); }) == ErrorCode::kUnknownParameter);
    CHECK(f.store.trainable_count() == f.store.total_count());
    deap::ParameterStore<double> s2;
    s2.add("encoder.layer01.extra.w", {1}, {0.0});
    CHECK(code_of([&] { deap::apply_freeze_policy(s2); }) == ErrorCode::kUnknownParameter);
  }

  TEST_CASE("desk config: 2 C l = 2048 trainable adapter parameters per layer") {
    deap::ParameterStore<float> store;
    EncoderConfig cfg;
    std::mt19937_64 rng(12);
    deap::add_encoder_params(store, "encoder", 64, cfg, rng);
    deap::apply_freeze_policy(store);
    for (std::size_t l = 1; l <= 12; ++l) {
      char name[32];
      std::snprintf(name, sizeof(name), "encoder.layer%02zu.adapter.", l);
      CHECK(store.count_with_prefix(name) == 2048);
    }
    CHECK(store.trainable_count() == 12 * 2048);
  }

  TEST_CASE("config validation") {
    EncoderConfig cfg;
    CHECK(code_of([&] { deap::validate_encoder_config(cfg, 64); }) == std::nullopt);
    cfg.heads = 3;
    CHECK(code_of([&] { deap::validate_encoder_config(cfg, 64); }) == ErrorCode::kConfig);
    cfg = {};
    cfg.adapter_dim = 64;
    CHECK(code_of([&] { deap::validate_encoder_config(cfg, 64); }) == ErrorCode::kConfig);
    cfg = {};
    cfg.taps = {3, 13};
    CHECK(code_of([&] { deap::validate_encoder_config(cfg, 64); }) == ErrorCode::kConfig);
    cfg = {};
    cfg.scale = std::numeric_limits<double>::infinity();
    CHECK(code_of([&] { deap::validate_encoder_config(cfg, 64); }) == ErrorCode::kConfig);
    CHECK(code_of([] { deap::parse_activation("swish"); }) == ErrorCode::kConfig);
  }

  TEST_CASE("a non-finite intermediate names the failing sub-step") {
    Fixture f(8, 1, 2, 2, 13);
    auto t = f.layers[0].mlp_b1;
    for (auto& v : t.mutable_values()) v = 1e200;
    auto t2 = f.layers[0].mlp_w2;
    for (auto& v : t2.mutable_values()) v = 1e200;
    std::mt19937_64 rng(13);
    auto z = random_tensor(rng, {2, 2, 1, 8}, 10.0);
    try {
      deap::layer_forward(z, f.layers[0], f.cfg);
      FAIL("expected a non-finite error");
    } catch (const deap::Error& e) {
      CHECK(e.code() == ErrorCode::kNonFinite);
      CHECK(std::string(e.what()).find("mlp") != std::string::npos);
    }
  }

  TEST_CASE("two-layer miniature passes the gradient check") {
    Fixture f(4, 2, 2, 2, 14);
    f.cfg.taps = {2};
    std::mt19937_64 rng(14);
    auto z = random_tensor(rng, {2, 1, 1, 4});
    auto down = f.layers[1].adapter.down;
    auto fn = [&](const std::vector<TD>& in) {
      auto layers = f.layers;
      layers[0].adapter.up = in[1];
      return deap::encode(in[0], layers, f.cfg).at(2);
    };
    auto rep = deap::gradient_check(fn, {z, TD::from_values(f.layers[0].adapter.up.shape(), v1(f.layers[0].adapter.up))}, 1e-4);
    CHECK(rep.passed);
  }
}
