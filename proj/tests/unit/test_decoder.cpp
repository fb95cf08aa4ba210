// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <random>

#include "deap/decoder.hpp"
#include "deap/gradcheck.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using deap::DecoderConfig;
using deap::ErrorCode;
using deap::Tensor;
using fixture::code_of;
using fixture::random_tensor;
using TD = Tensor<double>;

namespace {

std::vector<double> v1(const TD& t) { return oracle::vec(t); }

void fill(TD t, double value) {
  for (auto& v : t.mutable_values()) v = value;
}

struct Fixture {
  deap::ParameterStore<double> store;
  deap::DecoderParams<double> p;
  deap::Index3 volume, grid;
  std::size_t c;
  Fixture(const deap::Index3& vol, const deap::Index3& g, std::size_t embed, std::size_t taps,
          DecoderConfig cfg = {}, std::uint64_t seed = 1)
      : volume(vol), grid(g), c(embed) {
    cfg.head_channels = 4;
    cfg.smooth_channels = 2;
    std::mt19937_64 rng(seed);
    p = deap::add_decoder_params(store, "decoder", cfg, vol, 1, g, embed, taps, rng);
  }
};

}  // namespace

TEST_SUITE("decoder") {
  TEST_CASE("enhancer output is (2H, 2W, 2D, C') for an 8^3 grid") {
    std::mt19937_64 rng(1);
    deap::ParameterStore<float> store;
    DecoderConfig cfg;
    auto p = deap::add_decoder_params(store, "decoder", cfg, {32, 32, 32}, 1, {8, 8, 8}, 64, 4, rng);
    CHECK(p.width == 16);
    CHECK(deap::decoder_width(cfg, 64) == 16);
    auto vol = Tensor<float>::full({32, 32, 32, 1}, 0.5f);
    auto img = deap::image_branch(vol, p.image_branches[0]);
    CHECK(img.shape() == deap::Shape{16, 16, 16, 16});
    auto tap = Tensor<float>::full({8, 8, 8, 64}, 0.1f);
    auto e = deap::original_feature_enhancer(tap, img, p.enhancers[0]);
    CHECK(e.shape() == deap::Shape{16, 16, 16, 16});
  }

  TEST_CASE("decode returns a probability field at input resolution") {
    std::mt19937_64 rng(2);
    Fixture f({8, 8, 4}, {2, 2, 1}, 8, 2);
    deap::EncoderTaps<double> taps;
    taps.layers = {1, 2};
    taps.maps = {random_tensor(rng, {2, 2, 1, 8}, 3.0), random_tensor(rng, {2, 2, 1, 8}, 3.0)};
    auto vol = random_tensor(rng, {8, 8, 4, 1});
    auto y = deap::decode(taps, vol, f.p);
    CHECK(y.shape() == deap::Shape{8, 8, 4, 1});
    for (double v : y.values()) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    taps.maps.pop_back();
    taps.layers.pop_back();
    CHECK(code_of([&] { deap::decode(taps, vol, f.p); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("zero projection weights and bias give 0.5 everywhere") {
    std::mt19937_64 rng(3);
    Fixture f({8, 8, 8}, {2, 2, 2}, 8, 2);
    fill(f.p.predict.proj_w, 0.0);
    fill(f.p.predict.proj_b, 0.0);
    std::vector<TD> enh{random_tensor(rng, {4, 4, 4, 2}), random_tensor(rng, {4, 4, 4, 2})};
    const auto y = deap::predict(enh, f.p.predict, f.volume);
    CHECK(y.shape() == deap::Shape{8, 8, 8, 1});
    for (double v : y.values()) CHECK(v == 0.5);
  }

  TEST_CASE("zeroed image branch leaves the enhancer depending on the tap only") {
    std::mt19937_64 rng(4);
    Fixture f({8, 8, 8}, {2, 2, 2}, 8, 1);
    for (const auto& w : f.p.image_branches[0].stage_w) fill(w, 0.0);
    fill(f.p.image_branches[0].block.w1, 0.0);
    fill(f.p.image_branches[0].block.w2, 0.0);
    auto tap = random_tensor(rng, {2, 2, 2, 8});
    const auto& ib = f.p.image_branches[0];
    auto e1 = deap::original_feature_enhancer(tap, deap::image_branch(random_tensor(rng, {8, 8, 8, 1}), ib),
                                              f.p.enhancers[0]);
    auto e2 = deap::original_feature_enhancer(tap, deap::image_branch(random_tensor(rng, {8, 8, 8, 1}), ib),
                                              f.p.enhancers[0]);
    auto e3 = deap::original_feature_enhancer(tap, TD(), f.p.enhancers[0]);
    CHECK(v1(e1) == v1(e2));
    CHECK(v1(e1) == v1(e3));
  }

  TEST_CASE("the live image branch does change the enhancer") {
    std::mt19937_64 rng(5);
    Fixture f({8, 8, 8}, {2, 2, 2}, 8, 1);
    auto tap = random_tensor(rng, {2, 2, 2, 8});
    const auto& ib = f.p.image_branches[0];
    auto e1 = deap::original_feature_enhancer(tap, deap::image_branch(random_tensor(rng, {8, 8, 8, 1}), ib),
                                              f.p.enhancers[0]);
    auto e2 = deap::original_feature_enhancer(tap, deap::image_branch(random_tensor(rng, {8, 8, 8, 1}), ib),
                                              f.p.enhancers[0]);
    CHECK(oracle::max_abs_diff(v1(e1), v1(e2)) > 1e-3);
  }

  TEST_CASE("zero tap and zero volume give a zero enhancer output") {
    Fixture f({8, 8, 8}, {2, 2, 2}, 8, 1);
    auto img = deap::image_branch(TD::zeros({8, 8, 8, 1}), f.p.image_branches[0]);
    const auto e = deap::original_feature_enhancer(TD::zeros({2, 2, 2, 8}), img, f.p.enhancers[0]);
    for (double v : e.values()) CHECK(v == 0.0);
  }

  TEST_CASE("permuting enhancer order with the head weights leaves Y unchanged") {
    std::mt19937_64 rng(6);
    Fixture f({8, 8, 8}, {2, 2, 2}, 8, 3);
    const std::size_t w = f.p.width;
    std::vector<TD> enh;
    for (int j = 0; j < 3; ++j) enh.push_back(random_tensor(rng, {4, 4, 4, w}));
    auto y = v1(deap::predict(enh, f.p.predict, f.volume));

    const std::vector<std::size_t> perm{2, 0, 1};
    std::vector<TD> shuffled;
    for (auto j : perm) shuffled.push_back(enh[j]);
    // head.w1 is [3, 3, 3, 3w, head]; permute its input-channel blocks.
    auto w1 = f.p.predict.head.w1;
    const std::size_t head = w1.dim(4), cin = w1.dim(3);
    const auto old = v1(w1);
    std::vector<double> neu(old.size());
    for (std::size_t tap = 0; tap < 27; ++tap)
      for (std::size_t b = 0; b < 3; ++b)
        for (std::size_t k = 0; k < w; ++k)
          for (std::size_t o = 0; o < head; ++o)
            neu[(tap * cin + b * w + k) * head + o] = old[(tap * cin + perm[b] * w + k) * head + o];
    auto pp = f.p.predict;
    pp.head.w1 = TD::from_values(w1.shape(), neu);
    auto y2 = v1(deap::predict(shuffled, pp, f.volume));
    CHECK(oracle::max_abs_diff(y, y2) < 1e-12);
  }

  TEST_CASE("stride plans and their rejections") {
    using S = std::vector<deap::Index3>;
    CHECK(deap::image_branch_strides({32, 32, 32}, {8, 8, 8}) == S{{2, 2, 2}});
    CHECK(deap::image_branch_strides({32, 32, 32}, {16, 16, 16}).empty());
    CHECK(deap::image_branch_strides({64, 32, 16}, {8, 8, 8}) == S{{2, 2, 1}, {2, 1, 1}});
    CHECK(code_of([] { deap::image_branch_strides({24, 24, 24}, {8, 8, 8}); }) == ErrorCode::kConfig);
    CHECK(code_of([] { deap::image_branch_strides({48, 48, 48}, {8, 8, 8}); }) == ErrorCode::kConfig);
    CHECK(code_of([] { deap::image_branch_strides({30, 32, 32}, {8, 8, 8}); }) == ErrorCode::kConfig);
    CHECK(code_of([] { deap::image_branch_strides({8, 8, 8}, {8, 8, 8}); }) == ErrorCode::kConfig);
  }

  TEST_CASE("predict rejects mismatched enhancer shapes") {
    std::mt19937_64 rng(7);
    Fixture f({8, 8, 8}, {2, 2, 2}, 8, 2);
    std::vector<TD> enh{random_tensor(rng, {4, 4, 4, 2}), random_tensor(rng, {4, 4, 2, 2})};
    CHECK(code_of([&] { deap::predict(enh, f.p.predict, f.volume); }) == ErrorCode::kShapeMismatch);
    CHECK(code_of([&] { deap::predict({}, f.p.predict, f.volume); }) == ErrorCode::kInvalidArgument);
  }

  TEST_CASE("ablation and sharing flags change the registered parameters") {
    DecoderConfig none;
    none.no_image_branch = true;
    Fixture a({16, 16, 16}, {4, 4, 4}, 8, 4, none);
    CHECK(a.p.image_branches.empty());
    for (const auto& e : a.p.enhancers) CHECK(e.image_branch == -1);
    for (const auto& e : a.store.entries()) CHECK(e.name.find("image") == std::string::npos);

    DecoderConfig shared;
    shared.share_image_branch = true;
    Fixture b({16, 16, 16}, {4, 4, 4}, 8, 4, shared);
    CHECK(b.p.image_branches.size() == 1);
    Fixture c({16, 16, 16}, {4, 4, 4}, 8, 4);
    CHECK(c.p.image_branches.size() == 4);
    CHECK(c.store.total_count() - b.store.total_count() == 3 * (b.store.total_count() - a.store.total_count()));
  }

  TEST_CASE("enhancer plus predict miniature passes the gradient check") {
    std::mt19937_64 rng(8);
    Fixture f({4, 4, 4}, {1, 1, 1}, 8, 1, {}, 8);
    auto tap = random_tensor(rng, {1, 1, 1, 8});
    auto vol = random_tensor(rng, {4, 4, 4, 1});
    auto fn = [&](const std::vector<TD>& in) {
      auto ib = f.p.image_branches[0];
      auto img = deap::image_branch(in[1], ib);
      auto e = deap::original_feature_enhancer(in[0], img, f.p.enhancers[0]);
      return deap::predict<double>({e}, f.p.predict, f.volume);
    };
    auto rep = deap::gradient_check(fn, {tap, vol}, 1e-4);
    CHECK(rep.passed);
  }
}
