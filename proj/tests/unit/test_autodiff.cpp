// Copyright 2026 The deap3d Authors.
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "deap/gradcheck.hpp"
#include "deap/ops.hpp"
#include "deap/parallel.hpp"
#include "deap/params.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "oracles.hpp"

using deap::ErrorCode;
using deap::Tensor;
using fixture::code_of;
using fixture::random_tensor;
using TD = Tensor<double>;

TEST_SUITE("autodiff") {
  TEST_CASE("tensor construction checks the buffer length") {
    CHECK(code_of([] { TD::from_values({2, 3}, std::vector<double>(5)); }) == ErrorCode::kShapeMismatch);
    auto t = TD::full({2, 2}, 3.0);
    CHECK(t.numel() == 4);
    CHECK(t.values()[3] == 3.0);
    CHECK(code_of([&] { (void)t.item(); }) == ErrorCode::kShapeMismatch);
  }

  TEST_CASE("matmul by the identity returns the input") {
    std::mt19937_64 rng(1);
    for (std::size_t n : {1, 3, 7}) {
      auto a = random_tensor(rng, {5, n});
      std::vector<double> eye(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
      auto y = deap::matmul(a, TD::from_values({n, n}, eye));
      CHECK(oracle::vec(y) == oracle::vec(a));
    }
  }

  TEST_CASE("shape, axis and finiteness errors carry distinct codes") {
    std::mt19937_64 rng(2);
    auto a = random_tensor(rng, {2, 3});
    auto b = random_tensor(rng, {2, 3});
    CHECK(code_of([&] { deap::matmul(a, b); }) == ErrorCode::kShapeMismatch);
    CHECK(code_of([&] { deap::softmax(a, 2); }) == ErrorCode::kInvalidAxis);
    CHECK(code_of([&] { deap::concat<double>({a, b}, 5); }) == ErrorCode::kInvalidAxis);
    auto bad = TD::from_values({2}, {1.0, std::nan("")});
    CHECK(code_of([&] { deap::relu(bad); }) == ErrorCode::kNonFinite);
    CHECK(code_of([&] { deap::add(a, random_tensor(rng, {3, 2})); }) == ErrorCode::kShapeMismatch);
  }

  TEST_CASE("softmax slices are non-negative and sum to one on every axis") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
      auto x = random_tensor(rng, {3, 4, 5}, 4.0);
      for (std::size_t axis = 0; axis < 3; ++axis) {
        auto y = deap::softmax(x, axis);
        auto v = y.values();
        const std::size_t n = x.dim(axis);
        const std::size_t inner = axis == 2 ? 1 : (axis == 1 ? 5 : 20);
        const std::size_t outer = x.numel() / (n * inner);
        for (std::size_t o = 0; o < outer; ++o)
          for (std::size_t i = 0; i < inner; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
              const double p = v[(o * n + k) * inner + i];
              CHECK(p >= 0.0);
              s += p;
            }
            CHECK(std::abs(s - 1.0) < 1e-6);
          }
      }
    }
  }

  TEST_CASE("layer and instance norm standardize each group") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
      auto x = random_tensor(rng, {4, 3, 2, 6}, 3.0);
      for (auto& v : x.mutable_values()) v += 5.0;
      auto ln = deap::layer_norm(x);
      auto lv = ln.values();
      for (std::size_t r = 0; r < 24; ++r) {
        double mu = 0.0, var = 0.0;
        for (std::size_t c = 0; c < 6; ++c) mu += lv[r * 6 + c];
        mu /= 6.0;
        for (std::size_t c = 0; c < 6; ++c) var += (lv[r * 6 + c] - mu) * (lv[r * 6 + c] - mu);
        var /= 6.0;
        CHECK(std::abs(mu) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-4);
      }
      auto in = deap::instance_norm(x);
      auto iv = in.values();
      for (std::size_t c = 0; c < 6; ++c) {
        double mu = 0.0, var = 0.0;
        for (std::size_t r = 0; r < 24; ++r) mu += iv[r * 6 + c];
        mu /= 24.0;
        for (std::size_t r = 0; r < 24; ++r) var += (iv[r * 6 + c] - mu) * (iv[r * 6 + c] - mu);
        var /= 24.0;
        CHECK(std::abs(mu) < 1e-5);
        CHECK(std::abs(var - 1.0) < 1e-4);
      }
    }
  }

  TEST_CASE("concat followed by slicing is the identity") {
    std::mt19937_64 rng(5);
    for (std::size_t axis = 0; axis < 3; ++axis) {
      deap::Shape sa{2, 3, 4}, sb{2, 3, 4};
      sb[axis] = 2;
      auto a = random_tensor(rng, sa), b = random_tensor(rng, sb);
      auto c = deap::concat<double>({a, b}, axis);
      CHECK(oracle::vec(deap::slice(c, axis, 0, sa[axis])) == oracle::vec(a));
      CHECK(oracle::vec(deap::slice(c, axis, sa[axis], 2)) == oracle::vec(b));
    }
  }

  TEST_CASE("conv3d matches the direct oracle") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 25; ++trial) {
      std::uniform_int_distribution<std::size_t> k(1, 3), s(1, 2), c(1, 3), extra(0, 3);
      const deap::Index3 kk{k(rng), k(rng), k(rng)};
      deap::Conv3dOptions o;
      for (int a = 0; a < 3; ++a) {
        o.stride[a] = s(rng);
        o.padding[a] = std::uniform_int_distribution<std::size_t>(0, kk[a] - 1)(rng);
      }
      const deap::Index3 d{kk[0] + extra(rng), kk[1] + extra(rng), kk[2] + extra(rng)};
      const std::size_t cin = c(rng), cout = c(rng);
      auto x = random_tensor(rng, {d[0], d[1], d[2], cin});
      auto w = random_tensor(rng, {kk[0], kk[1], kk[2], cin, cout});
      auto b = random_tensor(rng, {cout});
      auto y = deap::conv3d(x, w, b, o);
      const auto ref = oracle::conv3d(oracle::vec(x), d, cin, oracle::vec(w), kk, cout,
                                      oracle::vec(b), o.stride, o.padding);
      CHECK(oracle::max_abs_diff(oracle::vec(y), ref) < 1e-12);
      auto yd = deap::conv3d_direct(x, w, b, o);
      CHECK(oracle::max_abs_diff(oracle::vec(yd), ref) < 1e-12);
    }
  }

  TEST_CASE("sum-one kernel keeps a constant field constant in the interior") {
    auto x = TD::full({5, 5, 5, 1}, 2.5);
    auto w = TD::full({3, 3, 3, 1, 1}, 1.0 / 27.0);
    deap::Conv3dOptions o;
    o.padding = {1, 1, 1};
    auto y = deap::conv3d(x, w, TD(), o);
    for (std::size_t h = 1; h < 4; ++h)
      for (std::size_t w2 = 1; w2 < 4; ++w2)
        for (std::size_t d = 1; d < 4; ++d) {
          CHECK(y.values()[(h * 5 + w2) * 5 + d] == doctest::Approx(2.5).epsilon(1e-12));
        }
  }

  TEST_CASE("backward: linear functional, dead relu, accumulation") {
    std::mt19937_64 rng(7);
    auto x = random_tensor(rng, {3, 4}, 1.0, true);
    deap::backward(deap::reduce_sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
    deap::backward(deap::reduce_sum(x));
    for (double g : x.grad()) CHECK(g == 2.0);
    x.zero_grad();
    CHECK_FALSE(x.has_grad());

    auto neg = TD::full({2, 3}, -0.7, true);
    deap::backward(deap::reduce_sum(deap::relu(neg)));
    for (double g : neg.grad()) CHECK(g == 0.0);

    CHECK(code_of([&] { deap::backward(deap::scale(x, 2.0)); }) == ErrorCode::kNonScalarLoss);
  }

  TEST_CASE("no-grad mode records nothing") {
    auto x = TD::full({2}, 1.0, true);
    TD y;
    {
      deap::NoGradGuard guard;
      CHECK_FALSE(deap::grad_enabled());
      y = deap::reduce_sum(deap::scale(x, 3.0));
    }
    CHECK(deap::grad_enabled());
    CHECK_FALSE(y.requires_grad());
  }

  TEST_CASE("random composite graphs pass the finite-difference check") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
      auto a = random_tensor(rng, {3, 4});
      auto b = random_tensor(rng, {4, 5});
      auto g = random_tensor(rng, {5});
      auto f = [](const std::vector<TD>& in) {
        auto h = deap::gelu(deap::matmul(in[0], in[1]));
        auto n = deap::channel_affine(deap::layer_norm(h), in[2], in[2]);
        auto s = deap::softmax(deap::mul(n, deap::sigmoid(h)), 1);
        return deap::concat<double>({s, deap::scale(h, 0.5)}, 0);
      };
      auto rep = deap::gradient_check(f, {a, b, g}, 1e-4);
      CHECK(rep.passed);
      CHECK(rep.max_rel_error < 1e-4);
    }
  }

  TEST_CASE("gradient_check: identity is exact, softmax of matmul passes") {
    std::mt19937_64 rng(9);
    auto x = random_tensor(rng, {3, 3});
    auto id = deap::gradient_check([](const TD& t) { return deap::add_scalar(t, 0.0); }, x, 1e-4);
    CHECK(id.passed);
    CHECK(id.max_rel_error < 1e-9);
    auto w = random_tensor(rng, {3, 2});
    auto sm = deap::gradient_check(
        [&](const TD& t) { return deap::softmax(deap::matmul(t, w), 1); }, x, 1e-4);
    CHECK(sm.passed);
  }

  TEST_CASE("gradient_check flags relu zeros as kinks instead of failing") {
    auto x = TD::from_values({2, 3}, {0.0, 1.0, -2.0, 0.0, 0.5, -0.1});
    auto rep = deap::gradient_check([](const TD& t) { return deap::relu(t); }, x, 1e-4);
    CHECK(rep.passed);
    CHECK(rep.kinks.size() == 2);
  }

  TEST_CASE("gradient_check rejects non-deterministic functions") {
    int calls = 0;
    auto x = TD::full({2}, 1.0);
    auto f = [&](const TD& t) { return deap::add_scalar(t, double(++calls)); };
    CHECK(code_of([&] { deap::gradient_check(f, x, 1e-4); }) == ErrorCode::kNonDeterministic);
  }

  TEST_CASE("kernels are deterministic for a fixed thread count") {
    std::mt19937_64 rng(10);
    auto x = random_tensor(rng, {6, 6, 6, 3});
    auto w = random_tensor(rng, {3, 3, 3, 3, 4});
    deap::Conv3dOptions o;
    o.padding = {1, 1, 1};
    const int saved = deap::thread_count();
    deap::set_thread_count(1);
    auto y1 = oracle::vec(deap::conv3d(x, w, TD(), o));
    deap::set_thread_count(3);
    auto y3a = oracle::vec(deap::conv3d(x, w, TD(), o));
    auto y3b = oracle::vec(deap::conv3d(x, w, TD(), o));
    deap::set_thread_count(saved);
    CHECK(y3a == y3b);
    CHECK(oracle::max_abs_diff(y1, y3a) < 1e-12);
  }

  TEST_CASE("parameter store: unique names, freeze flags, counts") {
    deap::ParameterStore<double> store;
    store.add("a", {2, 2}, std::vector<double>(4, 1.0));
    store.add("b", {3}, std::vector<double>(3, 0.0));
    CHECK(code_of([&] { store.add("a", {1}, {0.0}); }) == ErrorCode::kDuplicateId);
    CHECK(code_of([&] { store.get("zz"); }) == ErrorCode::kUnknownParameter);
    store.set_frozen("a", true);
    CHECK(store.total_count() == 7);
    CHECK(store.trainable_count() == 3);
    CHECK_FALSE(store.get("a").requires_grad());
    store.set_track_frozen_grads(true);
    CHECK(store.get("a").requires_grad());
  }

  TEST_CASE("truncated initializers stay within two standard deviations") {
    std::mt19937_64 rng(11);
    auto v = deap::truncated_normal<double>(rng, 5000, 0.02);
    for (double x : v) CHECK(std::abs(x) <= 0.04);
    auto s = deap::scaled_normal<float>(rng, 5000, 16, 2.0);
    for (float x : s) CHECK(std::abs(x) <= 2.0 * 2.0 / 4.0 + 1e-6);
  }
}
