/*
 * refsr: reference-guided volumetric super-resolution for cardiac DWI
 *
 * Copyright 2026 The refsr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <numbers>
#include <unistd.h>

#include "doctest.h"
#include "refsr/core/error.hpp"
#include "refsr/core/rng.hpp"
#include "refsr/substrate/params.hpp"

using namespace refsr;
using namespace refsr::ad;

namespace {

Tensor<double> rand_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(numel(s));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor<double>::from(std::move(s), std::move(v));
}

// Keeps values away from the kink of piecewise-linear activations.
Tensor<double> rand_away_from_zero(Shape s, std::uint64_t seed) {
  auto t = rand_tensor(std::move(s), seed);
  for (double& x : t.data()) x = x < 0 ? x - 0.05 : x + 0.05;
  return t;
}

// Scalar probe: mean(f * R) with a fixed random R, so every output element
// contributes a distinct weight.
Tensor<double> probe(const Tensor<double>& y, std::uint64_t seed) {
  return mean(mul(y, rand_tensor(y.shape(), seed)));
}

constexpr double kTol = 1e-4;

}  // namespace

TEST_CASE("elementwise primitives pass gradient checks") {
  const Shape shapes[] = {{3}, {2, 5}, {2, 3, 4, 4}};
  std::uint64_t seed = 10;
  for (const auto& s : shapes) {
    auto a = rand_away_from_zero(s, ++seed), b = rand_tensor(s, ++seed);
    const std::uint64_t ps = ++seed;
    CHECK(gradient_check([&] { return probe(add(a, b), ps); }, {a, b}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(sub(a, b), ps); }, {a, b}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(mul(a, b), ps); }, {a, b}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(mul(a, a), ps); }, {a}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(scale(a, 2.5), ps); }, {a}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(leaky_relu(a), ps); }, {a}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(silu(a), ps); }, {a}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(sigmoid(a), ps); }, {a}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(softplus(scale(a, 4.0)), ps); }, {a}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(softmax_last(a), ps); }, {a}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return mean(mul(a, b)); }, {a, b}).max_rel_error < kTol);
  }
}

TEST_CASE("conv2d passes gradient checks for stride 1 and 2") {
  struct Case {
    Shape x, w;
    std::size_t stride, pad;
  };
  const Case cases[] = {{{1, 2, 6, 6}, {3, 2, 3, 3}, 1, 1},
                        {{2, 3, 8, 8}, {4, 3, 3, 3}, 2, 1},
                        {{2, 4, 5, 7}, {2, 4, 1, 1}, 1, 0},
                        {{1, 1, 9, 8}, {2, 1, 3, 3}, 2, 0}};
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    auto x = rand_tensor(c.x, ++seed), w = rand_tensor(c.w, ++seed), b = rand_tensor({c.w[0]}, ++seed);
    const std::uint64_t ps = ++seed;
    const auto rep =
        gradient_check([&] { return probe(conv2d(x, w, b, c.stride, c.pad), ps); }, {x, w, b});
    CHECK(rep.max_rel_error < kTol);
    CHECK(rep.checked == x.numel() + w.numel() + b.numel());
  }
}

TEST_CASE("conv2d: identity kernel, hand-computed values, shape errors") {
  auto x = Tensor<double>::from({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  auto id = Tensor<double>::from({1, 1, 1, 1}, {1.0});
  const auto y = conv2d(x, id, Tensor<double>(), 1, 0);
  for (std::size_t i = 0; i < 9; ++i) CHECK(y.data()[i] == x.data()[i]);
  // all-ones 3x3 kernel with zero padding: centre sums all, corner sums 4
  auto ones = Tensor<double>::full({1, 1, 3, 3}, 1.0);
  const auto s = conv2d(x, ones, Tensor<double>(), 1, 1);
  CHECK(s.data()[4] == 45.0);
  CHECK(s.data()[0] == 1 + 2 + 4 + 5);
  const auto s2 = conv2d(x, ones, Tensor<double>(), 2, 1);
  CHECK(s2.shape() == Shape{1, 1, 2, 2});
  CHECK(s2.data()[3] == 5 + 6 + 8 + 9);
  CHECK_THROWS_AS(conv2d(x, Tensor<double>::full({1, 2, 3, 3}, 1.0), Tensor<double>(), 1, 1), ShapeError);
}

TEST_CASE("shape ops and matmul pass gradient checks") {
  std::uint64_t seed = 300;
  for (std::size_t n : {1u, 2u, 3u}) {
    auto a = rand_tensor({n, 3, 4}, ++seed), b = rand_tensor({n, 4, 5}, ++seed);
    auto at = rand_tensor({n, 4, 3}, ++seed), bt = rand_tensor({n, 5, 4}, ++seed);
    const std::uint64_t ps = ++seed;
    CHECK(gradient_check([&] { return probe(matmul(a, b), ps); }, {a, b}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(matmul(at, b, true, false), ps); }, {at, b}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(matmul(a, bt, false, true), ps); }, {a, bt}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(matmul(at, bt, true, true), ps); }, {at, bt}).max_rel_error < kTol);

    auto x = rand_tensor({n, 2, 4, 6}, ++seed), y = rand_tensor({n, 3, 4, 6}, ++seed);
    CHECK(gradient_check([&] { return probe(concat_channels<double>({x, y, x}), ps); }, {x, y}).max_rel_error <
          kTol);
    CHECK(gradient_check([&] { return probe(channel(y, 1), ps); }, {y}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(reshape(x, {n, 48}), ps); }, {x}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(upsample_nearest2x(x), ps); }, {x}).max_rel_error < kTol);
    CHECK(gradient_check([&] { return probe(spatial_mean(x), ps); }, {x}).max_rel_error < kTol);
    auto w = rand_tensor({5, 48}, ++seed), bias = rand_tensor({5}, ++seed);
    CHECK(gradient_check([&] { return probe(linear(reshape(x, {n, 48}), w, bias), ps); }, {x, w, bias})
              .max_rel_error < kTol);
    auto gamma = rand_tensor({6}, ++seed, 0.5, 1.5), beta = rand_tensor({6}, ++seed);
    auto z = rand_tensor({n, 6, 3, 5}, ++seed);
    for (std::size_t groups : {1u, 2u, 6u}) {
      CHECK(gradient_check([&] { return probe(group_norm(z, gamma, beta, groups), ps); }, {z, gamma, beta})
                .max_rel_error < kTol);
    }
  }
}

TEST_CASE("dft2 passes gradient checks and matches the definition") {
  std::uint64_t seed = 500;
  for (const Shape& s : {Shape{4, 4}, Shape{2, 8, 4}, Shape{1, 2, 6, 5}}) {
    auto x = rand_tensor(s, ++seed);
    const std::uint64_t ps = ++seed;
    CHECK(gradient_check([&] { return probe(dft2(x), ps); }, {x}).max_rel_error < kTol);
  }
  // constant image: single coefficient N^2 c at (0, 0)
  const double c = 0.37;
  const auto f = dft2(Tensor<double>::full({8, 8}, c));
  CHECK(f.shape() == Shape{8, 8, 2});
  CHECK(std::abs(f.data()[0] - 64 * c) < 1e-12);
  for (std::size_t i = 2; i < f.numel(); ++i) CHECK(std::abs(f.data()[i]) < 1e-12);
  // against the direct sum on a non-square, non-power-of-two plane
  auto x = rand_tensor({3, 5}, 77);
  const auto fx = dft2(x);
  for (std::size_t u = 0; u < 3; ++u)
    for (std::size_t v = 0; v < 5; ++v) {
      double re = 0, im = 0;
      for (std::size_t y = 0; y < 3; ++y)
        for (std::size_t xx = 0; xx < 5; ++xx) {
          const double th = 2 * std::numbers::pi * (double(u * y) / 3 + double(v * xx) / 5);
          re += x.data()[y * 5 + xx] * std::cos(th);
          im -= x.data()[y * 5 + xx] * std::sin(th);
        }
      CHECK(std::abs(fx.data()[2 * (u * 5 + v)] - re) < 1e-12);
      CHECK(std::abs(fx.data()[2 * (u * 5 + v) + 1] - im) < 1e-12);
    }
}

TEST_CASE("Parseval: sum |F|^2 = N M sum |f|^2") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto x = rand_tensor({16, 32}, seed);
    const auto f = dft2(x);
    double ef = 0, ex = 0;
    for (double v : f.data()) ef += v * v;
    for (double v : x.data()) ex += v * v;
    CHECK(std::abs(ef - 16 * 32 * ex) < 1e-6 * ef);
  }
}

TEST_CASE("softmax rows sum to one") {
  auto x = rand_tensor({4, 7, 9}, 3, -20, 20);
  const auto y = softmax_last(x);
  for (std::size_t r = 0; r < 28; ++r) {
    double s = 0;
    for (std::size_t i = 0; i < 9; ++i) s += y.data()[r * 9 + i];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("closed-form gradients") {
  auto x = rand_tensor({5, 4}, 8), y = rand_tensor({5, 4}, 9);
  x.set_requires_grad(true);
  auto loss = mean(mul(sub(x, y), sub(x, y)));
  loss.backward();
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(x.grad()[i] - 2 * (x.data()[i] - y.data()[i]) / 20) < 1e-15);
  CHECK(gradient_check([&] { return mean(mul(sub(x, y), sub(x, y))); }, {x}).max_rel_error < 1e-7);

  auto z = rand_tensor({3, 3}, 10);
  z.set_requires_grad(true);
  scale(mean(z), 9.0).backward();
  for (double g : z.grad()) CHECK(g == 1.0);
}

TEST_CASE("contract errors") {
  auto x = rand_tensor({2, 2}, 1);
  x.set_requires_grad(true);
  CHECK_THROWS_AS(x.backward(), ContractError);
  CHECK_THROWS_AS(gradient_check([&] { return x; }, {x}), ContractError);
  CHECK_THROWS_AS(add(x, rand_tensor({4}, 2)), ShapeError);
  CHECK_THROWS_AS(matmul(rand_tensor({1, 2, 3}, 1), rand_tensor({1, 2, 3}, 2)), ShapeError);
  CHECK_THROWS_AS(group_norm(rand_tensor({1, 6, 2, 2}, 1), rand_tensor({6}, 2), rand_tensor({6}, 3), 4), ShapeError);
  try {
    conv2d(rand_tensor({1, 3, 4, 4}, 1), rand_tensor({2, 2, 3, 3}, 1), Tensor<double>(), 1, 1);
    FAIL("expected a shape error");
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("conv2d") != std::string::npos);
  }
}

TEST_CASE("finite-check debug mode names the op") {
  set_check_finite(true);
  auto x = Tensor<double>::from({2}, {1.0, 1e308});
  CHECK_THROWS_AS(scale(x, 10.0), DataError);
  set_check_finite(false);
  CHECK_NOTHROW(scale(x, 10.0));
}

TEST_CASE("no-grad mode records nothing") {
  auto x = rand_tensor({3}, 1);
  x.set_requires_grad(true);
  NoGradGuard guard;
  const auto y = mean(x);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("Adam closed-form first step, zero gradient, determinism") {
  ParameterSet<double> ps;
  auto p = ps.constant("p", {3}, 1.0);
  p.mutable_grad()[0] = 0.5;
  p.mutable_grad()[1] = -2.0;
  p.mutable_grad()[2] = 0.0;
  Adam opt({1e-3, 0.9, 0.999, 1e-8});
  opt.step(ps, 1e-3);
  CHECK(p.data()[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
  CHECK(p.data()[1] == doctest::Approx(1.0 + 1e-3).epsilon(1e-9));
  CHECK(p.data()[2] == 1.0);
  CHECK_THROWS_AS(opt.step(ps, 0.0), ConfigError);
  CHECK_THROWS_AS(Adam({-1.0}), ConfigError);

  auto run = [] {
    ParameterSet<float> q;
    auto w = q.uniform("w", {4, 6}, 6, 42);
    auto x = Tensor<float>::full({6, 3}, 0.5f);
    Adam o({1e-2});
    for (int step = 0; step < 10; ++step) {
      q.zero_grad();
      const auto y = matmul(reshape(w, {1, 4, 6}), reshape(x, {1, 6, 3}));
      mean(mul(y, y)).backward();
      o.step(q, 1e-2);
    }
    return std::vector<float>(w.data().begin(), w.data().end());
  };
  CHECK(run() == run());
}

TEST_CASE("parameter sets: seeded init, unique names, checkpoint round trip") {
  ParameterSet<float> a, b;
  a.uniform("gen.enc0.conv.weight", {4, 2, 3, 3}, 18, 7);
  a.uniform("gen.enc0.conv.bias", {4}, 18, 7);
  b.uniform("gen.enc0.conv.bias", {4}, 18, 7);
  b.uniform("gen.enc0.conv.weight", {4, 2, 3, 3}, 18, 7);
  // values depend on (seed, name), not creation order
  CHECK(std::equal(a.at("gen.enc0.conv.weight").data().begin(), a.at("gen.enc0.conv.weight").data().end(),
                   b.at("gen.enc0.conv.weight").data().begin()));
  for (float v : a.at("gen.enc0.conv.weight").data()) CHECK(std::abs(v) <= 1.0f / std::sqrt(18.0f));
  CHECK_THROWS_AS(a.uniform("gen.enc0.conv.bias", {4}, 18, 7), ContractError);
  CHECK(a.count() == 4 * 2 * 9 + 4);

  CheckpointFile ck{R"({"seed":7})", export_params(a)};
  const auto bytes = encode_checkpoint(ck);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.header_json == ck.header_json);
  CHECK(encode_checkpoint(back) == bytes);
  ParameterSet<double> d;
  d.constant("gen.enc0.conv.weight", {4, 2, 3, 3}, 0.0);
  d.constant("gen.enc0.conv.bias", {4}, 0.0);
  import_params(d, back.arrays);
  CHECK(d.at("gen.enc0.conv.bias").data()[2] == double(a.at("gen.enc0.conv.bias").data()[2]));

  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  CHECK_THROWS_AS(decode_checkpoint(truncated), FormatError);
  ParameterSet<float> wrong;
  wrong.constant("gen.enc0.conv.bias", {5}, 0.0f);
  CHECK_THROWS_AS(import_params(wrong, back.arrays), ShapeError);

  const std::string path = "/tmp/refsr_ckpt_" + std::to_string(::getpid()) + ".bin";
  write_checkpoint(path, ck);
  CHECK(read_checkpoint(path).arrays.size() == 2);
  std::remove(path.c_str());
}
