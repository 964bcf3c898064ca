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

#include "doctest.h"
#include "refsr/core/error.hpp"
#include "refsr/core/rng.hpp"
#include "refsr/srnet/srnet.hpp"

using namespace refsr;
using namespace refsr::srnet;
using ad::Shape;

namespace {

template <class T>
Tensor<T> rand_tensor(Shape s, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<T> v(ad::numel(s));
  for (T& x : v) x = static_cast<T>(rng.uniform(lo, hi));
  return Tensor<T>::from(std::move(s), std::move(v));
}

GeneratorConfig tiny_config(int in_channels) {
  GeneratorConfig c;
  c.base_width = 4;
  c.channel_mults = {1, 2};
  c.attention_at_depth = {1};
  c.attention_heads = 2;
  c.in_channels = in_channels;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  GeneratorConfig c;
  CHECK_NOTHROW(c.validate());
  c.attention_at_depth = {5};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.attention_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = GeneratorConfig{};
  c.in_channels = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  w.w_freq = -1;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  CHECK_THROWS_AS((LossWeights{0, 0, 0, 0}.validate()), ConfigError);

  nlohmann::json j = tiny_config(1);
  const auto back = j.get<GeneratorConfig>();
  CHECK(back.base_width == 4);
  CHECK(back.channel_mults == std::vector<int>{1, 2});
  CHECK(back.attention_at_depth == std::set<int>{1});
  CHECK(back.in_channels == 1);
  nlohmann::json jw = LossWeights{};
  CHECK(jw.get<LossWeights>().w_adv == doctest::Approx(0.005));
}

TEST_CASE("norm groups") {
  CHECK(norm_groups(1) == 1);
  CHECK(norm_groups(4) == 4);
  CHECK(norm_groups(8) == 8);
  CHECK(norm_groups(12) == 6);
  CHECK(norm_groups(64) == 8);
  CHECK(norm_groups(7) == 7);
  CHECK(norm_groups(11) == 1);
}

TEST_CASE("generator maps 2x64x64 to 1x64x64 deterministically") {
  GeneratorConfig cfg;
  cfg.base_width = 8;
  Generator<float> g1(cfg, 7), g2(cfg, 7), g3(cfg, 8);
  auto x = rand_tensor<float>({2, 2, 64, 64}, 1);
  ad::NoGradGuard guard;
  auto y1 = g1.forward(x), y2 = g2.forward(x), y3 = g3.forward(x);
  CHECK(y1.shape() == Shape{2, 1, 64, 64});
  bool same = true, differs = false;
  for (std::size_t i = 0; i < y1.numel(); ++i) {
    same = same && y1.data()[i] == y2.data()[i];
    differs = differs || y1.data()[i] != y3.data()[i];
    REQUIRE(std::isfinite(y1.data()[i]));
  }
  CHECK(same);
  CHECK(differs);
  CHECK_THROWS_AS(g1.forward(rand_tensor<float>({1, 1, 64, 64}, 2)), ShapeError);
  CHECK_THROWS_AS(g1.forward(rand_tensor<float>({1, 2, 60, 64}, 2)), ShapeError);
}

TEST_CASE("zeroed output layer makes the generator the identity on the LR channel") {
  for (int ch : {1, 2}) {
    Generator<float> g(tiny_config(ch), 3);
    g.zero_output_layer();
    auto x = rand_tensor<float>({2, static_cast<std::size_t>(ch), 16, 16}, 4);
    auto y = g.forward(x);
    for (std::size_t b = 0; b < 2; ++b) {
      for (std::size_t i = 0; i < 256; ++i) {
        REQUIRE(y.data()[b * 256 + i] == x.data()[b * ch * 256 + i]);
      }
    }
  }
}

TEST_CASE("parameter names are unique and stable") {
  Generator<float> g(GeneratorConfig{}, 1);
  CHECK(g.params().count() > 0);
  bool has_mid_attn = false;
  for (const auto& p : g.params().items()) has_mid_attn = has_mid_attn || p.name == "gen.mid.attn.q.weight";
  CHECK(has_mid_attn);
  Discriminator<float> d(1);
  CHECK(d.params().items().back().name == "disc.fc.bias");
}

TEST_CASE("discriminator emits one finite logit per sample") {
  Discriminator<float> d(5);
  auto logits = d.forward(rand_tensor<float>({3, 1, 64, 64}, 9));
  CHECK(logits.shape() == Shape{3, 1});
  for (float v : logits.data()) CHECK(std::isfinite(v));
  CHECK_THROWS_AS(d.forward(rand_tensor<float>({1, 2, 64, 64}, 9)), ShapeError);
}

TEST_CASE("pixel loss") {
  auto gt = rand_tensor<double>({1, 1, 8, 8}, 11);
  auto pred = Tensor<double>::from(gt.shape(), std::vector<double>(gt.data().begin(), gt.data().end()));
  for (double& v : pred.data()) v += 0.1;
  CHECK(pixel_loss(pred, gt).item() == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(pixel_loss(gt, gt).item() == 0.0);

  auto a = rand_tensor<double>({2, 1, 16, 16}, 12), b = rand_tensor<double>({2, 1, 16, 16}, 13);
  double brute = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) brute += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
  brute /= static_cast<double>(a.numel());
  CHECK(std::abs(pixel_loss(a, b).item() - brute) < 1e-12);
}

TEST_CASE("frequency loss equals pixel loss on 100 random pairs") {
  double worst = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t h = 8 + 8 * (s % 3), w = 16 + 8 * (s % 2);
    auto a = rand_tensor<double>({1, 1, h, w}, 100 + s), b = rand_tensor<double>({1, 1, h, w}, 300 + s);
    const double p = pixel_loss(a, b).item(), f = frequency_loss(a, b).item();
    worst = std::max(worst, std::abs(f - p) / p);
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("perceptual loss is symmetric, non-negative, and zero on identical inputs") {
  FeatureExtractor<double> fe;
  auto a = rand_tensor<double>({2, 1, 32, 32}, 21), b = rand_tensor<double>({2, 1, 32, 32}, 22);
  const double ab = perceptual_loss(a, b, fe).item(), ba = perceptual_loss(b, a, fe).item();
  CHECK(ab > 0);
  CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
  CHECK(perceptual_loss(a, a, fe).item() == 0.0);
}

TEST_CASE("adversarial losses at a zero logit") {
  Discriminator<double> d(3, {4, 8});
  for (auto& p : d.params().items()) {
    for (double& v : p.tensor.data()) v = 0.0;
  }
  auto fake = rand_tensor<double>({2, 1, 16, 16}, 31), real = rand_tensor<double>({2, 1, 16, 16}, 32);
  auto adv = adversarial_losses(d, fake, real);
  CHECK(adv.disc.item() == doctest::Approx(2 * std::numbers::ln2).epsilon(1e-12));
  CHECK(adv.gen.item() == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
}

TEST_CASE("discriminator loss does not reach the generator output") {
  Discriminator<double> d(3, {4, 8});
  auto fake = rand_tensor<double>({1, 1, 16, 16}, 33);
  fake.set_requires_grad(true);
  auto real = rand_tensor<double>({1, 1, 16, 16}, 34);
  adversarial_losses(d, fake, real).disc.backward();
  CHECK(fake.grad().empty());
}

TEST_CASE("total loss is the weighted sum of its parts") {
  LossParts<double> parts{Tensor<double>::full({}, 2.0), Tensor<double>::full({}, 3.0),
                          Tensor<double>::full({}, 5.0), Tensor<double>::full({}, 7.0)};
  const LossWeights w{1.0, 0.1, 0.01, 0.005};
  CHECK(total_loss(parts, w).item() == doctest::Approx(2.0 + 0.3 + 0.05 + 0.035).epsilon(1e-14));
  LossParts<double> partial = parts;
  partial.adv_gen = Tensor<double>();
  CHECK(total_loss(partial, w).item() == doctest::Approx(2.35).epsilon(1e-14));
  CHECK_THROWS_AS(total_loss(partial, LossWeights{0, 0, 0, 1}), ConfigError);
}

TEST_CASE("generator plus four-term loss passes a gradient check") {
  const Shape shapes[] = {{1, 2, 16, 16}, {2, 2, 16, 16}, {1, 2, 32, 16}};
  std::uint64_t seed = 40;
  for (const auto& s : shapes) {
    Generator<double> g(tiny_config(2), ++seed);
    Discriminator<double> d(++seed, {4, 8});
    d.params().set_trainable(false);
    FeatureExtractor<double> fe;
    auto x = rand_tensor<double>(s, ++seed);
    auto gt = rand_tensor<double>({s[0], 1, s[2], s[3]}, ++seed);
    std::vector<Tensor<double>> inputs;
    for (auto& p : g.params().items()) inputs.push_back(p.tensor);
    const auto rep = ad::gradient_check(
        [&] { return total_loss(loss_parts(g.forward(x), gt, fe, &d), LossWeights{}); }, inputs, 1e-5, 6);
    INFO("shape " << ad::to_string(s) << " worst input " << rep.worst_input << " analytic " << rep.analytic
                  << " numeric " << rep.numeric);
    CHECK(rep.checked > 100);
    CHECK(rep.max_rel_error < 1e-4);
  }
}
