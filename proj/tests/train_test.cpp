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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <unistd.h>

#include "doctest.h"
#include "refsr/core/error.hpp"
#include "refsr/core/normalize.hpp"
#include "refsr/phantom/phantom.hpp"
#include "refsr/train/train.hpp"

using namespace refsr;
using namespace refsr::train;

namespace {

DegradedCase small_case(std::size_t index, Dims dims = {8, 16, 16}, int dirs = 6) {
  PhantomConfig p;
  p.dims = dims;
  p.n_directions = dirs;
  p.noise_sigma = 0.02;
  p.b_values = {500.0, 1000.0};
  const PhantomConfig member = cohort_member(p, index);
  return degrade_case(normalize_case(make_noisy_case(member).first), DegradeConfig{});
}

TrainConfig toy_config(Mode mode) {
  TrainConfig c;
  c.generator.base_width = 4;
  c.generator.channel_mults = {1, 2};
  c.generator.attention_at_depth = {1};
  c.generator.attention_heads = 2;
  c.batch_size = 6;
  c.lr = 2e-3;
  c.epochs = 5;
  c.max_batches_per_epoch = 4;
  c.val_max_pairs = 8;
  c.seed = 11;
  return c.with_mode(mode);
}

Dataset toy_dataset(Mode mode) {
  Dataset d;
  const double b500[] = {500.0};
  d.train.append(make_training_pairs(small_case(0), mode, b500));
  d.train.append(make_training_pairs(small_case(1), mode, b500));
  d.val = make_training_pairs(small_case(2), mode, b500);
  return d;
}

}  // namespace

TEST_CASE("config JSON round trip and validation") {
  TrainConfig c = toy_config(Mode::kConventional);
  nlohmann::json j = c;
  const TrainConfig back = j.get<TrainConfig>();
  CHECK(back.mode == Mode::kConventional);
  CHECK(back.generator.in_channels == 1);
  CHECK(back.batch_size == 6);
  CHECK(back.split_ratio == std::array<int, 3>{5, 2, 3});
  CHECK(nlohmann::json(back) == j);

  TrainConfig d;
  CHECK_NOTHROW(d.validate());
  CHECK(d.batch_size == 18);
  CHECK(d.epochs == 60);
  CHECK(d.eval_b_values == std::vector<double>{500.0, 1000.0});
  d.generator.in_channels = 1;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = TrainConfig{};
  d.batch_size = 0;
  CHECK_THROWS_AS(d.validate(), ConfigError);
  d = TrainConfig{};
  d.split_ratio = {5, 0, 3};
  CHECK_THROWS_AS(d.validate(), ConfigError);
  CHECK_THROWS_AS(parse_mode("both"), ConfigError);
  CHECK(nlohmann::json::parse(R"({"mode":"conventional"})").get<TrainConfig>().generator.in_channels == 1);
}

TEST_CASE("learning rate halves every period") {
  TrainConfig c;
  CHECK(learning_rate(c, 0) == 1e-4);
  CHECK(learning_rate(c, 19) == 1e-4);
  CHECK(learning_rate(c, 20) == 5e-5);
  CHECK(learning_rate(c, 40) == 2.5e-5);
  CHECK(learning_rate(c, 59) == 2.5e-5);
}

TEST_CASE("case split") {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("case_" + std::to_string(i));
  const auto s = split_cases(ids, {5, 2, 3}, 1);
  CHECK(s.train.size() == 5);
  CHECK(s.val.size() == 2);
  CHECK(s.test.size() == 3);
  const auto again = split_cases(ids, {5, 2, 3}, 1);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);

  bool any_differs = false;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::size_t n = 3 + seed % 12;
    const std::vector<std::string> sub(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(n, 10)));
    const auto p = split_cases(sub, {5, 2, 3}, seed);
    std::multiset<std::string> all(p.train.begin(), p.train.end());
    all.insert(p.val.begin(), p.val.end());
    all.insert(p.test.begin(), p.test.end());
    REQUIRE(all.size() == sub.size());
    REQUIRE(std::set<std::string>(all.begin(), all.end()).size() == sub.size());
    REQUIRE(!p.train.empty());
    REQUIRE(!p.val.empty());
    REQUIRE(!p.test.empty());
    if (sub.size() == 10 && p.train != s.train) any_differs = true;
  }
  CHECK(any_differs);
  CHECK_THROWS_AS(split_cases(std::vector<std::string>{"a", "b"}, {5, 2, 3}, 1), ConfigError);
  CHECK(split_cases(std::vector<std::string>{"a", "b", "c"}, {5, 2, 3}, 1).train.size() == 1);
}

TEST_CASE("training pairs") {
  const DegradedCase c = small_case(0, {32, 16, 16}, 12);
  const double b500[] = {500.0};
  const PairSet prop = make_training_pairs(c, Mode::kProposed, b500);
  CHECK(prop.pairs.size() == 384);
  CHECK(prop.channels == 2);
  const PairSet conv = make_training_pairs(c, Mode::kConventional, b500);
  CHECK(conv.pairs.size() == 384);
  CHECK(conv.channels == 1);
  CHECK(conv.pairs[0].input.size() == 256);
  CHECK(make_training_pairs(c, Mode::kConventional).pairs.size() == 768);

  const std::size_t plane = 256;
  for (const auto& p : prop.pairs) {
    REQUIRE(c.hr.dwis[p.image_index].b_value == 500.0);
    const auto t = c.hr.dwis[p.image_index].volume.slice(p.slice);
    const auto a = c.lr_on_hr_grid[p.image_index].volume.slice(p.slice);
    for (std::size_t k = 0; k < plane; ++k) {
      REQUIRE(p.target[k] == static_cast<float>(t[k]));
      REQUIRE(p.input[k] == static_cast<float>(a[k]));
    }
    // channel B depends on the slice only
    const auto& first = prop.pairs[p.slice];
    REQUIRE(std::equal(p.input.begin() + plane, p.input.end(), first.input.begin() + plane));
  }

  DegradedCase no_b0 = c;
  no_b0.hr.b0.volume = Volume();
  CHECK_THROWS_AS(make_training_pairs(no_b0, Mode::kProposed, b500), DataError);
  CHECK_NOTHROW(make_training_pairs(no_b0, Mode::kConventional, b500));
}

TEST_CASE("toy training descends and is deterministic") {
  const Dataset data = toy_dataset(Mode::kProposed);
  const TrainConfig cfg = toy_config(Mode::kProposed);
  const TrainResult a = train::train(cfg, data);
  const TrainResult b = train::train(cfg, data);
  REQUIRE(a.log.size() == 5);
  CHECK(a.log.back().pixel < a.log.front().pixel);
  CHECK(epoch_log_csv(a.log) == epoch_log_csv(b.log));
  CHECK(a.best.generator.size() == b.best.generator.size());
  for (std::size_t i = 0; i < a.best.generator.size(); ++i) {
    REQUIRE(a.best.generator[i].values == b.best.generator[i].values);
  }
  const auto csv = epoch_log_csv(a.log);
  CHECK(csv.rfind("epoch,lr,pixel,freq,percep,adv_g,adv_d,val_psnr,val_ssim\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);
  double best = -1e9;
  for (const auto& e : a.log) best = std::max(best, e.val_psnr);
  CHECK(a.best.val_psnr == best);
}

TEST_CASE("held-out cases never reach a batch") {
  Dataset data = toy_dataset(Mode::kConventional);
  data.held_out_ids = {data.train.pairs.front().case_id};
  TrainConfig cfg = toy_config(Mode::kConventional);
  cfg.epochs = 1;
  CHECK_THROWS_AS(train::train(cfg, data), ContractError);
}

TEST_CASE("non-finite loss aborts with the batch index") {
  Dataset data = toy_dataset(Mode::kConventional);
  for (auto& p : data.train.pairs) p.target[0] = NAN;
  TrainConfig cfg = toy_config(Mode::kConventional);
  try {
    train::train(cfg, data);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.batch_index() == 0);
  }
}

TEST_CASE("mode mismatches are rejected") {
  const Dataset data = toy_dataset(Mode::kConventional);
  CHECK_THROWS_AS(train::train(toy_config(Mode::kProposed), data), ShapeError);
  ModelCheckpoint ck;
  ck.config = toy_config(Mode::kConventional);
  CHECK_THROWS_AS(infer_volume(ck, small_case(0).lr, Mode::kProposed), ConfigError);
}

TEST_CASE("inference with a zeroed output layer reproduces the bilinear baseline") {
  const DegradedCase c = small_case(3);
  for (Mode mode : {Mode::kProposed, Mode::kConventional}) {
    srnet::Generator<float> gen(toy_config(mode).generator, 1);
    gen.zero_output_layer();
    const DwiCase sr = infer_volume(gen, c.lr, mode);
    REQUIRE(sr.dwis.size() == c.lr_on_hr_grid.size());
    CHECK(sr.dims() == c.hr.dims());
    for (std::size_t i = 0; i < sr.dwis.size(); ++i) {
      CHECK(sr.dwis[i].volume.dims() == c.hr.dims());
      CHECK(sr.dwis[i].b_value == c.hr.dwis[i].b_value);
      const auto s = sr.dwis[i].volume.data();
      const auto b = c.lr_on_hr_grid[i].volume.data();
      for (std::size_t k = 0; k < s.size(); ++k) REQUIRE(s[k] == static_cast<double>(static_cast<float>(b[k])));
    }
  }
  LowResCase bad = c.lr;
  bad.b0_hr.volume = Volume(Dims{8, 15, 16});
  srnet::Generator<float> gen(toy_config(Mode::kConventional).generator, 1);
  CHECK_THROWS_AS(infer_volume(gen, bad, Mode::kConventional), ShapeError);
}

TEST_CASE("checkpoint save and load") {
  const Dataset data = toy_dataset(Mode::kConventional);
  TrainConfig cfg = toy_config(Mode::kConventional);
  cfg.epochs = 1;
  const TrainResult r = train::train(cfg, data);
  const auto path = std::filesystem::temp_directory_path() / ("refsr_ckpt_" + std::to_string(getpid()) + ".bin");
  save_checkpoint(r.best, path.string());
  const ModelCheckpoint back = load_checkpoint(path.string());
  std::filesystem::remove(path);
  CHECK(back.epoch == r.best.epoch);
  CHECK(back.val_psnr == doctest::Approx(r.best.val_psnr));
  CHECK(nlohmann::json(back.config) == nlohmann::json(cfg));
  const DegradedCase c = small_case(4);
  const DwiCase x = infer_volume(r.best, c.lr, Mode::kConventional);
  const DwiCase y = infer_volume(back, c.lr, Mode::kConventional);
  for (std::size_t i = 0; i < x.dwis.size(); ++i) CHECK(x.dwis[i].volume == y.dwis[i].volume);
}
