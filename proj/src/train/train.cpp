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

#include "refsr/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "refsr/core/error.hpp"
#include "refsr/core/rng.hpp"

namespace refsr::train {

const char* mode_name(Mode m) { return m == Mode::kProposed ? "proposed" : "conventional"; }

Mode parse_mode(const std::string& s) {
  if (s == "proposed") return Mode::kProposed;
  if (s == "conventional") return Mode::kConventional;
  throw ConfigError("unknown mode '" + s + "' (expected proposed or conventional)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (lr_halving_period_epochs < 1) throw ConfigError("lr_halving_period_epochs must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  for (int r : split_ratio) {
    if (r < 1) throw ConfigError("split ratio components must be >= 1");
  }
  if (train_b_values.empty()) throw ConfigError("train_b_values must not be empty");
  for (double b : train_b_values) {
    if (!(b > 0.0)) throw ConfigError("train_b_values must be positive");
  }
  for (double b : eval_b_values) {
    if (!(b > 0.0)) throw ConfigError("eval_b_values must be positive");
  }
  const int want = mode == Mode::kProposed ? 2 : 1;
  if (generator.in_channels != want) {
    throw ConfigError(std::string(mode_name(mode)) + " mode needs generator.in_channels = " + std::to_string(want));
  }
  loss_weights.validate();
  generator.validate();
}

TrainConfig TrainConfig::with_mode(Mode m) const {
  TrainConfig c = *this;
  c.mode = m;
  c.generator.in_channels = m == Mode::kProposed ? 2 : 1;
  return c;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"mode", mode_name(c.mode)},
       {"batch_size", c.batch_size},
       {"lr", c.lr},
       {"lr_halving_period_epochs", c.lr_halving_period_epochs},
       {"epochs", c.epochs},
       {"split_ratio", c.split_ratio},
       {"train_b_values", c.train_b_values},
       {"eval_b_values", c.eval_b_values},
       {"seed", c.seed},
       {"loss_weights", c.loss_weights},
       {"generator", c.generator},
       {"max_batches_per_epoch", c.max_batches_per_epoch},
       {"val_max_pairs", c.val_max_pairs},
       {"zero_init_output", c.zero_init_output}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.mode = parse_mode(j.value("mode", std::string(mode_name(d.mode))));
  c.batch_size = j.value("batch_size", d.batch_size);
  c.lr = j.value("lr", d.lr);
  c.lr_halving_period_epochs = j.value("lr_halving_period_epochs", d.lr_halving_period_epochs);
  c.epochs = j.value("epochs", d.epochs);
  c.split_ratio = j.value("split_ratio", d.split_ratio);
  c.train_b_values = j.value("train_b_values", d.train_b_values);
  c.eval_b_values = j.value("eval_b_values", d.eval_b_values);
  c.seed = j.value("seed", d.seed);
  c.loss_weights = j.value("loss_weights", d.loss_weights);
  c.generator = j.value("generator", d.generator);
  // in_channels follows the mode unless given explicitly.
  if (!j.contains("generator") || !j["generator"].contains("in_channels")) {
    c.generator.in_channels = c.mode == Mode::kProposed ? 2 : 1;
  }
  c.max_batches_per_epoch = j.value("max_batches_per_epoch", d.max_batches_per_epoch);
  c.val_max_pairs = j.value("val_max_pairs", d.val_max_pairs);
  c.zero_init_output = j.value("zero_init_output", d.zero_init_output);
}

double learning_rate(const TrainConfig& cfg, int epoch) {
  return cfg.lr * std::ldexp(1.0, -(epoch / cfg.lr_halving_period_epochs));
}

CaseSplit split_cases(std::span<const std::string> case_ids, const std::array<int, 3>& ratio, std::uint64_t seed) {
  const std::size_t n = case_ids.size();
  if (n < 3) throw ConfigError("splitting needs at least 3 cases, got " + std::to_string(n));
  for (int r : ratio) {
    if (r < 1) throw ConfigError("split ratio components must be >= 1");
  }
  std::vector<std::string> ids(case_ids.begin(), case_ids.end());
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);

  const int total = ratio[0] + ratio[1] + ratio[2];
  std::array<std::size_t, 3> size{};
  std::array<double, 3> frac{};
  std::size_t used = 0;
  for (int k = 0; k < 3; ++k) {
    const double exact = static_cast<double>(n) * ratio[k] / total;
    size[k] = static_cast<std::size_t>(std::floor(exact));
    frac[k] = exact - static_cast<double>(size[k]);
    used += size[k];
  }
  while (used < n) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (frac[k] > frac[best]) best = k;
    }
    ++size[best];
    frac[best] = -1.0;
    ++used;
  }
  for (int k = 0; k < 3; ++k) {
    if (size[k] == 0) {
      const auto big = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
      --size[big];
      ++size[k];
    }
  }
  CaseSplit s;
  auto it = ids.begin();
  s.train.assign(it, it + static_cast<std::ptrdiff_t>(size[0]));
  it += static_cast<std::ptrdiff_t>(size[0]);
  s.val.assign(it, it + static_cast<std::ptrdiff_t>(size[1]));
  it += static_cast<std::ptrdiff_t>(size[1]);
  s.test.assign(it, ids.end());
  return s;
}

void PairSet::append(PairSet&& other) {
  if (other.pairs.empty()) return;
  if (pairs.empty()) {
    channels = other.channels;
    height = other.height;
    width = other.width;
  } else if (channels != other.channels || height != other.height || width != other.width) {
    throw ShapeError("cannot merge pair sets of different slice shapes");
  }
  for (auto& p : other.pairs) pairs.push_back(std::move(p));
  other.pairs.clear();
}

PairSet make_training_pairs(const DegradedCase& c, Mode mode, std::span<const double> b_values) {
  const bool has_b0 = !c.hr.b0.volume.data().empty();
  const Dims d = has_b0 || c.hr.dwis.empty() ? c.hr.dims() : c.hr.dwis.front().volume.dims();
  if (c.lr_on_hr_grid.size() != c.hr.dwis.size()) throw DataError("bilinear baseline and HR DWI counts differ");
  if (mode == Mode::kProposed && !has_b0) {
    throw DataError("proposed mode needs the HR b0 of case " + c.hr.case_id);
  }
  PairSet out;
  out.channels = mode == Mode::kProposed ? 2 : 1;
  out.height = d.y;
  out.width = d.x;
  const std::size_t plane = d.slice_count();
  for (std::size_t i = 0; i < c.hr.dwis.size(); ++i) {
    const double b = c.hr.dwis[i].b_value;
    if (!b_values.empty() && std::find(b_values.begin(), b_values.end(), b) == b_values.end()) continue;
    if (c.lr_on_hr_grid[i].volume.dims() != d || c.hr.dwis[i].volume.dims() != d) {
      throw ShapeError("DWI " + std::to_string(i) + " of case " + c.hr.case_id + " is not on the HR grid");
    }
    for (std::size_t z = 0; z < d.z; ++z) {
      TrainingPair p;
      p.case_id = c.hr.case_id;
      p.slice = z;
      p.image_index = i;
      p.input.resize(out.channels * plane);
      p.target.resize(plane);
      const auto a = c.lr_on_hr_grid[i].volume.slice(z);
      const auto t = c.hr.dwis[i].volume.slice(z);
      std::copy(a.begin(), a.end(), p.input.begin());
      if (mode == Mode::kProposed) {
        const auto g = c.hr.b0.volume.slice(z);
        std::copy(g.begin(), g.end(), p.input.begin() + static_cast<std::ptrdiff_t>(plane));
      }
      std::copy(t.begin(), t.end(), p.target.begin());
      out.pairs.push_back(std::move(p));
    }
  }
  return out;
}

std::string epoch_log_csv(std::span<const EpochLog> log) {
  std::string out = "epoch,lr,pixel,freq,percep,adv_g,adv_d,val_psnr,val_ssim\n";
  char buf[512];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.6f,%.6f\n", e.epoch, e.lr, e.pixel, e.freq,
                  e.percep, e.adv_g, e.adv_d, e.val_psnr, e.val_ssim);
    out += buf;
  }
  return out;
}

srnet::Generator<float> ModelCheckpoint::build() const {
  srnet::Generator<float> g(config.generator, 0);
  ad::import_params(g.params(), generator);
  return g;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path) {
  ad::CheckpointFile f;
  nlohmann::json header = {{"train_config", ckpt.config},
                           {"seed", ckpt.config.seed},
                           {"epoch", ckpt.epoch},
                           {"val_psnr", ckpt.val_psnr}};
  f.header_json = header.dump();
  f.arrays = ckpt.generator;
  ad::write_checkpoint(path, f);
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  const ad::CheckpointFile f = ad::read_checkpoint(path);
  ModelCheckpoint c;
  try {
    const auto header = nlohmann::json::parse(f.header_json);
    c.config = header.at("train_config").get<TrainConfig>();
    c.epoch = header.value("epoch", -1);
    c.val_psnr = header.value("val_psnr", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": bad checkpoint header: " + e.what(), 12);
  }
  c.config.validate();
  c.generator = f.arrays;
  return c;
}

}  // namespace refsr::train
