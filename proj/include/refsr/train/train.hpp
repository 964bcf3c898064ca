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

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "refsr/degrade/degrade.hpp"
#include "refsr/srnet/srnet.hpp"

namespace refsr::train {

enum class Mode { kProposed, kConventional };
const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

struct TrainConfig {
  Mode mode = Mode::kProposed;
  std::size_t batch_size = 18;
  double lr = 1e-4;
  int lr_halving_period_epochs = 20;
  int epochs = 60;
  std::array<int, 3> split_ratio{5, 2, 3};
  std::vector<double> train_b_values{500.0};
  std::vector<double> eval_b_values{500.0, 1000.0};
  std::uint64_t seed = 1;
  srnet::LossWeights loss_weights{};
  srnet::GeneratorConfig generator{};

  /// Desk-scale knobs. 0 means no limit.
  std::size_t max_batches_per_epoch = 0;
  std::size_t val_max_pairs = 0;
  /// Start from the residual identity (output equals the bilinear input).
  bool zero_init_output = true;

  void validate() const;
  /// Copy with mode and generator.in_channels switched together.
  TrainConfig with_mode(Mode m) const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// lr0 * 0.5^floor(epoch / period)
double learning_rate(const TrainConfig& cfg, int epoch);

struct CaseSplit {
  std::vector<std::string> train, val, test;
};

/// Seeded shuffle, then sizes proportional to ratio (largest remainder,
/// ties to the earlier partition), each partition getting at least one case.
CaseSplit split_cases(std::span<const std::string> case_ids, const std::array<int, 3>& ratio, std::uint64_t seed);

struct TrainingPair {
  std::string case_id;
  std::size_t slice = 0;
  std::size_t image_index = 0;
  /// channels x H x W; channel 0 is the bilinear-upsampled DWI, channel 1 the
  /// HR b0 in proposed mode.
  std::vector<float> input;
  std::vector<float> target;
};

struct PairSet {
  std::size_t channels = 0, height = 0, width = 0;
  std::vector<TrainingPair> pairs;
  void append(PairSet&& other);
};

/// One pair per HR slice and per DWI whose b-value is in b_values (all DWIs
/// when b_values is empty).
PairSet make_training_pairs(const DegradedCase& c, Mode mode, std::span<const double> b_values = {});

struct EpochLog {
  int epoch = 0;
  double lr = 0.0;
  double pixel = 0.0, freq = 0.0, percep = 0.0, adv_g = 0.0, adv_d = 0.0;
  double val_psnr = 0.0, val_ssim = 0.0;
};

std::string epoch_log_csv(std::span<const EpochLog> log);

struct ModelCheckpoint {
  TrainConfig config;
  int epoch = -1;
  double val_psnr = 0.0;
  std::vector<ad::NamedArray> generator;

  /// Generator holding these weights.
  srnet::Generator<float> build() const;
};

void save_checkpoint(const ModelCheckpoint& ckpt, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

struct Dataset {
  PairSet train;
  PairSet val;
  /// Ids that must never reach a training batch.
  std::vector<std::string> held_out_ids;
};

struct TrainResult {
  ModelCheckpoint best;
  std::vector<EpochLog> log;
};

using ProgressFn = std::function<void(const EpochLog&)>;

/// One discriminator step then one generator step per batch. Throws
/// DivergenceError on a non-finite loss and ContractError if a held-out
/// case id reaches a batch.
TrainResult train(const TrainConfig& cfg, const Dataset& data, const ProgressFn& progress = {});

/// Runs the generator over (input, target) pairs; returns the mean PSNR and
/// SSIM at data range 1. max_pairs > 0 takes an evenly strided subset.
std::pair<double, double> validate_model(const srnet::Generator<float>& gen, const PairSet& pairs,
                                         std::size_t max_pairs = 0);

/// Super-resolves every DWI of lr onto the grid of lr.b0_hr, slice by slice.
/// The result carries the HR b0 and the LR DWIs' b-values and directions.
DwiCase infer_volume(const ModelCheckpoint& ckpt, const LowResCase& lr, Mode mode);
DwiCase infer_volume(const srnet::Generator<float>& gen, const LowResCase& lr, Mode mode);

}  // namespace refsr::train
