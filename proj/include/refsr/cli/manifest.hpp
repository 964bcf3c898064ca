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

#include <string>

#include "json.hpp"
#include "refsr/degrade/degrade.hpp"
#include "refsr/phantom/phantom.hpp"
#include "refsr/train/train.hpp"

namespace refsr {

void to_json(nlohmann::json& j, const PhantomConfig& c);
/// Overlays the keys present in j onto c.
void from_json(const nlohmann::json& j, PhantomConfig& c);
void to_json(nlohmann::json& j, const DegradeConfig& c);
void from_json(const nlohmann::json& j, DegradeConfig& c);

}  // namespace refsr

namespace refsr::cli {

/// Everything one experiment needs. Missing keys take their defaults.
/// Phantom defaults plus Rician noise at 3% of s0.
PhantomConfig experiment_phantom();

struct ExperimentManifest {
  PhantomConfig phantom = experiment_phantom();
  std::size_t cases = 10;
  double normalize_percentile = 99.5;
  DegradeConfig degrade{};
  train::TrainConfig train{};
  std::string output_dir = "refsr_out";

  /// Checks every config plus the cross-module constraints: enough cases to
  /// split, dims divisible by the degradation factors and the generator
  /// depth, and train/eval b-values produced by the phantom.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentManifest& m);
void from_json(const nlohmann::json& j, ExperimentManifest& m);

/// Empty path gives the default manifest. Unknown keys are rejected.
ExperimentManifest load_manifest(const std::string& path);
std::string dump_manifest(const ExperimentManifest& m);

}  // namespace refsr::cli
