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

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "refsr/cli/manifest.hpp"
#include "refsr/dtfit/dtfit.hpp"
#include "refsr/metrics/metrics.hpp"

namespace refsr::cli {

/// One simulated heart after normalization and degradation.
struct CohortCase {
  DegradedCase data;
  PhantomGeometry geometry;
  /// Myocardium mask of the ground-truth tensor field.
  std::vector<std::uint8_t> myocardium;
};

/// Raw (unnormalized) noisy case i of the manifest's cohort and its
/// ground-truth tensors.
std::pair<DwiCase, TensorField> simulate_case(const ExperimentManifest& m, std::size_t index);
std::vector<CohortCase> build_cohort(const ExperimentManifest& m);

/// Writes b0 and every DWI as RVOL + JSON sidecars, plus geometry.json.
void write_case_dir(const DwiCase& c, const std::filesystem::path& dir);
DwiCase read_case_dir(const std::filesystem::path& dir);
/// <prefix>Dxx.rvol .. <prefix>Dyz.rvol plus <prefix>mask.rvol (0/1).
void write_tensor_field(const TensorField& t, const std::filesystem::path& dir, const std::string& prefix);
/// <prefix>md.rvol, <prefix>fa.rvol, <prefix>ha.rvol.
void write_maps(const DtMaps& maps, const std::filesystem::path& dir, const std::string& prefix);

/// 8-bit grayscale PNG; values are mapped from [lo, hi] and clamped.
void write_png_gray(const std::filesystem::path& path, std::span<const double> values, std::size_t height,
                    std::size_t width, double lo = 0.0, double hi = 1.0);
/// Panels of equal size placed left to right with a 2-pixel gap.
void write_montage(const std::filesystem::path& path, const std::vector<std::span<const double>>& panels,
                   std::size_t height, std::size_t width);

struct MapRow {
  std::string method;
  MapComparison error;
};

struct AblationResult {
  train::CaseSplit split;
  std::vector<train::EpochLog> proposed_log, conventional_log;
  MetricsReport report;
  /// Pooled over test cases, against maps fitted from the HR DWIs.
  std::vector<MapRow> maps;
  double table1_b = 0.0;
  std::vector<double> unseen_b;
  /// proposed > conventional > bilinear in mean PSNR and in mean SSIM.
  bool ordering_holds = false;
};

using LogFn = std::function<void(const std::string&)>;

/// Full ablation: cohort, split, both trainings, test-split evaluation,
/// tensor maps, and the report bundle written to out_dir.
AblationResult run_ablation(const ExperimentManifest& m, const std::filesystem::path& out_dir, const LogFn& log = {});

/// File names the ablation writes into out_dir, CSVs first.
std::vector<std::string> ablation_csv_files();

}  // namespace refsr::cli
