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

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "refsr/core/volume.hpp"

namespace refsr {

/// Row-major 2D view.
struct SliceView {
  std::span<const double> data;
  std::size_t height = 0;
  std::size_t width = 0;
};

inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

/// 10 log10(range^2 / mse); +inf when mse is zero.
double psnr_from_mse(double mse, double data_range = 1.0);
double psnr(const SliceView& pred, const SliceView& gt, double data_range = 1.0);

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  std::size_t window = 11;
  double sigma = 1.5;
  double data_range = 1.0;
};

/// Mean SSIM over every fully overlapping window position (valid region),
/// Gaussian-weighted local statistics. Separable implementation.
double ssim(const SliceView& pred, const SliceView& gt, const SsimParams& params = {});

/// SSIM map over the valid region, row-major (h - w + 1) x (w - w + 1).
std::vector<double> ssim_map(const SliceView& pred, const SliceView& gt, const SsimParams& params = {});

namespace reference {
/// Direct per-window evaluation with the full 2D kernel.
double ssim_bruteforce(const SliceView& pred, const SliceView& gt, const SsimParams& params = {});
}  // namespace reference

enum class Method { kBilinear, kProposed, kConventional };
const char* method_name(Method m);

struct SliceMetrics {
  std::string case_id;
  std::size_t slice_index = 0;
  std::size_t image_index = 0;  // index of the DWI within its case
  double b_value = 0.0;
  Method method = Method::kBilinear;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

struct Aggregate {
  double psnr_mean = 0.0;
  double psnr_std = 0.0;
  double ssim_mean = 0.0;
  double ssim_std = 0.0;
  std::size_t count = 0;
  std::size_t excluded_infinite = 0;
};

struct MetricsReport {
  std::vector<SliceMetrics> rows;
  /// keyed by (b-value, method)
  std::map<std::pair<double, Method>, Aggregate> aggregates;

  const Aggregate& at(double b_value, Method m) const;
  std::string rows_csv() const;
  /// Tables keyed by b-value, methods as columns.
  std::string summary_json() const;
  /// One b-value: metric rows, "mean (std)"-style columns per method.
  std::string table_csv(double b_value, std::span<const Method> methods) const;
};

/// One method's reconstruction of one case, DWIs in the same order as the
/// reference case.
struct Prediction {
  Method method = Method::kBilinear;
  std::string case_id;
  std::vector<DwiImage> dwis;
};

struct EvalOptions {
  double data_range = 1.0;
  /// Restrict PSNR to the myocardium and SSIM to windows centred in it.
  bool myocardium_mask = false;
  /// Only DWIs with these b-values are scored; empty means all.
  std::vector<double> b_values;
  SsimParams ssim{};
};

MetricsReport evaluate(std::span<const Prediction> predictions, std::span<const DwiCase> reference,
                       const EvalOptions& options = {});

/// Population mean and standard deviation of the finite entries.
std::pair<double, double> mean_std(std::span<const double> values);

}  // namespace refsr
