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
#include <vector>

// Self-checks behind `refsr check` and the acceptance runner. Each returns
// one row per property with the measured worst-case value.

namespace refsr::cli {

struct CheckResult {
  std::string group;
  std::string name;
  bool passed = false;
  double value = 0.0;
  double limit = 0.0;
  std::string detail;
};

/// Finite-difference checks of every substrate primitive and of the full
/// generator plus four-term loss, three shapes each, in 64-bit.
std::vector<CheckResult> gradient_checks();
/// frequency_loss against pixel_loss on 100 random slice pairs.
std::vector<CheckResult> parseval_checks();
/// Linearity, constant preservation, affine exactness of the degradation.
std::vector<CheckResult> degradation_checks();
/// Separable SSIM against the brute-force oracle plus PSNR/SSIM identities.
std::vector<CheckResult> ssim_checks();
/// Noiseless tensor round trip, isotropic FA, MD rotation invariance, and
/// the helix-angle ramp.
std::vector<CheckResult> tensor_checks();

std::vector<CheckResult> all_checks();
/// Fixed-width pass/fail matrix, one line per check.
std::string format_matrix(const std::vector<CheckResult>& results);

}  // namespace refsr::cli
