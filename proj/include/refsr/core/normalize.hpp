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

#include <span>

#include "refsr/core/volume.hpp"

namespace refsr {

enum class NormalizeMode {
  kPerCase,   // every volume divided by one b0-derived factor
  kPerSlice,  // each slice of each volume divided by its own percentile
};

/// Linear-interpolated percentile (p in (0, 100]) of the values.
double percentile(std::span<const double> values, double p);

/// Divides every volume of the case by the given percentile of the b0
/// volume and multiplies each intensity_scale by the same factor, so
/// DWI/b0 ratios survive. Per-slice mode cannot be expressed by a single
/// intensity_scale; it leaves intensity_scale untouched.
DwiCase normalize_case(const DwiCase& c, double percentile_value = 99.5,
                       NormalizeMode mode = NormalizeMode::kPerCase);

}  // namespace refsr
