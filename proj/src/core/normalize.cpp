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

#include "refsr/core/normalize.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "refsr/core/error.hpp"

namespace refsr {

double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw DegenerateInputError("percentile of an empty set");
  if (!(p > 0.0 && p <= 100.0)) throw ConfigError("percentile must lie in (0, 100]");
  std::vector<double> v(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double v_lo = v[lo];
  double v_hi = v_lo;
  if (hi != lo) v_hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return v_lo + (pos - static_cast<double>(lo)) * (v_hi - v_lo);
}

namespace {

void scale_volume(Volume& vol, double divisor) {
  for (double& v : vol.data()) v /= divisor;
  vol.set_intensity_scale(vol.intensity_scale() * divisor);
}

void scale_slices(Volume& vol, double p) {
  for (std::size_t z = 0; z < vol.dims().z; ++z) {
    auto s = vol.slice(z);
    const double f = percentile(s, p);
    if (!(f > 0.0)) continue;  // empty slice stays as is
    for (double& v : s) v /= f;
  }
}

}  // namespace

DwiCase normalize_case(const DwiCase& c, double percentile_value, NormalizeMode mode) {
  const auto b0 = c.b0.volume.data();
  if (std::none_of(b0.begin(), b0.end(), [](double v) { return v > 0.0; })) {
    throw DegenerateInputError("case " + c.case_id + ": b0 volume has no positive value");
  }
  DwiCase out = c;
  if (mode == NormalizeMode::kPerSlice) {
    scale_slices(out.b0.volume, percentile_value);
    for (auto& img : out.dwis) scale_slices(img.volume, percentile_value);
    return out;
  }
  const double s = percentile(b0, percentile_value);
  if (!(s > 0.0)) {
    throw DegenerateInputError("case " + c.case_id + ": b0 percentile is not positive");
  }
  scale_volume(out.b0.volume, s);
  for (auto& img : out.dwis) scale_volume(img.volume, s);
  return out;
}

}  // namespace refsr
