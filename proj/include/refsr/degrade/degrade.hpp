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

#include "refsr/core/volume.hpp"

namespace refsr {

enum class SliceMode { kBlock, kSliding };
enum class Boundary { kTruncate, kReflect };

struct DegradeConfig {
  int through_plane_factor = 4;
  int in_plane_factor = 4;
  SliceMode slice_mode = SliceMode::kBlock;
  Boundary boundary = Boundary::kTruncate;

  void validate() const;
};

/// Block mode: output slice k is the mean of slices f*k .. f*k+f-1.
/// Sliding mode: each slice is first replaced by the mean of itself and its
/// f-1 following neighbours, then every f-th slice is kept.
Volume downsample_through_plane(const Volume& vol, const DegradeConfig& cfg);

/// Bilinear sampling at LR pixel centres, align-corners-false: LR index j
/// reads HR coordinate (j + 0.5) * factor - 0.5. No prefilter.
Volume downsample_in_plane(const Volume& vol, int factor);

/// Separable linear interpolation onto a grid that is an integer multiple of
/// the source in every axis; same centre convention, edge samples clamped.
Volume upsample_to_grid(const Volume& vol, const Dims& target);

/// Through-plane then in-plane degradation of one volume.
Volume degrade_volume(const Volume& vol, const DegradeConfig& cfg);

/// The guide stays at high resolution; only the DWIs are degraded.
struct LowResCase {
  std::string case_id;
  DwiImage b0_hr;
  std::vector<DwiImage> dwis;
};

struct DegradedCase {
  DwiCase hr;
  LowResCase lr;
  /// Bilinear baseline: every LR DWI upsampled back to the HR grid.
  std::vector<DwiImage> lr_on_hr_grid;
};

DegradedCase degrade_case(const DwiCase& c, const DegradeConfig& cfg);

/// Upsamples every LR DWI of a low-resolution case onto the given grid.
std::vector<DwiImage> bilinear_baseline(const LowResCase& lr, const Dims& hr_dims);

}  // namespace refsr
