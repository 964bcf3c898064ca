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
#include <optional>
#include <span>
#include <vector>

#include "refsr/core/volume.hpp"
#include "refsr/phantom/phantom.hpp"

namespace refsr {

/// Log-linear ordinary least squares: per voxel, ln(S_i / S0) = -b_i g_i^T D g_i
/// over the six unique components of D. DWIs with b <= b0.b_value are ignored.
/// Voxels with any S_i <= 0 or S0 <= 0, or outside `mask` when given, are
/// left out of the result mask. Throws ConfigError on a rank-deficient scheme.
TensorField fit_tensor(const DwiCase& c, std::span<const std::uint8_t> mask = {});

/// Eigenvalues in descending order and the matching unit eigenvectors.
struct Eigen3 {
  std::array<double, 3> values{};
  std::array<Vec3, 3> vectors{};
};
Eigen3 eigen_symmetric(const std::array<double, 9>& d);

/// trace(D) / 3 inside the mask, 0 elsewhere.
Volume md(const TensorField& t);

/// sqrt(3/2) |lambda - mean| / |lambda| with negative eigenvalues clamped to
/// zero; a zero tensor has FA 0.
Volume fa(const TensorField& t);
double fa_from_eigenvalues(std::array<double, 3> l);

/// Helix angle in degrees, (-90, 90], of the primary eigenvector in the local
/// circumferential/long-axis plane. Voxels on the axis are dropped from
/// `valid` when it is supplied.
Volume ha(const TensorField& t, const PhantomGeometry& geom, std::vector<std::uint8_t>* valid = nullptr);

/// Absolute difference of two helix angles on the 180-degree circle.
double ha_circular_error(double a_deg, double b_deg);

struct DtMaps {
  Volume md;
  Volume fa;
  Volume ha;
  std::vector<std::uint8_t> mask;
};

DtMaps compute_maps(const TensorField& t, const PhantomGeometry& geom);

struct MapError {
  double mae = 0.0;
  double p95 = 0.0;
};

struct MapComparison {
  MapError md;
  MapError fa;
  MapError ha;
  std::size_t voxels = 0;
};

/// Masked MAE and 95th-percentile absolute error, HA taken on the circle.
MapComparison compare_maps(const DtMaps& test, const DtMaps& reference, std::span<const std::uint8_t> mask);

}  // namespace refsr
