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
#include <string>
#include <utility>
#include <vector>

#include "refsr/core/volume.hpp"

namespace refsr {

/// Per-voxel symmetric diffusion tensor (mm^2/s) stored as six volumes plus a
/// mask. For phantoms the mask marks the myocardium; background tissue still
/// carries tensors.
struct TensorField {
  enum Component { kXX = 0, kYY, kZZ, kXY, kXZ, kYZ };
  static constexpr std::array<const char*, 6> kNames = {"Dxx", "Dyy", "Dzz", "Dxy", "Dxz", "Dyz"};

  std::array<Volume, 6> components;
  std::vector<std::uint8_t> mask;

  TensorField() = default;
  explicit TensorField(Dims dims, Spacing spacing = {});

  const Dims& dims() const noexcept { return components[0].dims(); }
  std::size_t size() const noexcept { return mask.size(); }

  /// Row-major 3x3 tensor at a flat voxel index.
  std::array<double, 9> tensor(std::size_t i) const;
  void set_tensor(std::size_t i, const std::array<double, 9>& d);
};

struct PhantomConfig {
  Dims dims{32, 64, 64};
  Spacing spacing{1.5, 1.5, 1.5};
  double ha_endo_deg = 60.0;
  double ha_epi_deg = -60.0;
  std::array<double, 3> eigenvalues_mm2_per_s{1.5e-3, 0.9e-3, 0.6e-3};
  double s0_mean = 1000.0;
  /// Rician noise standard deviation as a fraction of s0_mean.
  double noise_sigma = 0.0;
  int n_directions = 12;
  std::vector<double> b_values{500.0, 1000.0};
  /// b-value of the reference image; 0 models an unweighted b0.
  double b_ref = 0.0;
  std::uint64_t seed = 1;
  /// Defaults to "case_<seed>" when empty.
  std::string case_id;

  /// Geometry, as fractions of min(y, x); per-case jitter is seeded.
  double outer_radius_fraction = 0.36;
  double wall_fraction = 0.17;
  double geometry_jitter = 0.08;
  double texture_amplitude = 0.2;

  /// Surrounding tissue and blood pool. Both diffuse isotropically and lie
  /// outside the myocardial mask. body_radius_fraction 0 leaves the
  /// background empty.
  double body_radius_fraction = 0.75;
  double tissue_s0_fraction = 0.6;
  double tissue_diffusivity = 1.2e-3;
  double blood_s0_fraction = 1.1;
  double blood_diffusivity = 2.5e-3;

  void validate() const;
};

/// n unit vectors from the hemispherical Fibonacci lattice. A nonzero seed
/// applies one random rotation to the whole set.
std::vector<Vec3> make_direction_set(int n, std::uint64_t seed = 0);

/// Annulus for the configured seed.
PhantomGeometry make_geometry(const PhantomConfig& cfg);

/// Noiseless case plus the ground-truth tensor field.
std::pair<DwiCase, TensorField> make_phantom_case(const PhantomConfig& cfg);

/// S = S0 * exp(-b g^T D g) inside the mask, 0 outside.
DwiImage synthesize_dwi(const TensorField& tensors, const Volume& s0, double b, const Vec3& g);

/// Magnitude noise sqrt((v + n1)^2 + n2^2) from a counter-based stream keyed
/// on (seed, voxel index). sigma is in the image's own units.
DwiImage add_rician_noise(const DwiImage& img, double sigma, std::uint64_t seed);

/// make_phantom_case followed by independent noise on every image.
std::pair<DwiCase, TensorField> make_noisy_case(const PhantomConfig& cfg);

/// Config for the i-th case of a cohort: same settings, case-specific seed.
PhantomConfig cohort_member(const PhantomConfig& base, std::size_t index);

}  // namespace refsr
