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

#include "refsr/core/volume.hpp"

#include <algorithm>

#include "refsr/core/error.hpp"

namespace refsr {

std::string to_string(const Dims& d) {
  return std::to_string(d.z) + "x" + std::to_string(d.y) + "x" + std::to_string(d.x);
}

Volume::Volume(Dims dims, Spacing spacing, double intensity_scale)
    : dims_(dims), spacing_(spacing), intensity_scale_(intensity_scale), data_(dims.count(), 0.0) {}

Volume::Volume(Dims dims, Spacing spacing, double intensity_scale, std::vector<double> data)
    : dims_(dims), spacing_(spacing), intensity_scale_(intensity_scale), data_(std::move(data)) {
  if (data_.size() != dims_.count()) {
    throw ShapeError("volume data has " + std::to_string(data_.size()) + " values, dims " +
                     to_string(dims_) + " need " + std::to_string(dims_.count()));
  }
}

void Volume::validate() const {
  if (dims_.z < 1 || dims_.y < 1 || dims_.x < 1) {
    throw ValidationError("volume dims must be >= 1, got " + to_string(dims_));
  }
  if (data_.size() != dims_.count()) throw ValidationError("volume data size does not match dims");
  if (!(spacing_.z > 0.0 && spacing_.y > 0.0 && spacing_.x > 0.0)) {
    throw ValidationError("volume spacing must be positive");
  }
  if (!(intensity_scale_ > 0.0) || !std::isfinite(intensity_scale_)) {
    throw ValidationError("volume intensity_scale must be positive and finite");
  }
  const auto bad = std::find_if(data_.begin(), data_.end(), [](double v) { return !std::isfinite(v); });
  if (bad != data_.end()) {
    throw ValidationError("volume contains a non-finite value at index " +
                          std::to_string(bad - data_.begin()));
  }
}

void PhantomGeometry::validate(const Dims& dims) const {
  if (inner_radius.size() != dims.z || outer_radius.size() != dims.z) {
    throw GeometryError("geometry needs one radius pair per slice");
  }
  for (std::size_t z = 0; z < dims.z; ++z) {
    const double ri = inner_radius[z];
    const double ro = outer_radius[z];
    if (!(ri > 0.0 && ri < ro)) {
      throw GeometryError("slice " + std::to_string(z) + ": need 0 < inner_radius < outer_radius");
    }
    if (center_x - ro < 0.0 || center_x + ro > static_cast<double>(dims.x - 1) || center_y - ro < 0.0 ||
        center_y + ro > static_cast<double>(dims.y - 1)) {
      throw GeometryError("slice " + std::to_string(z) + ": annulus exceeds volume bounds " +
                          to_string(dims));
    }
  }
}

bool PhantomGeometry::contains(std::size_t z, double x, double y) const {
  const double dx = x - center_x;
  const double dy = y - center_y;
  const double r = std::sqrt(dx * dx + dy * dy);
  return r >= inner_radius[z] && r <= outer_radius[z];
}

void DwiImage::validate() const {
  volume.validate();
  if (!(b_value >= 0.0) || !std::isfinite(b_value)) throw ValidationError("b-value must be non-negative");
  if (b_value > 0.0 && std::abs(direction.norm() - 1.0) > 1e-9) {
    throw ValidationError("gradient direction must be unit length when b > 0");
  }
}

void DwiCase::validate() const {
  b0.validate();
  if (dwis.empty()) throw ValidationError("case " + case_id + ": no diffusion-weighted images");
  for (const auto& img : dwis) {
    img.validate();
    // The reference is b = 0 by default; a weakly weighted reference is allowed.
    if (!(img.b_value > b0.b_value)) {
      throw ValidationError("case " + case_id + ": reference b-value must be below every DWI b-value");
    }
    if (img.volume.dims() != b0.volume.dims() || img.volume.spacing() != b0.volume.spacing()) {
      throw ValidationError("case " + case_id + ": all volumes must share dims and spacing");
    }
  }
}

}  // namespace refsr
