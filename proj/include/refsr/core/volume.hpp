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
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace refsr {

/// Volume extent, (z, y, x) order.
struct Dims {
  std::size_t z = 1;
  std::size_t y = 1;
  std::size_t x = 1;

  std::size_t count() const noexcept { return z * y * x; }
  std::size_t slice_count() const noexcept { return y * x; }
  bool operator==(const Dims&) const = default;
};

std::string to_string(const Dims& d);

/// Voxel spacing in millimetres, (z, y, x) order.
struct Spacing {
  double z = 1.0;
  double y = 1.0;
  double x = 1.0;
  bool operator==(const Spacing&) const = default;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double dot(const Vec3& o) const noexcept { return x * o.x + y * o.y + z * o.z; }
  double norm() const noexcept { return std::sqrt(dot(*this)); }
  Vec3 cross(const Vec3& o) const noexcept {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
  Vec3 operator*(double s) const noexcept { return {x * s, y * s, z * s}; }
  Vec3 operator+(const Vec3& o) const noexcept { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const noexcept { return {x - o.x, y - o.y, z - o.z}; }
  bool operator==(const Vec3&) const = default;
};

/// A 3D scalar field stored z-major. Values are held in double precision in
/// memory; the on-disk format stores 32-bit reals.
class Volume {
 public:
  Volume() = default;
  explicit Volume(Dims dims, Spacing spacing = {}, double intensity_scale = 1.0);
  Volume(Dims dims, Spacing spacing, double intensity_scale, std::vector<double> data);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  double intensity_scale() const noexcept { return intensity_scale_; }
  void set_spacing(Spacing s) { spacing_ = s; }
  void set_intensity_scale(double s) { intensity_scale_ = s; }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  std::size_t index(std::size_t z, std::size_t y, std::size_t x) const noexcept {
    return (z * dims_.y + y) * dims_.x + x;
  }
  double at(std::size_t z, std::size_t y, std::size_t x) const noexcept { return data_[index(z, y, x)]; }
  double& at(std::size_t z, std::size_t y, std::size_t x) noexcept { return data_[index(z, y, x)]; }

  std::span<const double> slice(std::size_t z) const noexcept {
    return std::span<const double>(data_).subspan(z * dims_.slice_count(), dims_.slice_count());
  }
  std::span<double> slice(std::size_t z) noexcept {
    return std::span<double>(data_).subspan(z * dims_.slice_count(), dims_.slice_count());
  }

  /// Throws ValidationError if any invariant is broken.
  void validate() const;

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_{};
  Spacing spacing_{};
  double intensity_scale_ = 1.0;
  std::vector<double> data_;
};

/// In-plane annulus describing the synthetic left ventricle; all lengths in
/// voxels. The long axis is +z.
struct PhantomGeometry {
  double center_x = 0.0;
  double center_y = 0.0;
  std::vector<double> inner_radius;  // one entry per slice
  std::vector<double> outer_radius;

  /// Throws GeometryError unless the annulus is well formed and inside dims.
  void validate(const Dims& dims) const;
  bool contains(std::size_t z, double x, double y) const;
  bool operator==(const PhantomGeometry&) const = default;
};

struct DwiImage {
  Volume volume;
  double b_value = 0.0;
  Vec3 direction{};

  void validate() const;
};

struct DwiCase {
  std::string case_id;
  DwiImage b0;
  std::vector<DwiImage> dwis;
  std::optional<PhantomGeometry> geometry;

  const Dims& dims() const noexcept { return b0.volume.dims(); }
  void validate() const;
};

}  // namespace refsr
