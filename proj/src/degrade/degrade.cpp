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

#include "refsr/degrade/degrade.hpp"

#include <algorithm>
#include <cmath>

#include "refsr/core/error.hpp"
#include "refsr/core/parallel.hpp"

namespace refsr {

void DegradeConfig::validate() const {
  if (through_plane_factor < 1 || in_plane_factor < 1) throw ConfigError("degradation factors must be >= 1");
}

Volume downsample_through_plane(const Volume& vol, const DegradeConfig& cfg) {
  cfg.validate();
  const Dims in = vol.dims();
  const auto f = static_cast<std::size_t>(cfg.through_plane_factor);
  Spacing sp = vol.spacing();
  sp.z *= static_cast<double>(f);

  if (cfg.slice_mode == SliceMode::kBlock) {
    if (in.z % f != 0) {
      throw ShapeError("through-plane block averaging needs z divisible by " + std::to_string(f) + ", got " +
                       to_string(in));
    }
    Volume out({in.z / f, in.y, in.x}, sp, vol.intensity_scale());
    const double inv = 1.0 / static_cast<double>(f);
    for (std::size_t k = 0; k < out.dims().z; ++k) {
      auto dst = out.slice(k);
      for (std::size_t s = 0; s < f; ++s) {
        const auto src = vol.slice(k * f + s);
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      }
      for (double& v : dst) v *= inv;
    }
    return out;
  }

  const std::size_t nz = (in.z + f - 1) / f;
  Volume out({nz, in.y, in.x}, sp, vol.intensity_scale());
  const auto zmax = static_cast<std::ptrdiff_t>(in.z) - 1;
  for (std::size_t k = 0; k < nz; ++k) {
    auto dst = out.slice(k);
    std::size_t used = 0;
    for (std::size_t s = 0; s < f; ++s) {
      auto z = static_cast<std::ptrdiff_t>(k * f + s);
      if (z > zmax) {
        if (cfg.boundary == Boundary::kTruncate) continue;
        z = std::max<std::ptrdiff_t>(0, 2 * zmax - z);
      }
      const auto src = vol.slice(static_cast<std::size_t>(z));
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
      ++used;
    }
    const double inv = 1.0 / static_cast<double>(used);
    for (double& v : dst) v *= inv;
  }
  return out;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double w_hi;  // weight of hi; lo gets 1 - w_hi
};

// Linear-interpolation taps for sampling a line of length n at coordinate c.
Tap tap_at(double c, std::size_t n) {
  c = std::clamp(c, 0.0, static_cast<double>(n - 1));
  const auto lo = static_cast<std::size_t>(std::floor(c));
  const std::size_t hi = std::min(lo + 1, n - 1);
  return {lo, hi, c - static_cast<double>(lo)};
}

}  // namespace

Volume downsample_in_plane(const Volume& vol, int factor) {
  if (factor < 1) throw ConfigError("in-plane factor must be >= 1");
  const Dims in = vol.dims();
  const auto f = static_cast<std::size_t>(factor);
  if (in.y % f != 0 || in.x % f != 0) {
    throw ShapeError("in-plane downsampling needs y and x divisible by " + std::to_string(f) + ", got " +
                     to_string(in));
  }
  Spacing sp = vol.spacing();
  sp.y *= static_cast<double>(f);
  sp.x *= static_cast<double>(f);
  const Dims od{in.z, in.y / f, in.x / f};
  Volume out(od, sp, vol.intensity_scale());
  const double fd = static_cast<double>(f);
  std::vector<Tap> ty(od.y), tx(od.x);
  for (std::size_t j = 0; j < od.y; ++j) ty[j] = tap_at((static_cast<double>(j) + 0.5) * fd - 0.5, in.y);
  for (std::size_t i = 0; i < od.x; ++i) tx[i] = tap_at((static_cast<double>(i) + 0.5) * fd - 0.5, in.x);
  for (std::size_t z = 0; z < od.z; ++z) {
    for (std::size_t j = 0; j < od.y; ++j) {
      const Tap& a = ty[j];
      for (std::size_t i = 0; i < od.x; ++i) {
        const Tap& b = tx[i];
        const double top = (1.0 - b.w_hi) * vol.at(z, a.lo, b.lo) + b.w_hi * vol.at(z, a.lo, b.hi);
        const double bot = (1.0 - b.w_hi) * vol.at(z, a.hi, b.lo) + b.w_hi * vol.at(z, a.hi, b.hi);
        out.at(z, j, i) = (1.0 - a.w_hi) * top + a.w_hi * bot;
      }
    }
  }
  return out;
}

namespace {

std::vector<Tap> upsample_taps(std::size_t src, std::size_t dst) {
  const double f = static_cast<double>(dst) / static_cast<double>(src);
  std::vector<Tap> taps(dst);
  for (std::size_t t = 0; t < dst; ++t) taps[t] = tap_at((static_cast<double>(t) + 0.5) / f - 0.5, src);
  return taps;
}

}  // namespace

Volume upsample_to_grid(const Volume& vol, const Dims& target) {
  const Dims in = vol.dims();
  if (target.z % in.z != 0 || target.y % in.y != 0 || target.x % in.x != 0 || target.z < in.z ||
      target.y < in.y || target.x < in.x) {
    throw ShapeError("upsampling target " + to_string(target) + " is not an integer multiple of " + to_string(in));
  }
  const auto tz = upsample_taps(in.z, target.z);
  const auto ty = upsample_taps(in.y, target.y);
  const auto tx = upsample_taps(in.x, target.x);

  // x pass, then y, then z; each pass is a 1D linear interpolation.
  std::vector<double> bx(in.z * in.y * target.x);
  for (std::size_t z = 0; z < in.z; ++z) {
    for (std::size_t y = 0; y < in.y; ++y) {
      const double* src = &vol.data()[vol.index(z, y, 0)];
      double* dst = &bx[(z * in.y + y) * target.x];
      for (std::size_t x = 0; x < target.x; ++x) {
        dst[x] = (1.0 - tx[x].w_hi) * src[tx[x].lo] + tx[x].w_hi * src[tx[x].hi];
      }
    }
  }
  std::vector<double> by(in.z * target.y * target.x);
  for (std::size_t z = 0; z < in.z; ++z) {
    for (std::size_t y = 0; y < target.y; ++y) {
      const double* lo = &bx[(z * in.y + ty[y].lo) * target.x];
      const double* hi = &bx[(z * in.y + ty[y].hi) * target.x];
      double* dst = &by[(z * target.y + y) * target.x];
      const double w = ty[y].w_hi;
      for (std::size_t x = 0; x < target.x; ++x) dst[x] = (1.0 - w) * lo[x] + w * hi[x];
    }
  }
  Spacing sp = vol.spacing();
  sp.z *= static_cast<double>(in.z) / static_cast<double>(target.z);
  sp.y *= static_cast<double>(in.y) / static_cast<double>(target.y);
  sp.x *= static_cast<double>(in.x) / static_cast<double>(target.x);
  Volume out(target, sp, vol.intensity_scale());
  const std::size_t plane = target.y * target.x;
  for (std::size_t z = 0; z < target.z; ++z) {
    const double* lo = &by[tz[z].lo * plane];
    const double* hi = &by[tz[z].hi * plane];
    const double w = tz[z].w_hi;
    auto dst = out.slice(z);
    for (std::size_t i = 0; i < plane; ++i) dst[i] = (1.0 - w) * lo[i] + w * hi[i];
  }
  return out;
}

Volume degrade_volume(const Volume& vol, const DegradeConfig& cfg) {
  return downsample_in_plane(downsample_through_plane(vol, cfg), cfg.in_plane_factor);
}

std::vector<DwiImage> bilinear_baseline(const LowResCase& lr, const Dims& hr_dims) {
  std::vector<DwiImage> out(lr.dwis.size());
  parallel_for(lr.dwis.size(), [&](std::size_t k) {
    out[k].b_value = lr.dwis[k].b_value;
    out[k].direction = lr.dwis[k].direction;
    out[k].volume = upsample_to_grid(lr.dwis[k].volume, hr_dims);
  });
  return out;
}

DegradedCase degrade_case(const DwiCase& c, const DegradeConfig& cfg) {
  cfg.validate();
  DegradedCase out;
  out.hr = c;
  out.lr.case_id = c.case_id;
  out.lr.b0_hr = c.b0;
  out.lr.dwis.resize(c.dwis.size());
  parallel_for(c.dwis.size(), [&](std::size_t k) {
    out.lr.dwis[k].b_value = c.dwis[k].b_value;
    out.lr.dwis[k].direction = c.dwis[k].direction;
    out.lr.dwis[k].volume = degrade_volume(c.dwis[k].volume, cfg);
  });
  out.lr_on_hr_grid = bilinear_baseline(out.lr, c.dims());
  return out;
}

}  // namespace refsr
