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

#include "refsr/phantom/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "refsr/core/error.hpp"
#include "refsr/core/parallel.hpp"
#include "refsr/core/rng.hpp"

namespace refsr {

TensorField::TensorField(Dims dims, Spacing spacing) : mask(dims.count(), 0) {
  for (auto& c : components) c = Volume(dims, spacing);
}

std::array<double, 9> TensorField::tensor(std::size_t i) const {
  const double xx = components[kXX].data()[i], yy = components[kYY].data()[i], zz = components[kZZ].data()[i];
  const double xy = components[kXY].data()[i], xz = components[kXZ].data()[i], yz = components[kYZ].data()[i];
  return {xx, xy, xz, xy, yy, yz, xz, yz, zz};
}

void TensorField::set_tensor(std::size_t i, const std::array<double, 9>& d) {
  components[kXX].data()[i] = d[0];
  components[kYY].data()[i] = d[4];
  components[kZZ].data()[i] = d[8];
  components[kXY].data()[i] = 0.5 * (d[1] + d[3]);
  components[kXZ].data()[i] = 0.5 * (d[2] + d[6]);
  components[kYZ].data()[i] = 0.5 * (d[5] + d[7]);
}

void PhantomConfig::validate() const {
  if (dims.count() == 0) throw ConfigError("phantom dims must be >= 1");
  const auto& l = eigenvalues_mm2_per_s;
  if (!(l[0] >= l[1] && l[1] >= l[2] && l[2] > 0.0)) {
    throw ConfigError("phantom eigenvalues must satisfy l1 >= l2 >= l3 > 0");
  }
  if (n_directions < 6) throw ConfigError("phantom needs at least 6 gradient directions");
  if (!(s0_mean > 0.0)) throw ConfigError("s0_mean must be positive");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be non-negative");
  if (b_values.empty()) throw ConfigError("phantom needs at least one b-value");
  for (double b : b_values) {
    if (!(b > b_ref)) throw ConfigError("every b-value must exceed the reference b-value");
  }
  if (!(b_ref >= 0.0)) throw ConfigError("b_ref must be non-negative");
  if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0)) throw ConfigError("spacing must be positive");
  if (!(texture_amplitude >= 0.0 && texture_amplitude < 1.0)) throw ConfigError("texture_amplitude must lie in [0, 1)");
  if (!(body_radius_fraction >= 0.0) || !(tissue_s0_fraction >= 0.0) || !(blood_s0_fraction >= 0.0) ||
      !(tissue_diffusivity >= 0.0) || !(blood_diffusivity >= 0.0)) {
    throw ConfigError("background tissue parameters must be non-negative");
  }
}

std::vector<Vec3> make_direction_set(int n, std::uint64_t seed) {
  if (n < 6) throw ConfigError("direction set needs n >= 6, got " + std::to_string(n));
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  std::vector<Vec3> dirs;
  dirs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    dirs.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  if (seed != 0) {
    // Uniform random rotation from a random unit quaternion.
    Rng rng(seed);
    double q[4];
    double norm = 0.0;
    for (double& c : q) {
      c = rng.normal();
      norm += c * c;
    }
    norm = std::sqrt(norm);
    for (double& c : q) c /= norm;
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    const double r[9] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
                         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
    for (auto& d : dirs) {
      d = {r[0] * d.x + r[1] * d.y + r[2] * d.z, r[3] * d.x + r[4] * d.y + r[5] * d.z,
           r[6] * d.x + r[7] * d.y + r[8] * d.z};
    }
  }
  for (auto& d : dirs) d = d * (1.0 / d.norm());
  return dirs;
}

PhantomGeometry make_geometry(const PhantomConfig& cfg) {
  Rng rng(hash_combine(cfg.seed, 0x6e0));
  const double extent = static_cast<double>(std::min(cfg.dims.y, cfg.dims.x));
  const double outer0 = cfg.outer_radius_fraction * extent * (1.0 + cfg.geometry_jitter * rng.uniform(-1.0, 1.0));
  const double wall0 = cfg.wall_fraction * extent * (1.0 + cfg.geometry_jitter * rng.uniform(-1.0, 1.0));
  const double shift = 0.03 * extent;
  PhantomGeometry g;
  g.center_x = 0.5 * static_cast<double>(cfg.dims.x - 1) + shift * rng.uniform(-1.0, 1.0);
  g.center_y = 0.5 * static_cast<double>(cfg.dims.y - 1) + shift * rng.uniform(-1.0, 1.0);
  const double taper = 0.15 + 0.05 * rng.uniform(-1.0, 1.0);
  const double ripple_phase = 2.0 * std::numbers::pi * rng.uniform();
  const auto nz = static_cast<double>(cfg.dims.z);
  for (std::size_t z = 0; z < cfg.dims.z; ++z) {
    // Position along the long axis in (0, 1); the ventricle narrows toward t = 1.
    const double t = (static_cast<double>(z) + 0.5) / nz;
    const double ripple = 0.04 * std::sin(2.0 * std::numbers::pi * 1.5 * t + ripple_phase);
    const double outer = outer0 * (1.0 - taper * t + ripple);
    const double wall = wall0 * (1.0 - 0.3 * taper * t);
    g.outer_radius.push_back(outer);
    g.inner_radius.push_back(std::max(1.0, outer - wall));
  }
  g.validate(cfg.dims);
  return g;
}

namespace {

struct Wave {
  double kx, ky, kz, phase, amplitude;
};

// Band-limited texture: a sum of plane waves with wavelengths between 5 and
// 16 voxels, normalized to [-1, 1].
std::vector<Wave> make_texture(std::uint64_t seed) {
  Rng rng(hash_combine(seed, 0x7e7));
  std::vector<Wave> waves(12);
  double total = 0.0;
  for (auto& w : waves) {
    const double wavelength = rng.uniform(5.0, 16.0);
    const double k = 2.0 * std::numbers::pi / wavelength;
    const double cz = rng.uniform(-1.0, 1.0);
    const double phi = 2.0 * std::numbers::pi * rng.uniform();
    const double r = std::sqrt(1.0 - cz * cz);
    w = {k * r * std::cos(phi), k * r * std::sin(phi), k * cz, 2.0 * std::numbers::pi * rng.uniform(),
         rng.uniform(0.5, 1.0)};
    total += w.amplitude;
  }
  for (auto& w : waves) w.amplitude /= total;
  return waves;
}

double texture_at(const std::vector<Wave>& waves, double x, double y, double z) {
  double v = 0.0;
  for (const auto& w : waves) v += w.amplitude * std::cos(w.kx * x + w.ky * y + w.kz * z + w.phase);
  return v;
}

double quad_form(const std::array<double, 9>& d, const Vec3& g) {
  const Vec3 dg{d[0] * g.x + d[1] * g.y + d[2] * g.z, d[3] * g.x + d[4] * g.y + d[5] * g.z,
                d[6] * g.x + d[7] * g.y + d[8] * g.z};
  return g.dot(dg);
}

}  // namespace

std::pair<DwiCase, TensorField> make_phantom_case(const PhantomConfig& cfg) {
  cfg.validate();
  const PhantomGeometry geom = make_geometry(cfg);
  const Dims dims = cfg.dims;
  TensorField tensors(dims, cfg.spacing);
  Volume s0(dims, cfg.spacing);
  const auto waves = make_texture(cfg.seed);
  const double deg = std::numbers::pi / 180.0;
  const auto& lam = cfg.eigenvalues_mm2_per_s;
  const double body = cfg.body_radius_fraction * static_cast<double>(std::min(dims.y, dims.x));

  for (std::size_t z = 0; z < dims.z; ++z) {
    for (std::size_t y = 0; y < dims.y; ++y) {
      for (std::size_t x = 0; x < dims.x; ++x) {
        const std::size_t i = s0.index(z, y, x);
        const double px = static_cast<double>(x) - geom.center_x;
        const double py = static_cast<double>(y) - geom.center_y;
        const double r = std::sqrt(px * px + py * py);
        const double ri = geom.inner_radius[z];
        const double ro = geom.outer_radius[z];
        const double tex = texture_at(waves, static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
        if (r < ri || r > ro) {
          double frac = 0.0, diff = 0.0;
          if (r < ri) {
            frac = cfg.blood_s0_fraction;
            diff = cfg.blood_diffusivity;
          } else if (r < body) {
            frac = cfg.tissue_s0_fraction;
            diff = cfg.tissue_diffusivity;
          }
          if (frac > 0.0) {
            tensors.set_tensor(i, {diff, 0, 0, 0, diff, 0, 0, 0, diff});
            s0.data()[i] = cfg.s0_mean * frac * (1.0 + cfg.texture_amplitude * tex);
          }
          continue;
        }
        const double depth = (r - ri) / (ro - ri);
        const double ha = (cfg.ha_endo_deg + (cfg.ha_epi_deg - cfg.ha_endo_deg) * depth) * deg;
        const Vec3 radial{px / r, py / r, 0.0};
        const Vec3 circ{-py / r, px / r, 0.0};
        const Vec3 axial{0.0, 0.0, 1.0};
        const Vec3 e1 = circ * std::cos(ha) + axial * std::sin(ha);
        const Vec3& e2 = radial;
        const Vec3 e3 = e1.cross(e2);
        std::array<double, 9> d{};
        const Vec3 basis[3] = {e1, e2, e3};
        for (int k = 0; k < 3; ++k) {
          const double b[3] = {basis[k].x, basis[k].y, basis[k].z};
          for (int a = 0; a < 3; ++a) {
            for (int c = 0; c < 3; ++c) d[a * 3 + c] += lam[k] * b[a] * b[c];
          }
        }
        tensors.set_tensor(i, d);
        tensors.mask[i] = 1;
        s0.data()[i] = cfg.s0_mean * (1.0 + cfg.texture_amplitude * tex);
      }
    }
  }

  DwiCase c;
  c.case_id = cfg.case_id.empty() ? "case_" + std::to_string(cfg.seed) : cfg.case_id;
  c.geometry = geom;
  c.b0.b_value = cfg.b_ref;
  if (cfg.b_ref > 0.0) {
    // Weakly weighted reference: trace-weighted attenuation, direction free.
    Volume ref = s0;
    for (std::size_t i = 0; i < ref.data().size(); ++i) {
      const auto d = tensors.tensor(i);
      ref.data()[i] *= std::exp(-cfg.b_ref * (d[0] + d[4] + d[8]) / 3.0);
    }
    c.b0.volume = std::move(ref);
  } else {
    c.b0.volume = s0;
  }
  const auto dirs = make_direction_set(cfg.n_directions, 0);
  for (double b : cfg.b_values) {
    for (const auto& g : dirs) c.dwis.push_back(synthesize_dwi(tensors, s0, b, g));
  }
  return {std::move(c), std::move(tensors)};
}

DwiImage synthesize_dwi(const TensorField& tensors, const Volume& s0, double b, const Vec3& g) {
  if (!(b >= 0.0)) throw ConfigError("b-value must be non-negative");
  if (tensors.dims() != s0.dims()) throw ShapeError("tensor field and S0 dims differ");
  DwiImage img;
  img.b_value = b;
  img.direction = g;
  img.volume = Volume(s0.dims(), s0.spacing(), s0.intensity_scale());
  auto out = img.volume.data();
  const auto in = s0.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = in[i] * std::exp(-b * quad_form(tensors.tensor(i), g));
  }
  return img;
}

DwiImage add_rician_noise(const DwiImage& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  DwiImage out = img;
  if (sigma == 0.0) return out;
  auto data = out.volume.data();
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto [n1, n2] = keyed_normal_pair(seed, i);
    const double re = data[i] + sigma * n1;
    const double im = sigma * n2;
    data[i] = std::sqrt(re * re + im * im);
  }
  return out;
}

std::pair<DwiCase, TensorField> make_noisy_case(const PhantomConfig& cfg) {
  auto [c, tensors] = make_phantom_case(cfg);
  const double sigma = cfg.noise_sigma * cfg.s0_mean;
  if (sigma > 0.0) {
    c.b0 = add_rician_noise(c.b0, sigma, hash_combine(cfg.seed, 0x100000));
    parallel_for(c.dwis.size(), [&](std::size_t k) {
      c.dwis[k] = add_rician_noise(c.dwis[k], sigma, hash_combine(cfg.seed, 0x100001 + k));
    });
  }
  return {std::move(c), std::move(tensors)};
}

PhantomConfig cohort_member(const PhantomConfig& base, std::size_t index) {
  PhantomConfig cfg = base;
  cfg.seed = hash_combine(base.seed, 0xca5e0000 + index);
  char id[32];
  std::snprintf(id, sizeof id, "case_%02zu", index);
  cfg.case_id = id;
  return cfg;
}

}  // namespace refsr
