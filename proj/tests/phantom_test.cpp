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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "refsr/core/error.hpp"
#include "refsr/dtfit/dtfit.hpp"
#include "refsr/phantom/phantom.hpp"

using namespace refsr;

namespace {

PhantomConfig small_config() {
  PhantomConfig cfg;
  cfg.dims = {8, 32, 32};
  cfg.n_directions = 12;
  cfg.b_values = {500};
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("direction set: unit, distinct, and isotropic in the limit") {
  for (int n : {6, 12, 30, 256}) {
    const auto dirs = make_direction_set(n);
    REQUIRE(dirs.size() == static_cast<std::size_t>(n));
    for (const auto& v : dirs) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      for (std::size_t j = i + 1; j < dirs.size(); ++j) {
        const double angle = std::acos(std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0));
        CHECK(angle > 1e-6);
      }
    }
  }
  // second moment (1/n) sum v v^T against I/3
  const auto dirs = make_direction_set(256);
  double m[3][3] = {};
  for (const auto& v : dirs) {
    const double c[3] = {v.x, v.y, v.z};
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) m[a][b] += c[a] * c[b] / 256.0;
  }
  double worst = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) worst = std::max(worst, std::abs(m[a][b] - (a == b ? 1.0 / 3.0 : 0.0)));
  CHECK(worst < 0.02);
  CHECK_THROWS_AS(make_direction_set(5), ConfigError);
  // a seeded rotation keeps the set unit length and changes it
  const auto rotated = make_direction_set(12, 99);
  CHECK(!(rotated[0] == make_direction_set(12)[0]));
  for (const auto& v : rotated) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
}

TEST_CASE("phantom tensors follow the configured frame") {
  const auto cfg = small_config();
  const auto [c, t] = make_phantom_case(cfg);
  const PhantomGeometry& g = *c.geometry;
  std::size_t wall = 0;
  for (std::size_t z = 0; z < cfg.dims.z; ++z) {
    for (std::size_t y = 0; y < cfg.dims.y; ++y) {
      for (std::size_t x = 0; x < cfg.dims.x; ++x) {
        const std::size_t i = c.b0.volume.index(z, y, x);
        if (!t.mask[i]) {
          // background: isotropic blood, tissue, or empty
          const auto d = t.tensor(i);
          CHECK((d[0] == 0.0 || d[0] == cfg.blood_diffusivity || d[0] == cfg.tissue_diffusivity));
          CHECK(d[4] == d[0]);
          CHECK(d[8] == d[0]);
          CHECK(d[1] == 0.0);
          CHECK((d[0] > 0.0) == (c.b0.volume.data()[i] > 0.0));
          continue;
        }
        ++wall;
        const auto e = eigen_symmetric(t.tensor(i));
        CHECK(std::abs(e.values[0] - 1.5e-3) < 1e-12);
        CHECK(std::abs(e.values[1] - 0.9e-3) < 1e-12);
        CHECK(std::abs(e.values[2] - 0.6e-3) < 1e-12);
        CHECK(e.values[2] >= 0.6e-3 - 1e-15);
        // primary eigenvector against the linear helix ramp
        const double px = double(x) - g.center_x, py = double(y) - g.center_y;
        const double r = std::hypot(px, py);
        const double depth = (r - g.inner_radius[z]) / (g.outer_radius[z] - g.inner_radius[z]);
        const double ha = (60.0 - 120.0 * depth) * std::numbers::pi / 180.0;
        const Vec3 circ{-py / r, px / r, 0.0};
        const Vec3 want = circ * std::cos(ha) + Vec3{0, 0, 1} * std::sin(ha);
        CHECK(std::abs(std::abs(e.vectors[0].dot(want)) - 1.0) < 1e-9);
      }
    }
  }
  CHECK(wall > 100);
}

TEST_CASE("empty background option") {
  auto cfg = small_config();
  cfg.body_radius_fraction = 0.0;
  cfg.blood_s0_fraction = 0.0;
  const auto [c, t] = make_phantom_case(cfg);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t.mask[i]) CHECK(c.b0.volume.data()[i] == 0.0);
  }
}

TEST_CASE("helix ramp midpoint aligns the fibre with the circumferential direction") {
  // depth 0.5 with +60 -> -60 gives HA 0
  PhantomConfig cfg = small_config();
  const double ha_mid = cfg.ha_endo_deg + (cfg.ha_epi_deg - cfg.ha_endo_deg) * 0.5;
  CHECK(ha_mid == 0.0);
}

TEST_CASE("synthesize_dwi closed forms") {
  auto cfg = small_config();
  const auto [c, t] = make_phantom_case(cfg);
  const Volume& s0 = c.b0.volume;
  const auto b0img = synthesize_dwi(t, s0, 0.0, {1, 0, 0});
  for (std::size_t i = 0; i < s0.data().size(); ++i) {
    if (t.mask[i]) CHECK(b0img.volume.data()[i] == s0.data()[i]);
  }
  // g along e1 -> exp(-b * lambda1)
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t.mask[i]) continue;
    const Vec3 e1 = eigen_symmetric(t.tensor(i)).vectors[0];
    TensorField single(Dims{1, 1, 1});
    single.set_tensor(0, t.tensor(i));
    single.mask[0] = 1;
    Volume one({1, 1, 1});
    one.data()[0] = s0.data()[i];
    const double s = synthesize_dwi(single, one, 500.0, e1).volume.data()[0];
    CHECK(s == doctest::Approx(s0.data()[i] * std::exp(-0.75)).epsilon(1e-12));
    break;
  }
  // monotone non-increasing in b
  const Vec3 g = make_direction_set(12)[4];
  Volume prev = synthesize_dwi(t, s0, 0.0, g).volume;
  for (double b : {250.0, 500.0, 1000.0}) {
    const Volume cur = synthesize_dwi(t, s0, b, g).volume;
    for (std::size_t i = 0; i < cur.data().size(); ++i) CHECK(cur.data()[i] <= prev.data()[i]);
    prev = cur;
  }
  CHECK_THROWS_AS(synthesize_dwi(t, s0, -1.0, g), ConfigError);
}

TEST_CASE("rician noise: identity at sigma 0, deterministic, Rayleigh mean") {
  DwiImage img;
  img.volume = Volume({100, 100, 100});
  CHECK(add_rician_noise(img, 0.0, 1).volume == img.volume);
  const auto a = add_rician_noise(img, 1.0, 77);
  const auto b = add_rician_noise(img, 1.0, 77);
  CHECK(a.volume == b.volume);
  double sum = 0.0;
  for (double v : a.volume.data()) sum += v;
  const double mean = sum / 1e6;
  CHECK(std::abs(mean - std::sqrt(std::numbers::pi / 2.0)) < 0.01);
  CHECK_THROWS_AS(add_rician_noise(img, -1.0, 1), ConfigError);
}

TEST_CASE("phantom generation is a pure function of its config") {
  auto cfg = small_config();
  cfg.noise_sigma = 0.05;
  const auto [c1, t1] = make_noisy_case(cfg);
  const auto [c2, t2] = make_noisy_case(cfg);
  CHECK(c1.b0.volume == c2.b0.volume);
  for (std::size_t k = 0; k < c1.dwis.size(); ++k) CHECK(c1.dwis[k].volume == c2.dwis[k].volume);
  CHECK(t1.mask == t2.mask);
  CHECK(cohort_member(cfg, 3).seed == cohort_member(cfg, 3).seed);
  CHECK(cohort_member(cfg, 3).seed != cohort_member(cfg, 4).seed);
  CHECK(cohort_member(cfg, 3).case_id == "case_03");
}

TEST_CASE("phantom config validation") {
  auto cfg = small_config();
  cfg.n_directions = 5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.eigenvalues_mm2_per_s = {1e-3, 2e-3, 0.5e-3};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.outer_radius_fraction = 0.6;
  CHECK_THROWS_AS(make_phantom_case(cfg), GeometryError);
}
