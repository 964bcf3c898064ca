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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "refsr/core/error.hpp"
#include "refsr/core/rng.hpp"
#include "refsr/metrics/metrics.hpp"

using namespace refsr;

namespace {

std::vector<double> random_slice(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform();
  return v;
}

}  // namespace

TEST_CASE("psnr formula") {
  CHECK(psnr_from_mse(0.01, 1.0) == 20.0);
  std::vector<double> a(64, 0.0), b(64, 0.1);
  CHECK(psnr({a, 8, 8}, {b, 8, 8}) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(std::isinf(psnr({a, 8, 8}, {a, 8, 8})));
  CHECK_THROWS_AS(psnr({a, 8, 8}, {b, 4, 16}), ShapeError);
}

TEST_CASE("psnr decreases with noise amplitude") {
  const auto gt = random_slice(64 * 64, 1);
  Rng rng(2);
  std::vector<double> noise(gt.size());
  for (double& n : noise) n = rng.normal();
  double prev = kPsnrInfinite;
  for (double sigma : {0.01, 0.02, 0.05}) {
    std::vector<double> p(gt);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] += sigma * noise[i];
    const double v = psnr({p, 64, 64}, {gt, 64, 64});
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("ssim matches the brute-force oracle") {
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto a = random_slice(32 * 32, s);
    const auto b = random_slice(32 * 32, s + 1000);
    const double fast = ssim({a, 32, 32}, {b, 32, 32});
    const double slow = reference::ssim_bruteforce({a, 32, 32}, {b, 32, 32});
    CHECK(std::abs(fast - slow) < 1e-8);
    CHECK(std::abs(fast - ssim({b, 32, 32}, {a, 32, 32})) < 1e-12);
    CHECK(fast >= -1.0);
    CHECK(fast <= 1.0);
  }
}

TEST_CASE("ssim identity and size checks") {
  const auto a = random_slice(20 * 24, 4);
  CHECK(ssim({a, 20, 24}, {a, 20, 24}) == 1.0);
  auto b = a;
  b[100] += 1e-3;
  CHECK(ssim({a, 20, 24}, {b, 20, 24}) < 1.0);
  const std::vector<double> tiny(100, 0.0);
  CHECK_THROWS_AS(ssim({tiny, 10, 10}, {tiny, 10, 10}), ShapeError);
}

TEST_CASE("evaluate: counts, identity, permutation invariance") {
  std::vector<DwiCase> ref(2);
  for (std::size_t c = 0; c < 2; ++c) {
    ref[c].case_id = "c" + std::to_string(c);
    ref[c].b0.volume = Volume({3, 16, 16});
    for (int k = 0; k < 4; ++k) {
      DwiImage img;
      img.b_value = k < 2 ? 500 : 1000;
      img.direction = {0, 0, 1};
      img.volume = Volume({3, 16, 16}, {}, 1.0, random_slice(3 * 256, 10 * c + k));
      ref[c].dwis.push_back(img);
    }
  }
  std::vector<Prediction> same;
  for (const auto& c : ref) same.push_back({Method::kProposed, c.case_id, c.dwis});
  std::vector<Prediction> noisy;
  for (const auto& c : ref) {
    Prediction p{Method::kBilinear, c.case_id, c.dwis};
    for (auto& img : p.dwis)
      for (double& v : img.volume.data()) v *= 0.9;
    noisy.push_back(p);
  }
  std::vector<Prediction> all = same;
  all.insert(all.end(), noisy.begin(), noisy.end());
  const MetricsReport r = evaluate(all, ref);
  CHECK(r.rows.size() == 2 * 2 * 4 * 3);
  CHECK(r.at(500, Method::kProposed).ssim_mean == 1.0);
  CHECK(r.at(500, Method::kProposed).ssim_std == 0.0);
  CHECK(r.at(1000, Method::kBilinear).count == 2 * 2 * 3);
  CHECK(r.at(500, Method::kBilinear).psnr_mean < 40.0);

  std::vector<double> vals;
  for (const auto& row : r.rows)
    if (row.method == Method::kBilinear) vals.push_back(row.psnr_db);
  auto [m0, s0] = mean_std(vals);
  std::reverse(vals.begin(), vals.end());
  auto [m1, s1] = mean_std(vals);
  CHECK(std::abs(m0 - m1) < 1e-12);
  CHECK(std::abs(s0 - s1) < 1e-12);

  std::vector<Prediction> unknown = {{Method::kProposed, "nope", ref[0].dwis}};
  CHECK_THROWS_AS(evaluate(unknown, ref), DataError);

  EvalOptions only500;
  only500.b_values = {500};
  CHECK(evaluate(all, ref, only500).rows.size() == 2 * 2 * 2 * 3);
}
