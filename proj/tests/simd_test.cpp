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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "doctest.h"
#include "refsr/core/rng.hpp"
#include "refsr/simd/kernels.hpp"

using namespace refsr;
using namespace refsr::simd;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(rng.uniform(-1.0, 1.0));
  return v;
}

// Plain triple loop in double; independent of both kernel variants.
template <class T>
std::vector<double> naive_gemm(const GemmShape& s, const std::vector<T>& a, const std::vector<T>& b,
                               const std::vector<T>& c0, bool accumulate) {
  std::vector<double> c(s.m * s.ldc);
  for (std::size_t i = 0; i < s.m; ++i) {
    for (std::size_t j = 0; j < s.n; ++j) {
      double acc = accumulate ? static_cast<double>(c0[i * s.ldc + j]) : 0.0;
      for (std::size_t p = 0; p < s.k; ++p) {
        const double av = s.trans_a ? a[p * s.lda + i] : a[i * s.lda + p];
        const double bv = s.trans_b ? b[j * s.ldb + p] : b[p * s.ldb + j];
        acc += av * bv;
      }
      c[i * s.ldc + j] = acc;
    }
  }
  return c;
}

template <class T>
void check_gemm_variants(std::size_t m, std::size_t n, std::size_t k, bool ta, bool tb, bool accumulate,
                         double tol) {
  GemmShape s{ta, tb, m, n, k, ta ? m : k, tb ? k : n, n + 3};
  const auto a = random_vec<T>((ta ? k : m) * s.lda, 1 + m);
  const auto b = random_vec<T>((tb ? n : k) * s.ldb, 2 + n);
  const auto c0 = random_vec<T>(m * s.ldc, 3 + k);
  const auto want = naive_gemm(s, a, b, c0, accumulate);
  for (Isa isa : {Isa::kScalar, detected_isa()}) {
    auto c = c0;
    if constexpr (std::is_same_v<T, float>) {
      sgemm(isa, s, a.data(), b.data(), c.data(), accumulate);
    } else {
      dgemm(isa, s, a.data(), b.data(), c.data(), accumulate);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) worst = std::max(worst, std::abs(c[i * s.ldc + j] - want[i * s.ldc + j]));
      // padding columns beyond n are untouched
      for (std::size_t j = n; j < s.ldc; ++j) CHECK(c[i * s.ldc + j] == c0[i * s.ldc + j]);
    }
    CHECK_MESSAGE(worst < tol, isa_name(isa), " m=", m, " n=", n, " k=", k, " ta=", ta, " tb=", tb);
  }
}

}  // namespace

TEST_CASE("gemm variants agree with a naive product") {
  const std::size_t shapes[][3] = {{1, 1, 1}, {7, 19, 5}, {6, 16, 256}, {13, 33, 300}, {100, 70, 9}, {97, 2100, 17}};
  for (const auto& sh : shapes) {
    for (bool ta : {false, true}) {
      for (bool tb : {false, true}) {
        for (bool acc : {false, true}) {
          check_gemm_variants<float>(sh[0], sh[1], sh[2], ta, tb, acc, 2e-5 * std::sqrt(double(sh[2])) + 1e-6);
          check_gemm_variants<double>(sh[0], sh[1], sh[2], ta, tb, acc, 1e-12);
        }
      }
    }
  }
}

TEST_CASE("gemm with k = 0 clears or keeps C") {
  GemmShape s{false, false, 2, 3, 0, 1, 3, 3};
  std::vector<float> c(6, 5.0f);
  float dummy = 0.0f;
  for (Isa isa : {Isa::kScalar, detected_isa()}) {
    auto cc = c;
    sgemm(isa, s, &dummy, &dummy, cc.data(), true);
    CHECK(cc == c);
    sgemm(isa, s, &dummy, &dummy, cc.data(), false);
    for (float v : cc) CHECK(v == 0.0f);
  }
}

TEST_CASE("elementwise kernels: scalar and vector variants agree") {
  const std::size_t n = 1003;
  const auto x = random_vec<float>(n, 11);
  auto y1 = random_vec<float>(n, 12);
  auto y2 = y1;
  saxpy(Isa::kScalar, n, 0.37f, x.data(), y1.data());
  saxpy(detected_isa(), n, 0.37f, x.data(), y2.data());
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-6f);

  const auto a = random_vec<double>(n, 13);
  const auto b = random_vec<double>(n, 14);
  const double s1 = sum_squared_diff(Isa::kScalar, n, a.data(), b.data());
  const double s2 = sum_squared_diff(detected_isa(), n, a.data(), b.data());
  CHECK(std::abs(s1 - s2) <= 1e-12 * s1);
}

TEST_CASE("adam kernel: variants are bitwise identical") {
  const std::size_t n = 517;
  const auto g = random_vec<float>(n, 21);
  auto p1 = random_vec<float>(n, 22);
  auto m1 = std::vector<float>(n, 0.0f), v1 = m1;
  auto p2 = p1, m2 = m1, v2 = v1;
  AdamStep st;
  st.lr = 1e-3f;
  for (int t = 1; t <= 3; ++t) {
    st.bias_correction1 = 1.0f - std::pow(st.beta1, float(t));
    st.bias_correction2 = 1.0f - std::pow(st.beta2, float(t));
    adam_update(Isa::kScalar, n, st, p1.data(), m1.data(), v1.data(), g.data());
    adam_update(detected_isa(), n, st, p2.data(), m2.data(), v2.data(), g.data());
  }
  CHECK(p1 == p2);
  CHECK(m1 == m2);
  CHECK(v1 == v2);
}

TEST_CASE("sgemm throughput report" * doctest::skip(std::getenv("REFSR_BENCH") == nullptr)) {
  const std::size_t m = std::getenv("BM") ? std::atoi(std::getenv("BM")) : 32, n = 4096, k = 288;
  const auto a = random_vec<float>(m * k, 1);
  const auto b = random_vec<float>(k * n, 2);
  std::vector<float> c(m * n);
  for (Isa isa : {Isa::kScalar, detected_isa()}) {
    GemmShape s{false, false, m, n, k, k, n, n};
    const int reps = isa == Isa::kScalar ? 3 : 30;
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) sgemm(isa, s, a.data(), b.data(), c.data(), false);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s: %.1f GFLOP/s\n", isa_name(isa), 2.0 * m * n * k * reps / sec * 1e-9);
  }
}
