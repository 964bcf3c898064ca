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

// Compiled with -mavx2 -mfma -ffp-contract=off; only reached after a CPUID check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "refsr/simd/kernels.hpp"

namespace refsr::simd::avx2 {
namespace {

template <class T>
struct Lanes;

template <>
struct Lanes<float> {
  using Reg = __m256;
  static constexpr std::size_t kWidth = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg r) { _mm256_storeu_ps(p, r); }
  static Reg splat(float v) { return _mm256_set1_ps(v); }
  static Reg fma(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
};

template <>
struct Lanes<double> {
  using Reg = __m256d;
  static constexpr std::size_t kWidth = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg r) { _mm256_storeu_pd(p, r); }
  static Reg splat(double v) { return _mm256_set1_pd(v); }
  static Reg fma(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
};

constexpr std::size_t kMr = 6;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 96;
constexpr std::size_t kNc = 2048;

template <class T>
constexpr std::size_t kNr = 2 * Lanes<T>::kWidth;

// Packs op(A)[ic:ic+mc, pc:pc+kc] into row panels of kMr, k-major, zero padded.
template <class T>
void pack_a(const GemmShape& s, const T* a, std::size_t ic, std::size_t pc, std::size_t mc, std::size_t kc,
            T* out) {
  for (std::size_t r0 = 0; r0 < mc; r0 += kMr) {
    const std::size_t rows = std::min(kMr, mc - r0);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < kMr; ++r) {
        T v = T(0);
        if (r < rows) {
          const std::size_t i = ic + r0 + r;
          const std::size_t kk = pc + p;
          v = s.trans_a ? a[kk * s.lda + i] : a[i * s.lda + kk];
        }
        *out++ = v;
      }
    }
  }
}

// Packs op(B)[pc:pc+kc, jc:jc+nc] into column panels of kNr, k-major, zero padded.
template <class T>
void pack_b(const GemmShape& s, const T* b, std::size_t pc, std::size_t jc, std::size_t kc, std::size_t nc,
            T* out) {
  constexpr std::size_t nr = kNr<T>;
  for (std::size_t c0 = 0; c0 < nc; c0 += nr) {
    const std::size_t cols = std::min(nr, nc - c0);
    for (std::size_t p = 0; p < kc; ++p) {
      const std::size_t kk = pc + p;
      if (!s.trans_b && cols == nr) {
        const T* src = b + kk * s.ldb + jc + c0;
        std::copy(src, src + nr, out);
        out += nr;
        continue;
      }
      for (std::size_t c = 0; c < nr; ++c) {
        T v = T(0);
        if (c < cols) {
          const std::size_t j = jc + c0 + c;
          v = s.trans_b ? b[j * s.ldb + kk] : b[kk * s.ldb + j];
        }
        *out++ = v;
      }
    }
  }
}

template <class T>
void micro_kernel(std::size_t kc, const T* a, const T* b, std::size_t b_stride, T* c, std::size_t ldc,
                  bool overwrite, std::size_t rows, std::size_t cols) {
  using L = Lanes<T>;
  constexpr std::size_t w = L::kWidth;
  typename L::Reg acc[kMr][2];
#pragma GCC unroll 6
  for (std::size_t r = 0; r < kMr; ++r) {
    acc[r][0] = L::zero();
    acc[r][1] = L::zero();
  }
  for (std::size_t p = 0; p < kc; ++p) {
    const auto b0 = L::load(b);
    const auto b1 = L::load(b + w);
#pragma GCC unroll 6
    for (std::size_t r = 0; r < kMr; ++r) {
      const auto av = L::splat(a[r]);
      acc[r][0] = L::fma(av, b0, acc[r][0]);
      acc[r][1] = L::fma(av, b1, acc[r][1]);
    }
    a += kMr;
    b += b_stride;
  }
  if (rows == kMr && cols == 2 * w) {
#pragma GCC unroll 6
    for (std::size_t r = 0; r < kMr; ++r) {
      T* crow = c + r * ldc;
      if (overwrite) {
        L::store(crow, acc[r][0]);
        L::store(crow + w, acc[r][1]);
      } else {
        L::store(crow, L::add(L::load(crow), acc[r][0]));
        L::store(crow + w, L::add(L::load(crow + w), acc[r][1]));
      }
    }
    return;
  }
  alignas(32) T tile[kMr][2 * w];
  for (std::size_t r = 0; r < kMr; ++r) {
    L::store(tile[r], acc[r][0]);
    L::store(tile[r] + w, acc[r][1]);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    T* crow = c + r * ldc;
    for (std::size_t j = 0; j < cols; ++j) crow[j] = overwrite ? tile[r][j] : crow[j] + tile[r][j];
  }
}

template <class T>
void gemm_blocked(const GemmShape& s, const T* a, const T* b, T* c, bool accumulate) {
  constexpr std::size_t nr = kNr<T>;
  if (s.m == 0 || s.n == 0) return;
  if (s.k == 0) {
    if (!accumulate) {
      for (std::size_t i = 0; i < s.m; ++i) std::fill(c + i * s.ldc, c + i * s.ldc + s.n, T(0));
    }
    return;
  }
  thread_local std::vector<T> packed_a;
  thread_local std::vector<T> packed_b;
  packed_a.resize(kMc * kKc);
  packed_b.resize(kKc * (kNc + nr));
  for (std::size_t jc = 0; jc < s.n; jc += kNc) {
    const std::size_t nc = std::min(kNc, s.n - jc);
    for (std::size_t pc = 0; pc < s.k; pc += kKc) {
      const std::size_t kc = std::min(kKc, s.k - pc);
      const bool overwrite = pc == 0 && !accumulate;
      pack_b(s, b, pc, jc, kc, nc, packed_b.data());
      for (std::size_t ic = 0; ic < s.m; ic += kMc) {
        const std::size_t mc = std::min(kMc, s.m - ic);
        pack_a(s, a, ic, pc, mc, kc, packed_a.data());
        for (std::size_t jr = 0; jr < nc; jr += nr) {
          const std::size_t cols = std::min(nr, nc - jr);
          const T* bp = packed_b.data() + (jr / nr) * kc * nr;
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            const std::size_t rows = std::min(kMr, mc - ir);
            const T* ap = packed_a.data() + (ir / kMr) * kc * kMr;
            micro_kernel(kc, ap, bp, nr, c + (ic + ir) * s.ldc + jc + jr, s.ldc, overwrite, rows, cols);
          }
        }
      }
    }
  }
}

}  // namespace

void sgemm(const GemmShape& s, const float* a, const float* b, float* c, bool accumulate) {
  gemm_blocked(s, a, b, c, accumulate);
}

void dgemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate) {
  gemm_blocked(s, a, b, c, accumulate);
}

void saxpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(av, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] = std::fma(alpha, x[i], y[i]);
}

double sum_squared_diff(std::size_t n, const double* a, const double* b) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    total += d * d;
  }
  return total;
}

void adam_update(std::size_t n, const AdamStep& st, float* param, float* m, float* v, const float* grad) {
  const __m256 b1 = _mm256_set1_ps(st.beta1);
  const __m256 b2 = _mm256_set1_ps(st.beta2);
  const __m256 omb1 = _mm256_set1_ps(1.0f - st.beta1);
  const __m256 omb2 = _mm256_set1_ps(1.0f - st.beta2);
  const __m256 bc1 = _mm256_set1_ps(st.bias_correction1);
  const __m256 bc2 = _mm256_set1_ps(st.bias_correction2);
  const __m256 lr = _mm256_set1_ps(st.lr);
  const __m256 eps = _mm256_set1_ps(st.eps);
  std::size_t i = 0;
  // Same operation order as the scalar reference, without contraction, so the
  // two variants agree bit for bit.
  for (; i + 8 <= n; i += 8) {
    const __m256 g = _mm256_loadu_ps(grad + i);
    const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(omb1, g));
    const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                    _mm256_mul_ps(omb2, _mm256_mul_ps(g, g)));
    _mm256_storeu_ps(m + i, mi);
    _mm256_storeu_ps(v + i, vi);
    const __m256 m_hat = _mm256_div_ps(mi, bc1);
    const __m256 v_hat = _mm256_div_ps(vi, bc2);
    const __m256 upd = _mm256_mul_ps(lr, _mm256_div_ps(m_hat, _mm256_add_ps(_mm256_sqrt_ps(v_hat), eps)));
    _mm256_storeu_ps(param + i, _mm256_sub_ps(_mm256_loadu_ps(param + i), upd));
  }
  if (i < n) scalar::adam_update(n - i, st, param + i, m + i, v + i, grad + i);
}

}  // namespace refsr::simd::avx2
