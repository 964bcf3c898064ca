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

#include <cstddef>

// Data-parallel inner loops. Every kernel has a portable scalar reference and
// (on x86-64) an AVX2/FMA variant; the variant is picked at runtime from CPUID
// and may be forced with REFSR_ISA=scalar. The two variants agree to rounding
// and are equivalence-tested against each other.

namespace refsr::simd {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa) noexcept;

/// Best variant this binary and CPU support.
Isa detected_isa() noexcept;

/// detected_isa() unless REFSR_ISA=scalar is set; resolved once.
Isa active_isa() noexcept;

/// Row-major C[M x N] = (accumulate ? C : 0) + op(A)[M x K] * op(B)[K x N].
/// op(A) is A, or A^T when trans_a (then A is stored K x M). Same for B.
struct GemmShape {
  bool trans_a = false;
  bool trans_b = false;
  std::size_t m = 0;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t lda = 0;
  std::size_t ldb = 0;
  std::size_t ldc = 0;
};

void sgemm(Isa isa, const GemmShape& s, const float* a, const float* b, float* c, bool accumulate);
void dgemm(Isa isa, const GemmShape& s, const double* a, const double* b, double* c, bool accumulate);

inline void gemm(const GemmShape& s, const float* a, const float* b, float* c, bool accumulate) {
  sgemm(active_isa(), s, a, b, c, accumulate);
}
inline void gemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate) {
  dgemm(active_isa(), s, a, b, c, accumulate);
}

/// y += alpha * x
void saxpy(Isa isa, std::size_t n, float alpha, const float* x, float* y);

/// Sum of (a[i] - b[i])^2, accumulated in double.
double sum_squared_diff(Isa isa, std::size_t n, const double* a, const double* b);

/// One bias-corrected adaptive-moment update over n parameters.
struct AdamStep {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
  float bias_correction1 = 1.0f;  // 1 - beta1^t
  float bias_correction2 = 1.0f;  // 1 - beta2^t
};
void adam_update(Isa isa, std::size_t n, const AdamStep& step, float* param, float* m, float* v,
                 const float* grad);

namespace scalar {
void sgemm(const GemmShape& s, const float* a, const float* b, float* c, bool accumulate);
void dgemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate);
void saxpy(std::size_t n, float alpha, const float* x, float* y);
double sum_squared_diff(std::size_t n, const double* a, const double* b);
void adam_update(std::size_t n, const AdamStep& step, float* param, float* m, float* v, const float* grad);
}  // namespace scalar

#if defined(REFSR_HAVE_AVX2)
namespace avx2 {
void sgemm(const GemmShape& s, const float* a, const float* b, float* c, bool accumulate);
void dgemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate);
void saxpy(std::size_t n, float alpha, const float* x, float* y);
double sum_squared_diff(std::size_t n, const double* a, const double* b);
void adam_update(std::size_t n, const AdamStep& step, float* param, float* m, float* v, const float* grad);
}  // namespace avx2
#endif

}  // namespace refsr::simd
