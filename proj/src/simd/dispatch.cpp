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

#include <cstdlib>
#include <string_view>

#include "refsr/simd/kernels.hpp"

namespace refsr::simd {

const char* isa_name(Isa isa) noexcept { return isa == Isa::kAvx2 ? "avx2" : "scalar"; }

Isa detected_isa() noexcept {
#if defined(REFSR_HAVE_AVX2)
  static const bool ok = [] {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  }();
  return ok ? Isa::kAvx2 : Isa::kScalar;
#else
  return Isa::kScalar;
#endif
}

Isa active_isa() noexcept {
  static const Isa isa = [] {
    const char* env = std::getenv("REFSR_ISA");
    if (env && std::string_view(env) == "scalar") return Isa::kScalar;
    return detected_isa();
  }();
  return isa;
}

#if defined(REFSR_HAVE_AVX2)
#define REFSR_DISPATCH(isa, fn, ...) \
  ((isa) == Isa::kAvx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define REFSR_DISPATCH(isa, fn, ...) scalar::fn(__VA_ARGS__)
#endif

void sgemm(Isa isa, const GemmShape& s, const float* a, const float* b, float* c, bool accumulate) {
  REFSR_DISPATCH(isa, sgemm, s, a, b, c, accumulate);
}

void dgemm(Isa isa, const GemmShape& s, const double* a, const double* b, double* c, bool accumulate) {
  REFSR_DISPATCH(isa, dgemm, s, a, b, c, accumulate);
}

void saxpy(Isa isa, std::size_t n, float alpha, const float* x, float* y) {
  REFSR_DISPATCH(isa, saxpy, n, alpha, x, y);
}

double sum_squared_diff(Isa isa, std::size_t n, const double* a, const double* b) {
  return REFSR_DISPATCH(isa, sum_squared_diff, n, a, b);
}

void adam_update(Isa isa, std::size_t n, const AdamStep& step, float* param, float* m, float* v,
                 const float* grad) {
  REFSR_DISPATCH(isa, adam_update, n, step, param, m, v, grad);
}

}  // namespace refsr::simd
