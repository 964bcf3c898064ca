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
#include <vector>

#include "refsr/simd/kernels.hpp"

namespace refsr::simd::scalar {
namespace {

template <class T>
void gemm_ref(const GemmShape& s, const T* a, const T* b, T* c, bool accumulate) {
  if (!accumulate) {
    for (std::size_t i = 0; i < s.m; ++i) {
      for (std::size_t j = 0; j < s.n; ++j) c[i * s.ldc + j] = T(0);
    }
  }
  if (s.k == 0) return;
  // Row of op(B) gathered into a contiguous buffer when B is transposed.
  std::vector<T> brow(s.trans_b ? s.n : 0);
  std::vector<T> acc(s.n);
  for (std::size_t i = 0; i < s.m; ++i) {
    std::fill(acc.begin(), acc.end(), T(0));
    for (std::size_t p = 0; p < s.k; ++p) {
      const T av = s.trans_a ? a[p * s.lda + i] : a[i * s.lda + p];
      const T* bp;
      if (s.trans_b) {
        for (std::size_t j = 0; j < s.n; ++j) brow[j] = b[j * s.ldb + p];
        bp = brow.data();
      } else {
        bp = b + p * s.ldb;
      }
      for (std::size_t j = 0; j < s.n; ++j) acc[j] += av * bp[j];
    }
    T* crow = c + i * s.ldc;
    for (std::size_t j = 0; j < s.n; ++j) crow[j] += acc[j];
  }
}

}  // namespace

void sgemm(const GemmShape& s, const float* a, const float* b, float* c, bool accumulate) {
  gemm_ref(s, a, b, c, accumulate);
}

void dgemm(const GemmShape& s, const double* a, const double* b, double* c, bool accumulate) {
  gemm_ref(s, a, b, c, accumulate);
}

void saxpy(std::size_t n, float alpha, const float* x, float* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double sum_squared_diff(std::size_t n, const double* a, const double* b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

void adam_update(std::size_t n, const AdamStep& st, float* param, float* m, float* v, const float* grad) {
  const float one_minus_b1 = 1.0f - st.beta1;
  const float one_minus_b2 = 1.0f - st.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const float g = grad[i];
    m[i] = st.beta1 * m[i] + one_minus_b1 * g;
    v[i] = st.beta2 * v[i] + one_minus_b2 * (g * g);
    const float m_hat = m[i] / st.bias_correction1;
    const float v_hat = v[i] / st.bias_correction2;
    param[i] -= st.lr * (m_hat / (std::sqrt(v_hat) + st.eps));
  }
}

}  // namespace refsr::simd::scalar
