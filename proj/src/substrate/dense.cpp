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

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <map>
#include <mutex>

#include "graph.hpp"
#include "refsr/core/error.hpp"
#include "refsr/core/parallel.hpp"
#include "refsr/simd/kernels.hpp"

namespace refsr::ad {

namespace {

struct ConvGeom {
  std::size_t batch, cin, h, w, cout, k, stride, pad, ho, wo;
  std::size_t patch() const { return cin * k * k; }
  std::size_t out_px() const { return ho * wo; }
  bool pointwise() const { return k == 1 && stride == 1 && pad == 0; }
};

// Output columns [lo, hi) whose input column ox * stride + kx - pad lies
// inside [0, w).
struct Span {
  std::size_t lo, hi;
};
inline Span valid_span(const ConvGeom& g, std::size_t kx) {
  const auto s = static_cast<std::ptrdiff_t>(g.stride);
  const auto off = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.pad);
  std::ptrdiff_t lo = off >= 0 ? 0 : (-off + s - 1) / s;
  std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(g.w) - 1 - off);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(g.wo));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

template <class T>
void im2col(const ConvGeom& g, const T* x, T* col) {
  const std::size_t n = g.out_px();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* dst = col + ((c * g.k + ky) * g.k + kx) * n;
        const Span sp = valid_span(g, kx);
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          T* row = dst + oy * g.wo;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill_n(row, g.wo, T(0));
            continue;
          }
          const T* src = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w + sp.lo * g.stride + kx - g.pad;
          std::fill(row, row + sp.lo, T(0));
          if (g.stride == 1) {
            std::copy(src, src + (sp.hi - sp.lo), row + sp.lo);
          } else {
            for (std::size_t ox = sp.lo; ox < sp.hi; ++ox) row[ox] = src[(ox - sp.lo) * g.stride];
          }
          std::fill(row + sp.hi, row + g.wo, T(0));
        }
      }
    }
  }
}

template <class T>
void col2im(const ConvGeom& g, const T* col, T* x) {
  const std::size_t n = g.out_px();
  for (std::size_t c = 0; c < g.cin; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* src = col + ((c * g.k + ky) * g.k + kx) * n;
        const Span sp = valid_span(g, kx);
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* dst = x + (c * g.h + static_cast<std::size_t>(iy)) * g.w + sp.lo * g.stride + kx - g.pad;
          const T* row = src + oy * g.wo;
          if (g.stride == 1) {
            for (std::size_t ox = sp.lo; ox < sp.hi; ++ox) dst[ox - sp.lo] += row[ox];
          } else {
            for (std::size_t ox = sp.lo; ox < sp.hi; ++ox) dst[(ox - sp.lo) * g.stride] += row[ox];
          }
        }
      }
    }
  }
}

// Per-thread scratch that keeps its capacity between calls; contents are
// unspecified.
template <class T>
T* scratch(std::size_t n) {
  thread_local std::vector<T> buf;
  if (buf.size() < n) buf.resize(n);
  return buf.data();
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::size_t stride, std::size_t pad) {
  if (x.rank() != 4 || w.rank() != 4 || w.dim(1) != x.dim(1) || w.dim(2) != w.dim(3)) {
    throw ShapeError("conv2d: input " + to_string(x.shape()) + " and weight " + to_string(w.shape()));
  }
  if (bias.defined() && bias.shape() != Shape{w.dim(0)}) {
    throw ShapeError("conv2d: bias " + to_string(bias.shape()) + " for weight " + to_string(w.shape()));
  }
  if (stride == 0) throw ShapeError("conv2d: stride 0");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(2), stride, pad, 0, 0};
  if (g.h + 2 * pad < g.k || g.w + 2 * pad < g.k) {
    throw ShapeError("conv2d: kernel " + std::to_string(g.k) + " larger than padded input " + to_string(x.shape()));
  }
  g.ho = (g.h + 2 * pad - g.k) / stride + 1;
  g.wo = (g.w + 2 * pad - g.k) / stride + 1;

  const std::size_t in_sz = g.cin * g.h * g.w, out_sz = g.cout * g.out_px();
  const std::size_t col_sz = g.patch() * g.out_px();
  std::vector<T> out(g.batch * out_sz);
  const simd::GemmShape fwd{false, false, g.cout, g.out_px(), g.patch(), g.patch(), g.out_px(), g.out_px()};
  const T* xp = x.data().data();
  const T* wp = w.data().data();
  // The weight gradient needs the im2col matrices again; keep them when a
  // backward pass can follow.
  const bool keep_cols = !g.pointwise() && grad_enabled() && w.requires_grad();
  auto cols = std::make_shared<std::vector<T>>(keep_cols ? g.batch * col_sz : 0);
  parallel_for(g.batch, [&](std::size_t b) {
    const T* cp = xp + b * in_sz;
    if (!g.pointwise()) {
      T* col = keep_cols ? cols->data() + b * col_sz : scratch<T>(col_sz);
      im2col(g, cp, col);
      cp = col;
    }
    T* y = out.data() + b * out_sz;
    simd::gemm(fwd, wp, cp, y, false);
    if (bias.defined()) {
      const auto bv = bias.data();
      for (std::size_t c = 0; c < g.cout; ++c)
        for (std::size_t i = 0; i < g.out_px(); ++i) y[c * g.out_px() + i] += bv[c];
    }
  });

  return make_result<T>(
      "conv2d", Shape{g.batch, g.cout, g.ho, g.wo}, std::move(out), {x, w, bias},
      [g, in_sz, out_sz, col_sz, cols](Node<T>& self) {
        const T* dy = self.grad.data();
        const T* xv = self.inputs[0]->value.data();
        const T* wv = self.inputs[1]->value.data();
        if (auto* gx = grad_of(self, 0)) {
          const simd::GemmShape s{true, false, g.patch(), g.out_px(), g.cout, g.patch(), g.out_px(), g.out_px()};
          parallel_for(g.batch, [&](std::size_t b) {
            T* dx = gx->data() + b * in_sz;
            if (g.pointwise()) {
              simd::gemm(s, wv, dy + b * out_sz, dx, true);
              return;
            }
            T* dcol = scratch<T>(col_sz);
            simd::gemm(s, wv, dy + b * out_sz, dcol, false);
            col2im(g, dcol, dx);
          });
        }
        if (auto* gw = grad_of(self, 1)) {
          // Sequential over the batch so the accumulation order is fixed.
          const simd::GemmShape s{false, true, g.cout, g.patch(), g.out_px(), g.out_px(), g.out_px(), g.patch()};
          for (std::size_t b = 0; b < g.batch; ++b) {
            const T* cp = xv + b * in_sz;
            if (!g.pointwise()) {
              if (!cols->empty()) {
                cp = cols->data() + b * col_sz;
              } else {
                T* col = scratch<T>(col_sz);
                im2col(g, cp, col);
                cp = col;
              }
            }
            simd::gemm(s, dy + b * out_sz, cp, gw->data(), true);
          }
        }
        if (auto* gb = grad_of(self, 2)) {
          const T fault = static_cast<T>(1.0 + testing::conv_backward_perturbation());
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t c = 0; c < g.cout; ++c) {
              T s = 0;
              for (std::size_t i = 0; i < g.out_px(); ++i) s += dy[b * out_sz + c * g.out_px() + i];
              (*gb)[c] += s * fault;
            }
        }
      });
}

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a, bool trans_b) {
  if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
    throw ShapeError("matmul: " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  const std::size_t batch = a.dim(0);
  const std::size_t m = trans_a ? a.dim(2) : a.dim(1);
  const std::size_t k = trans_a ? a.dim(1) : a.dim(2);
  const std::size_t kb = trans_b ? b.dim(2) : b.dim(1);
  const std::size_t n = trans_b ? b.dim(1) : b.dim(2);
  if (k != kb) throw ShapeError("matmul: inner dims of " + to_string(a.shape()) + " and " + to_string(b.shape()));
  const std::size_t sa = a.dim(1) * a.dim(2), sb = b.dim(1) * b.dim(2), sc = m * n;
  const std::size_t lda = a.dim(2), ldb = b.dim(2);
  std::vector<T> out(batch * sc);
  const simd::GemmShape fwd{trans_a, trans_b, m, n, k, lda, ldb, n};
  for (std::size_t i = 0; i < batch; ++i) {
    simd::gemm(fwd, a.data().data() + i * sa, b.data().data() + i * sb, out.data() + i * sc, false);
  }
  return make_result<T>("matmul", Shape{batch, m, n}, std::move(out), {a, b}, [=](Node<T>& self) {
    const T* av = self.inputs[0]->value.data();
    const T* bv = self.inputs[1]->value.data();
    const T* dc = self.grad.data();
    if (auto* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < batch; ++i) {
        if (!trans_a) {  // dA[m,k] = dC[m,n] op(B)^T
          simd::gemm(simd::GemmShape{false, !trans_b, m, k, n, n, ldb, lda}, dc + i * sc, bv + i * sb,
                     ga->data() + i * sa, true);
        } else {  // dA[k,m] = op(B)[k,n] dC^T
          simd::gemm(simd::GemmShape{trans_b, true, k, m, n, ldb, n, lda}, bv + i * sb, dc + i * sc,
                     ga->data() + i * sa, true);
        }
      }
    }
    if (auto* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < batch; ++i) {
        if (!trans_b) {  // dB[k,n] = op(A)^T dC
          simd::gemm(simd::GemmShape{!trans_a, false, k, n, m, lda, n, ldb}, av + i * sa, dc + i * sc,
                     gb->data() + i * sb, true);
        } else {  // dB[n,k] = dC^T op(A)
          simd::gemm(simd::GemmShape{true, trans_a, n, k, m, n, lda, ldb}, dc + i * sc, av + i * sa,
                     gb->data() + i * sb, true);
        }
      }
    }
  });
}

template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1) || (bias.defined() && bias.shape() != Shape{w.dim(0)})) {
    throw ShapeError("linear: input " + to_string(x.shape()) + ", weight " + to_string(w.shape()));
  }
  const std::size_t batch = x.dim(0), k = x.dim(1), n = w.dim(0);
  std::vector<T> out(batch * n);
  simd::gemm(simd::GemmShape{false, true, batch, n, k, k, k, n}, x.data().data(), w.data().data(), out.data(), false);
  if (bias.defined()) {
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t j = 0; j < n; ++j) out[b * n + j] += bias.data()[j];
  }
  return make_result<T>("linear", Shape{batch, n}, std::move(out), {x, w, bias}, [=](Node<T>& self) {
    const T* dy = self.grad.data();
    if (auto* gx = grad_of(self, 0)) {
      simd::gemm(simd::GemmShape{false, false, batch, k, n, n, k, k}, dy, self.inputs[1]->value.data(), gx->data(),
                 true);
    }
    if (auto* gw = grad_of(self, 1)) {
      simd::gemm(simd::GemmShape{true, false, n, k, batch, n, k, k}, dy, self.inputs[0]->value.data(), gw->data(),
                 true);
    }
    if (auto* gb = grad_of(self, 2)) {
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t j = 0; j < n; ++j) (*gb)[j] += dy[b * n + j];
    }
  });
}

// ---- 2D DFT via FFTW ------------------------------------------------------

namespace {

struct FftPlans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

// Planning is not thread-safe in FFTW; execution with new arrays is.
FftPlans plans_for(std::size_t h, std::size_t w) {
  static std::mutex mu;
  static std::map<std::pair<std::size_t, std::size_t>, FftPlans> cache;
  std::lock_guard lock(mu);
  auto it = cache.find({h, w});
  if (it != cache.end()) return it->second;
  auto* buf = fftw_alloc_complex(h * w);
  FftPlans p;
  p.forward = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
  p.backward = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  fftw_free(buf);
  cache[{h, w}] = p;
  return p;
}

struct FftBuffer {
  explicit FftBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {}
  ~FftBuffer() { fftw_free(data); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;
  fftw_complex* data;
};

}  // namespace

template <class T>
Tensor<T> dft2(const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("dft2 needs at least 2 axes, got " + to_string(x.shape()));
  const std::size_t h = x.shape()[x.rank() - 2], w = x.shape()[x.rank() - 1];
  const std::size_t plane = h * w, planes = x.numel() / plane;
  const FftPlans plans = plans_for(h, w);
  std::vector<T> out(2 * x.numel());
  FftBuffer buf(plane);
  const auto in = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t i = 0; i < plane; ++i) {
      buf.data[i][0] = static_cast<double>(in[p * plane + i]);
      buf.data[i][1] = 0.0;
    }
    fftw_execute_dft(plans.forward, buf.data, buf.data);
    for (std::size_t i = 0; i < plane; ++i) {
      out[2 * (p * plane + i)] = static_cast<T>(buf.data[i][0]);
      out[2 * (p * plane + i) + 1] = static_cast<T>(buf.data[i][1]);
    }
  }
  Shape shape = x.shape();
  shape.push_back(2);
  // The gradient with respect to the real input is the real part of the
  // unnormalized inverse transform of the complex gradient.
  return make_result<T>("dft2", shape, std::move(out), {x}, [plane, planes, plans](Node<T>& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    FftBuffer buf(plane);
    for (std::size_t p = 0; p < planes; ++p) {
      for (std::size_t i = 0; i < plane; ++i) {
        buf.data[i][0] = static_cast<double>(self.grad[2 * (p * plane + i)]);
        buf.data[i][1] = static_cast<double>(self.grad[2 * (p * plane + i) + 1]);
      }
      fftw_execute_dft(plans.backward, buf.data, buf.data);
      for (std::size_t i = 0; i < plane; ++i) (*g)[p * plane + i] += static_cast<T>(buf.data[i][0]);
    }
  });
}

#define REFSR_INSTANTIATE(T)                                                                             \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&, bool, bool);                             \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> dft2(const Tensor<T>&);

REFSR_INSTANTIATE(float)
REFSR_INSTANTIATE(double)

}  // namespace refsr::ad
