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

#include "refsr/substrate/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <malloc.h>
#include <unordered_set>

#include "refsr/core/error.hpp"
#include "graph.hpp"

namespace refsr::ad {

std::size_t numel(const Shape& s) noexcept {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string to_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

namespace {
thread_local bool g_grad_enabled = true;

bool initial_check_finite() {
  const char* v = std::getenv("REFSR_CHECK_FINITE");
  return v != nullptr && v[0] != '\0' && v[0] != '0';
}
bool g_check_finite = initial_check_finite();

// A training step frees and reallocates the same multi-megabyte activation
// buffers over and over. glibc would serve each through a fresh mmap and pay
// the page faults again; keeping them on the heap is markedly faster.
const bool g_allocator_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  return true;
}();
}  // namespace

namespace testing {
namespace {
std::atomic<double> g_conv_fault{0.0};
}
void set_conv_backward_perturbation(double relative_error) noexcept { g_conv_fault = relative_error; }
double conv_backward_perturbation() noexcept { return g_conv_fault; }
}  // namespace testing

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() noexcept { return g_grad_enabled; }

void set_check_finite(bool on) noexcept { g_check_finite = on; }
bool check_finite_enabled() noexcept { return g_check_finite; }

template <class T>
std::vector<T>& Node<T>::grad_buffer() {
  if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  return grad;
}

template <class T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  std::vector<T> v(ad::numel(shape), value);
  return from(std::move(shape), std::move(v), requires_grad);
}

template <class T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  if (values.size() != ad::numel(shape)) {
    throw ShapeError("tensor of shape " + to_string(shape) + " needs " + std::to_string(ad::numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  auto node = std::make_shared<Node<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <class T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("item() on a tensor of shape " + to_string(shape()));
  return node_->value[0];
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return from(shape(), node_->value, false);
}

template <class T>
void Tensor<T>::zero_grad() {
  node_->grad.clear();
}

template <class T>
void Tensor<T>::backward() const {
  if (numel() != 1) throw ContractError("backward() needs a scalar output, got shape " + to_string(shape()));
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->inputs.size()) {
      Node<T>* child = n->inputs[next++].get();
      if (child && child->requires_grad && seen.insert(child).second) stack.push_back({child, 0});
      continue;
    }
    order.push_back(n);
    stack.pop_back();
  }

  node_->grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>& n = **it;
    if (n.backward && !n.grad.empty()) n.backward(n);
  }
}

template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value, std::initializer_list<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward) {
  return make_result(op, std::move(shape), std::move(value), std::vector<Tensor<T>>(inputs), std::move(backward));
}

template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward) {
  auto node = std::make_shared<Node<T>>();
  node->op = op;
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (g_check_finite) {
    for (T v : node->value) {
      if (!std::isfinite(v)) throw DataError(std::string("non-finite value produced by ") + op);
    }
  }
  bool any = false;
  if (g_grad_enabled) {
    for (const auto& t : inputs) any = any || (t.defined() && t.requires_grad());
  }
  if (any) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (const auto& t : inputs) node->inputs.push_back(t.node());
    node->backward = std::move(backward);
  }
  return Tensor<T>(std::move(node));
}

template <class T>
std::vector<T>* grad_of(Node<T>& self, std::size_t i) {
  if (i >= self.inputs.size()) return nullptr;
  Node<T>* in = self.inputs[i].get();
  if (in == nullptr || !in->requires_grad) return nullptr;
  return &in->grad_buffer();
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) throw ShapeError(std::string(op) + ": shapes " + to_string(a) + " and " + to_string(b) + " differ");
}

// ---- elementwise -----------------------------------------------------------

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return make_result<T>("add", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    for (std::size_t k = 0; k < 2; ++k) {
      if (auto* g = grad_of(self, k)) {
        for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
      }
    }
  });
}

template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return make_result<T>("sub", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] -= self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a.shape(), b.shape());
  std::vector<T> out(a.numel());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return make_result<T>("mul", a.shape(), std::move(out), {a, b}, [](Node<T>& self) {
    const auto& x = self.inputs[0]->value;
    const auto& y = self.inputs[1]->value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * y[i];
    }
    if (auto* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * x[i];
    }
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * s;
  return make_result<T>("scale", a.shape(), std::move(out), {a}, [s](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * s;
    }
  });
}

template <class T>
Tensor<T> leaky_relu(const Tensor<T>& a, T slope) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return make_result<T>("leaky_relu", a.shape(), std::move(out), {a}, [slope](Node<T>& self) {
    const auto& x = self.inputs[0]->value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * (x[i] > T(0) ? T(1) : slope);
    }
  });
}

template <class T>
T sigmoid_scalar(T v) {
  if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
  const T e = std::exp(v);
  return e / (T(1) + e);
}

template <class T>
Tensor<T> silu(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * sigmoid_scalar(x[i]);
  return make_result<T>("silu", a.shape(), std::move(out), {a}, [](Node<T>& self) {
    const auto& x = self.inputs[0]->value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) {
        const T s = sigmoid_scalar(x[i]);
        (*g)[i] += self.grad[i] * s * (T(1) + x[i] * (T(1) - s));
      }
    }
  });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sigmoid_scalar(x[i]);
  return make_result<T>("sigmoid", a.shape(), std::move(out), {a}, [](Node<T>& self) {
    const auto& y = self.value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * y[i] * (T(1) - y[i]);
    }
  });
}

template <class T>
Tensor<T> softplus(const Tensor<T>& a) {
  std::vector<T> out(a.numel());
  const auto x = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(x[i], T(0)) + std::log1p(std::exp(-std::abs(x[i])));
  return make_result<T>("softplus", a.shape(), std::move(out), {a}, [](Node<T>& self) {
    const auto& x = self.inputs[0]->value;
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i] * sigmoid_scalar(x[i]);
    }
  });
}

// ---- reductions and shape ops ------------------------------------------

template <class T>
Tensor<T> mean(const Tensor<T>& a) {
  double s = 0.0;
  for (T v : a.data()) s += static_cast<double>(v);
  const double n = static_cast<double>(a.numel());
  return make_result<T>("mean", Shape{}, {static_cast<T>(s / n)}, {a}, [n](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      const T d = static_cast<T>(static_cast<double>(self.grad[0]) / n);
      for (T& v : *g) v += d;
    }
  });
}

template <class T>
Tensor<T> spatial_mean(const Tensor<T>& a) {
  if (a.rank() != 4) throw ShapeError("spatial_mean expects [B, C, H, W], got " + to_string(a.shape()));
  const std::size_t bc = a.dim(0) * a.dim(1), hw = a.dim(2) * a.dim(3);
  std::vector<T> out(bc);
  const auto x = a.data();
  for (std::size_t i = 0; i < bc; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < hw; ++j) s += static_cast<double>(x[i * hw + j]);
    out[i] = static_cast<T>(s / static_cast<double>(hw));
  }
  return make_result<T>("spatial_mean", Shape{a.dim(0), a.dim(1)}, std::move(out), {a}, [bc, hw](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < bc; ++i) {
        const T d = self.grad[i] / static_cast<T>(hw);
        for (std::size_t j = 0; j < hw; ++j) (*g)[i * hw + j] += d;
      }
    }
  });
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels of nothing");
  const Shape& s0 = xs[0].shape();
  if (s0.size() < 2) throw ShapeError("concat_channels needs [B, C, ...], got " + to_string(s0));
  const std::size_t batch = s0[0];
  const std::size_t inner = numel(s0) / (s0[0] * s0[1]);
  std::size_t channels = 0;
  for (const auto& t : xs) {
    const Shape& s = t.shape();
    Shape a(s0.begin() + 2, s0.end()), b(s.begin() + 2, s.end());
    if (s.size() != s0.size() || s[0] != batch || a != b) {
      throw ShapeError("concat_channels: " + to_string(s0) + " vs " + to_string(s));
    }
    channels += s[1];
  }
  Shape shape = s0;
  shape[1] = channels;
  std::vector<T> out(numel(shape));
  std::vector<std::size_t> offsets;
  std::size_t c0 = 0;
  for (const auto& t : xs) {
    const std::size_t c = t.dim(1);
    const auto in = t.data();
    for (std::size_t b = 0; b < batch; ++b) {
      std::copy_n(in.begin() + static_cast<std::ptrdiff_t>(b * c * inner), c * inner,
                  out.begin() + static_cast<std::ptrdiff_t>((b * channels + c0) * inner));
    }
    offsets.push_back(c0);
    c0 += c;
  }
  return make_result<T>("concat_channels", shape, std::move(out), xs,
                        [batch, inner, channels, offsets](Node<T>& self) {
                          for (std::size_t k = 0; k < offsets.size(); ++k) {
                            auto* g = grad_of(self, k);
                            if (!g) continue;
                            const std::size_t c = self.inputs[k]->shape[1];
                            for (std::size_t b = 0; b < batch; ++b) {
                              const T* src = self.grad.data() + (b * channels + offsets[k]) * inner;
                              T* dst = g->data() + b * c * inner;
                              for (std::size_t i = 0; i < c * inner; ++i) dst[i] += src[i];
                            }
                          }
                        });
}

template <class T>
Tensor<T> channel(const Tensor<T>& x, std::size_t c) {
  if (x.rank() < 2 || c >= x.dim(1)) throw ShapeError("channel " + std::to_string(c) + " of " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  const std::size_t inner = x.numel() / (batch * channels);
  Shape shape = x.shape();
  shape[1] = 1;
  std::vector<T> out(batch * inner);
  const auto in = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    std::copy_n(in.begin() + static_cast<std::ptrdiff_t>((b * channels + c) * inner), inner,
                out.begin() + static_cast<std::ptrdiff_t>(b * inner));
  }
  return make_result<T>("channel", shape, std::move(out), {x}, [=](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t b = 0; b < batch; ++b) {
        for (std::size_t i = 0; i < inner; ++i) (*g)[(b * channels + c) * inner + i] += self.grad[b * inner + i];
      }
    }
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel()) throw ShapeError("reshape " + to_string(x.shape()) + " -> " + to_string(shape));
  std::vector<T> out(x.data().begin(), x.data().end());
  return make_result<T>("reshape", std::move(shape), std::move(out), {x}, [](Node<T>& self) {
    if (auto* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  if (x.rank() != 4) throw ShapeError("upsample_nearest2x expects [B, C, H, W], got " + to_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<T> out(planes * 4 * h * w);
  const auto in = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      const T* src = in.data() + (p * h + y / 2) * w;
      T* dst = out.data() + (p * 2 * h + y) * 2 * w;
      for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx] = src[xx / 2];
    }
  }
  return make_result<T>("upsample_nearest2x", Shape{x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out), {x},
                        [planes, h, w](Node<T>& self) {
                          auto* g = grad_of(self, 0);
                          if (!g) return;
                          for (std::size_t p = 0; p < planes; ++p) {
                            for (std::size_t y = 0; y < 2 * h; ++y) {
                              const T* src = self.grad.data() + (p * 2 * h + y) * 2 * w;
                              T* dst = g->data() + (p * h + y / 2) * w;
                              for (std::size_t xx = 0; xx < 2 * w; ++xx) dst[xx / 2] += src[xx];
                            }
                          }
                        });
}

template <class T>
Tensor<T> softmax_last(const Tensor<T>& x) {
  if (x.rank() == 0) throw ShapeError("softmax_last on a scalar");
  const std::size_t n = x.shape().back(), rows = x.numel() / n;
  std::vector<T> out(x.numel());
  const auto in = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = in.data() + r * n;
    T* dst = out.data() + r * n;
    const T m = *std::max_element(src, src + n);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      dst[i] = std::exp(src[i] - m);
      s += static_cast<double>(dst[i]);
    }
    const T inv = static_cast<T>(1.0 / s);
    for (std::size_t i = 0; i < n; ++i) dst[i] *= inv;
  }
  return make_result<T>("softmax_last", x.shape(), std::move(out), {x}, [rows, n](Node<T>& self) {
    auto* g = grad_of(self, 0);
    if (!g) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* y = self.value.data() + r * n;
      const T* dy = self.grad.data() + r * n;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(dy[i]) * static_cast<double>(y[i]);
      for (std::size_t i = 0; i < n; ++i) (*g)[r * n + i] += y[i] * (dy[i] - static_cast<T>(dot));
    }
  });
}

template <class T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, std::size_t groups,
                     double eps) {
  if (x.rank() < 2) throw ShapeError("group_norm expects [B, C, ...], got " + to_string(x.shape()));
  const std::size_t batch = x.dim(0), channels = x.dim(1);
  if (groups == 0 || channels % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(channels) + " channels not divisible into " +
                     std::to_string(groups) + " groups");
  }
  if (gamma.shape() != Shape{channels} || beta.shape() != Shape{channels}) {
    throw ShapeError("group_norm: affine shapes " + to_string(gamma.shape()) + ", " + to_string(beta.shape()) +
                     " for " + std::to_string(channels) + " channels");
  }
  const std::size_t inner = x.numel() / (batch * channels);
  const std::size_t per = channels / groups;
  const std::size_t count = per * inner;
  std::vector<T> xhat(x.numel()), out(x.numel());
  std::vector<double> rstd(batch * groups);
  const auto in = x.data();
  const auto ga = gamma.data(), be = beta.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t base = (b * channels + g * per) * inner;
      double s = 0.0;
      for (std::size_t i = 0; i < count; ++i) s += static_cast<double>(in[base + i]);
      const double mu = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        const double d = static_cast<double>(in[base + i]) - mu;
        v += d * d;
      }
      const double r = 1.0 / std::sqrt(v / static_cast<double>(count) + eps);
      rstd[b * groups + g] = r;
      for (std::size_t c = 0; c < per; ++c) {
        const std::size_t ch = g * per + c;
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t k = base + c * inner + i;
          xhat[k] = static_cast<T>((static_cast<double>(in[k]) - mu) * r);
          out[k] = ga[ch] * xhat[k] + be[ch];
        }
      }
    }
  }
  return make_result<T>(
      "group_norm", x.shape(), std::move(out), {x, gamma, beta},
      [=, xhat = std::move(xhat), rstd = std::move(rstd)](Node<T>& self) {
        const auto& dy = self.grad;
        const auto& ga = self.inputs[1]->value;
        if (auto* gg = grad_of(self, 1)) {
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < channels; ++c) {
              double s = 0.0;
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = (b * channels + c) * inner + i;
                s += static_cast<double>(dy[k]) * static_cast<double>(xhat[k]);
              }
              (*gg)[c] += static_cast<T>(s);
            }
        }
        if (auto* gb = grad_of(self, 2)) {
          for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t c = 0; c < channels; ++c) {
              double s = 0.0;
              for (std::size_t i = 0; i < inner; ++i) s += static_cast<double>(dy[(b * channels + c) * inner + i]);
              (*gb)[c] += static_cast<T>(s);
            }
        }
        auto* gx = grad_of(self, 0);
        if (!gx) return;
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t base = (b * channels + g * per) * inner;
            double sum_d = 0.0, sum_dx = 0.0;
            for (std::size_t c = 0; c < per; ++c) {
              const double gm = static_cast<double>(ga[g * per + c]);
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = base + c * inner + i;
                const double d = static_cast<double>(dy[k]) * gm;
                sum_d += d;
                sum_dx += d * static_cast<double>(xhat[k]);
              }
            }
            const double r = rstd[b * groups + g];
            const double n = static_cast<double>(count);
            for (std::size_t c = 0; c < per; ++c) {
              const double gm = static_cast<double>(ga[g * per + c]);
              for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t k = base + c * inner + i;
                const double d = static_cast<double>(dy[k]) * gm;
                (*gx)[k] += static_cast<T>(r * (d - sum_d / n - static_cast<double>(xhat[k]) * sum_dx / n));
              }
            }
          }
        }
      });
}

#define REFSR_INSTANTIATE(T)                                                                            \
  template struct Node<T>;                                                                              \
  template class Tensor<T>;                                                                             \
  template Tensor<T> make_result(const char*, Shape, std::vector<T>, const std::vector<Tensor<T>>&,     \
                                 std::function<void(Node<T>&)>);                                        \
  template Tensor<T> make_result(const char*, Shape, std::vector<T>, std::initializer_list<Tensor<T>>, \
                                 std::function<void(Node<T>&)>);                                        \
  template std::vector<T>* grad_of(Node<T>&, std::size_t);                                              \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> scale(const Tensor<T>&, T);                                                        \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                                   \
  template Tensor<T> silu(const Tensor<T>&);                                                            \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                         \
  template Tensor<T> softplus(const Tensor<T>&);                                                        \
  template Tensor<T> mean(const Tensor<T>&);                                                            \
  template Tensor<T> spatial_mean(const Tensor<T>&);                                                    \
  template Tensor<T> concat_channels(const std::vector<Tensor<T>>&);                                    \
  template Tensor<T> channel(const Tensor<T>&, std::size_t);                                            \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                  \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                              \
  template Tensor<T> softmax_last(const Tensor<T>&);                                                    \
  template Tensor<T> group_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, double);

REFSR_INSTANTIATE(float)
REFSR_INSTANTIATE(double)

}  // namespace refsr::ad
