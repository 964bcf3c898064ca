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
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

// Reverse-mode automatic differentiation over dense row-major arrays.
//
// A Tensor is a handle to a graph node. Ops build new nodes that remember
// their inputs and a backward closure; Tensor::backward() walks the graph in
// reverse topological order. Everything is templated on the scalar type:
// float for training, double for finite-difference checks.

namespace refsr::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s) noexcept;
std::string to_string(const Shape& s);
/// Throws ShapeError naming op unless a == b.
void require_same_shape(const char* op, const Shape& a, const Shape& b);

template <class T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  /// Zero-filled gradient buffer, allocated on first use.
  std::vector<T>& grad_buffer();
};

template <class T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<T> data() { return node_->value; }
  std::span<const T> data() const { return node_->value; }
  /// Empty until backward() reached this tensor.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad_buffer(); }
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  const char* op() const { return node_->op; }

  /// Value of a single-element tensor.
  T item() const;

  /// Same values, cut from the graph.
  Tensor detach() const;
  void zero_grad();

  /// Backpropagates d(this)/d(leaf) into every reachable leaf that requires
  /// gradients. Gradients accumulate. Throws ContractError unless scalar.
  void backward() const;

  const std::shared_ptr<Node<T>>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// While alive, ops on this thread record no backward graph.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled() noexcept;

/// Debug mode: every op checks its output for NaN/inf and throws DataError
/// naming the op. Off by default; REFSR_CHECK_FINITE=1 turns it on.
void set_check_finite(bool on) noexcept;
bool check_finite_enabled() noexcept;

namespace testing {
/// Fault injection for self-test fixtures: conv2d's bias gradient is scaled
/// by (1 + relative_error). 0 restores exact gradients.
void set_conv_backward_perturbation(double relative_error) noexcept;
double conv_backward_perturbation() noexcept;
}  // namespace testing

// ---- primitives ----------------------------------------------------------

template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& a, T s);

/// x[B, Ci, H, W] * w[Co, Ci, k, k] + bias[Co]; zero padding. bias may be
/// undefined.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias, std::size_t stride,
                 std::size_t pad);

/// [B, C, H, W] -> [B, C, 2H, 2W]
template <class T> Tensor<T> upsample_nearest2x(const Tensor<T>& x);

/// Batched op(a)[B, M, K] * op(b)[B, K, N].
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b, bool trans_a = false, bool trans_b = false);

template <class T> Tensor<T> softmax_last(const Tensor<T>& x);

/// Normalizes x[B, C, ...] over groups of C / groups channels, then applies
/// the per-channel affine gamma, beta.
template <class T>
Tensor<T> group_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, std::size_t groups,
                     double eps = 1e-5);

template <class T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope = T(0.2));
template <class T> Tensor<T> silu(const Tensor<T>& x);
template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> softplus(const Tensor<T>& x);

/// Mean of all elements, shape {}.
template <class T> Tensor<T> mean(const Tensor<T>& x);
/// [B, C, H, W] -> [B, C]
template <class T> Tensor<T> spatial_mean(const Tensor<T>& x);
/// x[B, K] * w[N, K]^T + bias[N]
template <class T> Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

/// Concatenates [B, Ci, H, W] tensors along the channel axis.
template <class T> Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);
/// Channel c of [B, C, H, W] as [B, 1, H, W].
template <class T> Tensor<T> channel(const Tensor<T>& x, std::size_t c);
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// Unnormalized 2D DFT over the last two axes of a real tensor:
/// [..., H, W] -> [..., H, W, 2] holding (re, im).
template <class T> Tensor<T> dft2(const Tensor<T>& x);

// ---- gradient checking ---------------------------------------------------

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
};

/// Compares reverse-mode gradients of fn() with respect to each of inputs
/// against central differences. fn must return a scalar. max_per_input
/// limits how many elements per input are perturbed (evenly strided); 0
/// means all. The relative error uses max(|analytic|, |numeric|, 1e-6) as
/// its denominator.
GradCheckReport gradient_check(const std::function<Tensor<double>()>& fn, std::vector<Tensor<double>> inputs,
                               double eps = 1e-5, std::size_t max_per_input = 0);

}  // namespace refsr::ad
