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

#include <functional>
#include <initializer_list>
#include <vector>

#include "refsr/substrate/tensor.hpp"

// Helpers shared by the op implementations.

namespace refsr::ad {

/// Wraps an op output in a node. The backward closure is kept only when
/// gradients are enabled and some input requires them.
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value, const std::vector<Tensor<T>>& inputs,
                      std::function<void(Node<T>&)> backward);
template <class T>
Tensor<T> make_result(const char* op, Shape shape, std::vector<T> value, std::initializer_list<Tensor<T>> inputs,
                      std::function<void(Node<T>&)> backward);

/// Gradient buffer of input i, or nullptr when it needs none.
template <class T>
std::vector<T>* grad_of(Node<T>& self, std::size_t i);

}  // namespace refsr::ad
