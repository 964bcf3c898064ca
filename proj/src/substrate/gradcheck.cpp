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

#include "refsr/core/error.hpp"
#include "refsr/substrate/tensor.hpp"

namespace refsr::ad {

namespace {
// Central differences of an O(1) loss carry ~1e-11 roundoff, so gradients
// below this magnitude are compared in absolute terms.
constexpr double kAbsFloor = 1e-6;
}  // namespace

GradCheckReport gradient_check(const std::function<Tensor<double>()>& fn, std::vector<Tensor<double>> inputs,
                               double eps, std::size_t max_per_input) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  const Tensor<double> out = fn();
  if (out.numel() != 1) throw ContractError("gradient_check needs a scalar output, got " + to_string(out.shape()));
  out.backward();

  GradCheckReport rep;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& t = inputs[k];
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    const std::size_t n = t.numel();
    const std::size_t stride = (max_per_input == 0 || n <= max_per_input) ? 1 : n / max_per_input;
    auto data = t.data();
    for (std::size_t i = 0; i < n; i += stride) {
      const double saved = data[i];
      data[i] = saved + eps;
      const double fp = fn().item();
      data[i] = saved - eps;
      const double fm = fn().item();
      data[i] = saved;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double a = analytic.empty() ? 0.0 : analytic[i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kAbsFloor});
      ++rep.checked;
      if (rel > rep.max_rel_error || !std::isfinite(rel)) {
        rep.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
        rep.worst_input = k;
        rep.worst_index = i;
        rep.analytic = a;
        rep.numeric = numeric;
      }
    }
  }
  return rep;
}

}  // namespace refsr::ad
