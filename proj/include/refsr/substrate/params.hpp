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

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "refsr/core/error.hpp"
#include "refsr/substrate/tensor.hpp"

namespace refsr::ad {

template <class T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

/// Ordered, uniquely named parameters of one model.
template <class T>
class ParameterSet {
 public:
  /// Fan-in scaled uniform init in [-1/sqrt(fan_in), 1/sqrt(fan_in)], seeded
  /// from (seed, name) so values do not depend on creation order.
  Tensor<T> uniform(const std::string& name, Shape shape, std::size_t fan_in, std::uint64_t seed);
  Tensor<T> constant(const std::string& name, Shape shape, T value);

  std::vector<Parameter<T>>& items() noexcept { return items_; }
  const std::vector<Parameter<T>>& items() const noexcept { return items_; }
  std::size_t count() const noexcept;
  const Tensor<T>& at(const std::string& name) const;

  void zero_grad();
  void set_trainable(bool on);

  /// Copies values from other, matching by name and shape.
  template <class U>
  void copy_from(const ParameterSet<U>& other);

 private:
  Tensor<T> add(const std::string& name, Tensor<T> t);
  std::vector<Parameter<T>> items_;
  std::map<std::string, std::size_t> index_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adaptive moment estimation with bias correction. State is keyed by
/// parameter position and created as zeros on the first step.
class Adam {
 public:
  explicit Adam(AdamConfig cfg);
  void step(ParameterSet<float>& params, double lr);
  void step(ParameterSet<double>& params, double lr);
  std::uint64_t steps() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<std::vector<float>> m_, v_;
  std::vector<std::vector<double>> md_, vd_;
};

// ---- checkpoint file -----------------------------------------------------

struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointFile {
  std::string header_json;
  std::vector<NamedArray> arrays;
};

/// "RCKPT1\0\0", u32 header length, JSON header, u32 record count, then per
/// record: u32 name length, name, u32 rank, u32 dims, f32 values. All
/// integers and floats little-endian.
std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& ckpt);
CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void write_checkpoint(const std::string& path, const CheckpointFile& ckpt);
CheckpointFile read_checkpoint(const std::string& path);

template <class T>
std::vector<NamedArray> export_params(const ParameterSet<T>& params);
/// Every parameter must be present with the same shape.
template <class T>
void import_params(ParameterSet<T>& params, const std::vector<NamedArray>& arrays);

template <class T>
template <class U>
void ParameterSet<T>::copy_from(const ParameterSet<U>& other) {
  for (auto& p : items_) {
    const auto& src = other.at(p.name);
    if (src.shape() != p.tensor.shape()) throw ShapeError("parameter " + p.name + " shape differs");
    auto dst = p.tensor.data();
    auto in = src.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(in[i]);
  }
}

}  // namespace refsr::ad
