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

#include "refsr/substrate/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>

#include "refsr/core/rng.hpp"
#include "refsr/core/rvol.hpp"
#include "refsr/simd/kernels.hpp"

namespace refsr::ad {

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

template <class T>
Tensor<T> ParameterSet<T>::add(const std::string& name, Tensor<T> t) {
  if (index_.count(name)) throw ContractError("duplicate parameter name " + name);
  index_[name] = items_.size();
  items_.push_back({name, t});
  return t;
}

template <class T>
Tensor<T> ParameterSet<T>::uniform(const std::string& name, Shape shape, std::size_t fan_in, std::uint64_t seed) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  Rng rng(hash_combine(seed, fnv1a(name)));
  std::vector<T> v(numel(shape));
  for (T& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return add(name, Tensor<T>::from(std::move(shape), std::move(v), true));
}

template <class T>
Tensor<T> ParameterSet<T>::constant(const std::string& name, Shape shape, T value) {
  return add(name, Tensor<T>::full(std::move(shape), value, true));
}

template <class T>
std::size_t ParameterSet<T>::count() const noexcept {
  std::size_t n = 0;
  for (const auto& p : items_) n += p.tensor.numel();
  return n;
}

template <class T>
const Tensor<T>& ParameterSet<T>::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw DataError("unknown parameter " + name);
  return items_[it->second].tensor;
}

template <class T>
void ParameterSet<T>::zero_grad() {
  for (auto& p : items_) p.tensor.zero_grad();
}

template <class T>
void ParameterSet<T>::set_trainable(bool on) {
  for (auto& p : items_) p.tensor.set_requires_grad(on);
}

template class ParameterSet<float>;
template class ParameterSet<double>;

// ---- Adam ----------------------------------------------------------------

Adam::Adam(AdamConfig cfg) : cfg_(cfg) {
  if (!(cfg.lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(cfg.eps > 0.0)) throw ConfigError("Adam eps must be positive");
}

void Adam::step(ParameterSet<float>& params, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  auto& items = params.items();
  if (m_.empty()) {
    for (const auto& p : items) {
      m_.emplace_back(p.tensor.numel(), 0.0f);
      v_.emplace_back(p.tensor.numel(), 0.0f);
    }
  }
  if (m_.size() != items.size()) throw ContractError("Adam state does not match the parameter set");
  ++t_;
  simd::AdamStep st;
  st.lr = static_cast<float>(lr);
  st.beta1 = static_cast<float>(cfg_.beta1);
  st.beta2 = static_cast<float>(cfg_.beta2);
  st.eps = static_cast<float>(cfg_.eps);
  st.bias_correction1 = static_cast<float>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
  st.bias_correction2 = static_cast<float>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto& t = items[k].tensor;
    auto g = t.mutable_grad();
    simd::adam_update(simd::active_isa(), t.numel(), st, t.data().data(), m_[k].data(), v_[k].data(), g.data());
  }
}

void Adam::step(ParameterSet<double>& params, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  auto& items = params.items();
  if (md_.empty()) {
    for (const auto& p : items) {
      md_.emplace_back(p.tensor.numel(), 0.0);
      vd_.emplace_back(p.tensor.numel(), 0.0);
    }
  }
  if (md_.size() != items.size()) throw ContractError("Adam state does not match the parameter set");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < items.size(); ++k) {
    auto& t = items[k].tensor;
    auto g = t.mutable_grad();
    auto p = t.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      md_[k][i] = cfg_.beta1 * md_[k][i] + (1.0 - cfg_.beta1) * g[i];
      vd_[k][i] = cfg_.beta2 * vd_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      p[i] -= lr * (md_[k][i] / bc1) / (std::sqrt(vd_[k][i] / bc2) + cfg_.eps);
    }
  }
}

// ---- checkpoint ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'R', 'C', 'K', 'P', 'T', '1', '\0', '\0'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  float f32() {
    return std::bit_cast<float>(u32("parameter values"));
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return b_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (b_.size() - pos_ < n) throw FormatError(std::string("checkpoint truncated in ") + what, pos_);
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const CheckpointFile& ckpt) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(ckpt.header_json.size()));
  out.insert(out.end(), ckpt.header_json.begin(), ckpt.header_json.end());
  put_u32(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
  for (const auto& a : ckpt.arrays) {
    if (a.values.size() != numel(a.shape)) throw ShapeError("checkpoint array " + a.name + " size mismatch");
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out.insert(out.end(), a.name.begin(), a.name.end());
    put_u32(out, static_cast<std::uint32_t>(a.shape.size()));
    for (std::size_t d : a.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : a.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

CheckpointFile decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) throw FormatError("not a checkpoint file", 0);
  Reader r(bytes);
  r.bytes(8, "magic");
  CheckpointFile ckpt;
  ckpt.header_json = r.bytes(r.u32("header length"), "header");
  const std::uint32_t count = r.u32("record count");
  for (std::uint32_t k = 0; k < count; ++k) {
    NamedArray a;
    a.name = r.bytes(r.u32("name length"), "name");
    const std::uint32_t rank = r.u32("rank");
    if (rank > 8) throw FormatError("implausible rank for " + a.name, r.pos());
    for (std::uint32_t i = 0; i < rank; ++i) a.shape.push_back(r.u32("dims"));
    const std::size_t n = numel(a.shape);
    if (n * 4 > r.remaining()) throw FormatError("checkpoint truncated in values of " + a.name, r.pos());
    a.values.resize(n);
    for (float& v : a.values) v = r.f32();
    ckpt.arrays.push_back(std::move(a));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint records", r.pos());
  return ckpt;
}

void write_checkpoint(const std::string& path, const CheckpointFile& ckpt) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

CheckpointFile read_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

template <class T>
std::vector<NamedArray> export_params(const ParameterSet<T>& params) {
  std::vector<NamedArray> out;
  for (const auto& p : params.items()) {
    NamedArray a{p.name, p.tensor.shape(), {}};
    for (T v : p.tensor.data()) a.values.push_back(static_cast<float>(v));
    out.push_back(std::move(a));
  }
  return out;
}

template <class T>
void import_params(ParameterSet<T>& params, const std::vector<NamedArray>& arrays) {
  std::map<std::string, const NamedArray*> by_name;
  for (const auto& a : arrays) by_name[a.name] = &a;
  for (auto& p : params.items()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw DataError("checkpoint lacks parameter " + p.name);
    if (it->second->shape != p.tensor.shape()) {
      throw ShapeError("checkpoint parameter " + p.name + " has shape " + to_string(it->second->shape) +
                       ", model expects " + to_string(p.tensor.shape()));
    }
    auto d = p.tensor.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<T>(it->second->values[i]);
  }
}

template std::vector<NamedArray> export_params(const ParameterSet<float>&);
template std::vector<NamedArray> export_params(const ParameterSet<double>&);
template void import_params(ParameterSet<float>&, const std::vector<NamedArray>&);
template void import_params(ParameterSet<double>&, const std::vector<NamedArray>&);

}  // namespace refsr::ad
