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
#include <set>
#include <vector>

#include "json.hpp"
#include "refsr/substrate/params.hpp"

// Reference-guided super-resolution network: an attention U-Net generator,
// a convolutional discriminator, a frozen feature extractor for the
// perceptual term, and the four-term composite loss.

namespace refsr::srnet {

using ad::ParameterSet;
using ad::Tensor;

struct GeneratorConfig {
  int base_width = 32;
  std::vector<int> channel_mults{1, 2, 4};
  /// Extra attention levels. Depth d < len(channel_mults) is encoder/decoder
  /// level d; depth len(channel_mults) is the bottleneck, which always has
  /// attention.
  std::set<int> attention_at_depth{2};
  int attention_heads = 4;
  bool residual_output = true;
  /// 2: LR DWI plus HR reference (proposed); 1: LR DWI only (conventional).
  int in_channels = 2;

  int levels() const { return static_cast<int>(channel_mults.size()); }
  int width(int level) const { return base_width * channel_mults.at(static_cast<std::size_t>(level)); }
  void validate() const;
};

struct LossWeights {
  double w_pixel = 1.0;
  double w_freq = 0.1;
  double w_percep = 0.01;
  double w_adv = 0.005;
  void validate() const;
};

void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);

/// Number of GroupNorm groups used for a given channel count: the largest
/// divisor not above 8.
std::size_t norm_groups(std::size_t channels);

template <class T>
class Generator {
 public:
  Generator(const GeneratorConfig& cfg, std::uint64_t seed);

  /// x[B, in_channels, H, W] with the LR DWI in channel 0 -> [B, 1, H, W].
  /// H and W must be divisible by 2^levels.
  Tensor<T> forward(const Tensor<T>& x) const;

  const GeneratorConfig& config() const noexcept { return cfg_; }
  ParameterSet<T>& params() noexcept { return params_; }
  const ParameterSet<T>& params() const noexcept { return params_; }

  /// Zeroes the last convolution, making the network the identity on its LR
  /// channel when residual_output is set.
  void zero_output_layer();

 private:
  struct Conv {
    Tensor<T> w, b;
    std::size_t stride = 1, pad = 1;
  };
  struct Norm {
    Tensor<T> gamma, beta;
    std::size_t groups = 1;
  };
  struct ResBlock {
    Norm n1, n2;
    Conv c1, c2;
    bool has_skip = false;
    Conv skip;
  };
  struct Attention {
    Norm norm;
    Conv q, k, v, proj;
    std::size_t heads = 1;
  };
  struct Level {
    ResBlock r1, r2;
    bool has_attn = false;
    Attention attn;
    Conv down;
  };
  struct UpLevel {
    Conv up;
    ResBlock r1, r2;
    bool has_attn = false;
    Attention attn;
  };

  Conv conv(const std::string& name, std::size_t cin, std::size_t cout, std::size_t k, std::size_t stride);
  Norm norm(const std::string& name, std::size_t c);
  ResBlock res(const std::string& name, std::size_t cin, std::size_t cout);
  Attention attention(const std::string& name, std::size_t c);

  Tensor<T> apply(const Conv& c, const Tensor<T>& x) const;
  Tensor<T> apply(const Norm& n, const Tensor<T>& x) const;
  Tensor<T> apply(const ResBlock& r, const Tensor<T>& x) const;
  Tensor<T> apply(const Attention& a, const Tensor<T>& x) const;

  GeneratorConfig cfg_;
  std::uint64_t seed_;
  ParameterSet<T> params_;
  Conv in_conv_;
  std::vector<Level> enc_;
  ResBlock mid1_, mid2_;
  Attention mid_attn_;
  std::vector<UpLevel> dec_;
  Norm out_norm_;
  Conv out_conv_;
};

/// Stride-2 convolution stack with leaky-rectifier activations, global mean
/// pool, and a linear layer to one logit per sample.
template <class T>
class Discriminator {
 public:
  explicit Discriminator(std::uint64_t seed, std::vector<std::size_t> widths = {32, 64, 128, 256});
  /// x[B, 1, H, W] -> logits [B, 1]
  Tensor<T> forward(const Tensor<T>& x) const;
  ParameterSet<T>& params() noexcept { return params_; }
  const ParameterSet<T>& params() const noexcept { return params_; }

 private:
  ParameterSet<T> params_;
  std::vector<std::pair<Tensor<T>, Tensor<T>>> convs_;
  Tensor<T> fc_w_, fc_b_;
};

/// Frozen random-feature extractor for the perceptual term: four stride-2
/// 3x3 convolutions (widths 16, 32, 64, 64) with leaky rectifiers. Weights
/// come from a fixed seed and never train.
template <class T>
class FeatureExtractor {
 public:
  static constexpr std::uint64_t kSeed = 0x5eed'f00d;
  FeatureExtractor();
  std::vector<Tensor<T>> features(const Tensor<T>& x) const;

 private:
  ParameterSet<T> params_;
  std::vector<std::pair<Tensor<T>, Tensor<T>>> convs_;
};

template <class T> Tensor<T> pixel_loss(const Tensor<T>& pred, const Tensor<T>& gt);
/// Mean squared modulus of the spectrum difference, with the DFT scaled by
/// 1/sqrt(H W). By Parseval this equals pixel_loss.
template <class T> Tensor<T> frequency_loss(const Tensor<T>& pred, const Tensor<T>& gt);
template <class T>
Tensor<T> perceptual_loss(const Tensor<T>& pred, const Tensor<T>& gt, const FeatureExtractor<T>& extractor);

template <class T>
struct AdversarialLosses {
  Tensor<T> gen;
  Tensor<T> disc;
};
/// mean softplus(-D(real)) + mean softplus(D(fake)), fake detached.
template <class T>
Tensor<T> discriminator_loss(const Discriminator<T>& disc, const Tensor<T>& fake, const Tensor<T>& real);
/// Non-saturating generator term mean softplus(-D(fake)).
template <class T>
Tensor<T> generator_adversarial_loss(const Discriminator<T>& disc, const Tensor<T>& fake);
/// Both adversarial terms for one batch.
template <class T>
AdversarialLosses<T> adversarial_losses(const Discriminator<T>& disc, const Tensor<T>& fake, const Tensor<T>& real);

template <class T>
struct LossParts {
  Tensor<T> pixel, freq, percep, adv_gen;
};
template <class T> Tensor<T> total_loss(const LossParts<T>& parts, const LossWeights& w);

/// All four generator terms for one batch. adv_gen is skipped (left
/// undefined) when disc is null.
template <class T>
LossParts<T> loss_parts(const Tensor<T>& pred, const Tensor<T>& gt, const FeatureExtractor<T>& extractor,
                        const Discriminator<T>* disc);

}  // namespace refsr::srnet
