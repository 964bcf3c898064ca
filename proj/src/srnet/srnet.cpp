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

#include "refsr/srnet/srnet.hpp"

#include <cmath>

#include "refsr/core/error.hpp"

namespace refsr::srnet {

using ad::Shape;

void GeneratorConfig::validate() const {
  if (base_width < 1) throw ConfigError("base_width must be >= 1");
  if (channel_mults.empty()) throw ConfigError("channel_mults must not be empty");
  for (int m : channel_mults) {
    if (m < 1) throw ConfigError("channel_mults entries must be >= 1");
  }
  if (in_channels != 1 && in_channels != 2) throw ConfigError("in_channels must be 1 or 2");
  if (attention_heads < 1) throw ConfigError("attention_heads must be >= 1");
  for (int d : attention_at_depth) {
    if (d < 0 || d > levels()) {
      throw ConfigError("attention depth " + std::to_string(d) + " outside [0, " + std::to_string(levels()) + "]");
    }
    const int w = width(std::min(d, levels() - 1));
    if (w % attention_heads != 0) {
      throw ConfigError("width " + std::to_string(w) + " at attention depth " + std::to_string(d) +
                        " is not divisible by " + std::to_string(attention_heads) + " heads");
    }
  }
  if (width(levels() - 1) % attention_heads != 0) {
    throw ConfigError("bottleneck width is not divisible by the attention head count");
  }
}

void LossWeights::validate() const {
  for (double w : {w_pixel, w_freq, w_percep, w_adv}) {
    if (!(w >= 0.0)) throw ConfigError("loss weights must be non-negative");
  }
  if (w_pixel + w_freq + w_percep + w_adv <= 0.0) throw ConfigError("at least one loss weight must be positive");
}

void to_json(nlohmann::json& j, const GeneratorConfig& c) {
  j = {{"base_width", c.base_width},           {"channel_mults", c.channel_mults},
       {"attention_at_depth", c.attention_at_depth}, {"attention_heads", c.attention_heads},
       {"residual_output", c.residual_output}, {"in_channels", c.in_channels}};
}

void from_json(const nlohmann::json& j, GeneratorConfig& c) {
  GeneratorConfig d;
  c.base_width = j.value("base_width", d.base_width);
  c.channel_mults = j.value("channel_mults", d.channel_mults);
  c.attention_at_depth = j.value("attention_at_depth", d.attention_at_depth);
  c.attention_heads = j.value("attention_heads", d.attention_heads);
  c.residual_output = j.value("residual_output", d.residual_output);
  c.in_channels = j.value("in_channels", d.in_channels);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = {{"w_pixel", w.w_pixel}, {"w_freq", w.w_freq}, {"w_percep", w.w_percep}, {"w_adv", w.w_adv}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  LossWeights d;
  w.w_pixel = j.value("w_pixel", d.w_pixel);
  w.w_freq = j.value("w_freq", d.w_freq);
  w.w_percep = j.value("w_percep", d.w_percep);
  w.w_adv = j.value("w_adv", d.w_adv);
}

std::size_t norm_groups(std::size_t channels) {
  for (std::size_t g = std::min<std::size_t>(8, channels); g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

// ---- generator -------------------------------------------------------------

template <class T>
typename Generator<T>::Conv Generator<T>::conv(const std::string& name, std::size_t cin, std::size_t cout,
                                               std::size_t k, std::size_t stride) {
  const std::size_t fan_in = cin * k * k;
  Conv c;
  c.w = params_.uniform(name + ".weight", Shape{cout, cin, k, k}, fan_in, seed_);
  c.b = params_.uniform(name + ".bias", Shape{cout}, fan_in, seed_);
  c.stride = stride;
  c.pad = k / 2;
  return c;
}

template <class T>
typename Generator<T>::Norm Generator<T>::norm(const std::string& name, std::size_t c) {
  Norm n;
  n.gamma = params_.constant(name + ".gamma", Shape{c}, T(1));
  n.beta = params_.constant(name + ".beta", Shape{c}, T(0));
  n.groups = norm_groups(c);
  return n;
}

template <class T>
typename Generator<T>::ResBlock Generator<T>::res(const std::string& name, std::size_t cin, std::size_t cout) {
  ResBlock r;
  r.n1 = norm(name + ".norm1", cin);
  r.c1 = conv(name + ".conv1", cin, cout, 3, 1);
  r.n2 = norm(name + ".norm2", cout);
  r.c2 = conv(name + ".conv2", cout, cout, 3, 1);
  if (cin != cout) {
    r.has_skip = true;
    r.skip = conv(name + ".skip", cin, cout, 1, 1);
  }
  return r;
}

template <class T>
typename Generator<T>::Attention Generator<T>::attention(const std::string& name, std::size_t c) {
  Attention a;
  a.norm = norm(name + ".norm", c);
  a.q = conv(name + ".q", c, c, 1, 1);
  a.k = conv(name + ".k", c, c, 1, 1);
  a.v = conv(name + ".v", c, c, 1, 1);
  a.proj = conv(name + ".proj", c, c, 1, 1);
  a.heads = static_cast<std::size_t>(cfg_.attention_heads);
  return a;
}

template <class T>
Generator<T>::Generator(const GeneratorConfig& cfg, std::uint64_t seed) : cfg_(cfg), seed_(seed) {
  cfg_.validate();
  const int levels = cfg_.levels();
  auto w = [&](int l) { return static_cast<std::size_t>(cfg_.width(l)); };
  const std::string p = "gen";
  in_conv_ = conv(p + ".in", static_cast<std::size_t>(cfg_.in_channels), w(0), 3, 1);
  for (int l = 0; l < levels; ++l) {
    const std::string n = p + ".enc" + std::to_string(l);
    Level lv;
    lv.r1 = res(n + ".res0", w(l), w(l));
    lv.r2 = res(n + ".res1", w(l), w(l));
    if (cfg_.attention_at_depth.count(l)) {
      lv.has_attn = true;
      lv.attn = attention(n + ".attn", w(l));
    }
    lv.down = conv(n + ".down", w(l), w(std::min(l + 1, levels - 1)), 3, 2);
    enc_.push_back(std::move(lv));
  }
  const std::size_t bw = w(levels - 1);
  mid1_ = res(p + ".mid.res0", bw, bw);
  mid_attn_ = attention(p + ".mid.attn", bw);
  mid2_ = res(p + ".mid.res1", bw, bw);
  std::size_t prev = bw;
  for (int l = levels - 1; l >= 0; --l) {
    const std::string n = p + ".dec" + std::to_string(l);
    UpLevel up;
    up.up = conv(n + ".up", prev, w(l), 3, 1);
    up.r1 = res(n + ".res0", 2 * w(l), w(l));
    up.r2 = res(n + ".res1", w(l), w(l));
    if (cfg_.attention_at_depth.count(l)) {
      up.has_attn = true;
      up.attn = attention(n + ".attn", w(l));
    }
    dec_.push_back(std::move(up));
    prev = w(l);
  }
  out_norm_ = norm(p + ".out.norm", w(0));
  out_conv_ = conv(p + ".out.conv", w(0), 1, 3, 1);
}

template <class T>
void Generator<T>::zero_output_layer() {
  for (T& v : out_conv_.w.data()) v = T(0);
  for (T& v : out_conv_.b.data()) v = T(0);
}

template <class T>
Tensor<T> Generator<T>::apply(const Conv& c, const Tensor<T>& x) const {
  return ad::conv2d(x, c.w, c.b, c.stride, c.pad);
}

template <class T>
Tensor<T> Generator<T>::apply(const Norm& n, const Tensor<T>& x) const {
  return ad::group_norm(x, n.gamma, n.beta, n.groups);
}

template <class T>
Tensor<T> Generator<T>::apply(const ResBlock& r, const Tensor<T>& x) const {
  Tensor<T> h = apply(r.c1, ad::silu(apply(r.n1, x)));
  h = apply(r.c2, ad::silu(apply(r.n2, h)));
  return ad::add(r.has_skip ? apply(r.skip, x) : x, h);
}

template <class T>
Tensor<T> Generator<T>::apply(const Attention& a, const Tensor<T>& x) const {
  const std::size_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  const std::size_t d = c / a.heads;
  const Tensor<T> h = apply(a.norm, x);
  const Shape split{b * a.heads, d, hw};
  const Tensor<T> q = ad::reshape(apply(a.q, h), split);
  const Tensor<T> k = ad::reshape(apply(a.k, h), split);
  const Tensor<T> v = ad::reshape(apply(a.v, h), split);
  // scores[i, j] = q_i . k_j / sqrt(d) over positions i, j
  const Tensor<T> scores = ad::scale(ad::matmul(q, k, true, false), static_cast<T>(1.0 / std::sqrt(double(d))));
  const Tensor<T> attn = ad::softmax_last(scores);
  const Tensor<T> o = ad::reshape(ad::matmul(v, attn, false, true), x.shape());
  return ad::add(x, apply(a.proj, o));
}

template <class T>
Tensor<T> Generator<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != static_cast<std::size_t>(cfg_.in_channels)) {
    throw ShapeError("generator expects [B, " + std::to_string(cfg_.in_channels) + ", H, W], got " +
                     ad::to_string(x.shape()));
  }
  const std::size_t div = std::size_t{1} << cfg_.levels();
  if (x.dim(2) % div != 0 || x.dim(3) % div != 0) {
    throw ShapeError("generator input " + ad::to_string(x.shape()) + " is not divisible by " + std::to_string(div));
  }
  Tensor<T> h = apply(in_conv_, x);
  std::vector<Tensor<T>> skips;
  for (const auto& lv : enc_) {
    h = apply(lv.r2, apply(lv.r1, h));
    if (lv.has_attn) h = apply(lv.attn, h);
    skips.push_back(h);
    h = apply(lv.down, h);
  }
  h = apply(mid2_, apply(mid_attn_, apply(mid1_, h)));
  for (const auto& up : dec_) {
    h = apply(up.up, ad::upsample_nearest2x(h));
    h = ad::concat_channels<T>({h, skips.back()});
    skips.pop_back();
    h = apply(up.r2, apply(up.r1, h));
    if (up.has_attn) h = apply(up.attn, h);
  }
  h = apply(out_conv_, ad::silu(apply(out_norm_, h)));
  if (cfg_.residual_output) h = ad::add(h, ad::channel(x, 0));
  return h;
}

// ---- discriminator and extractor ---------------------------------------

template <class T>
Discriminator<T>::Discriminator(std::uint64_t seed, std::vector<std::size_t> widths) {
  std::size_t cin = 1;
  for (std::size_t i = 0; i < widths.size(); ++i) {
    const std::string n = "disc.conv" + std::to_string(i);
    auto w = params_.uniform(n + ".weight", Shape{widths[i], cin, 3, 3}, cin * 9, seed);
    auto b = params_.uniform(n + ".bias", Shape{widths[i]}, cin * 9, seed);
    convs_.emplace_back(w, b);
    cin = widths[i];
  }
  fc_w_ = params_.uniform("disc.fc.weight", Shape{1, cin}, cin, seed);
  fc_b_ = params_.uniform("disc.fc.bias", Shape{1}, cin, seed);
}

template <class T>
Tensor<T> Discriminator<T>::forward(const Tensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw ShapeError("discriminator expects [B, 1, H, W], got " + ad::to_string(x.shape()));
  }
  Tensor<T> h = x;
  for (const auto& [w, b] : convs_) h = ad::leaky_relu(ad::conv2d(h, w, b, 2, 1), T(0.2));
  return ad::linear(ad::spatial_mean(h), fc_w_, fc_b_);
}

template <class T>
FeatureExtractor<T>::FeatureExtractor() {
  std::size_t cin = 1;
  const std::size_t widths[] = {16, 32, 64, 64};
  for (std::size_t i = 0; i < 4; ++i) {
    const std::string n = "percep.conv" + std::to_string(i);
    auto w = params_.uniform(n + ".weight", Shape{widths[i], cin, 3, 3}, cin * 9, kSeed);
    auto b = params_.uniform(n + ".bias", Shape{widths[i]}, cin * 9, kSeed);
    convs_.emplace_back(w, b);
    cin = widths[i];
  }
  params_.set_trainable(false);
}

template <class T>
std::vector<Tensor<T>> FeatureExtractor<T>::features(const Tensor<T>& x) const {
  std::vector<Tensor<T>> out;
  Tensor<T> h = x;
  for (const auto& [w, b] : convs_) {
    h = ad::leaky_relu(ad::conv2d(h, w, b, 2, 1), T(0.2));
    out.push_back(h);
  }
  return out;
}

// ---- losses ---------------------------------------------------------------

template <class T>
Tensor<T> pixel_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
  const Tensor<T> d = ad::sub(pred, gt);
  return ad::mean(ad::mul(d, d));
}

template <class T>
Tensor<T> frequency_loss(const Tensor<T>& pred, const Tensor<T>& gt) {
  if (pred.rank() < 2) throw ShapeError("frequency_loss needs 2D slices, got " + ad::to_string(pred.shape()));
  ad::require_same_shape("frequency_loss", pred.shape(), gt.shape());
  const double hw = static_cast<double>(pred.shape()[pred.rank() - 2] * pred.shape()[pred.rank() - 1]);
  const Tensor<T> d = ad::sub(ad::dft2(pred), ad::dft2(gt));
  // mean over (re, im) pairs halves the squared modulus; 1/(H W) is the
  // squared 1/sqrt(H W) normalization.
  return ad::scale(ad::mean(ad::mul(d, d)), static_cast<T>(2.0 / hw));
}

template <class T>
Tensor<T> perceptual_loss(const Tensor<T>& pred, const Tensor<T>& gt, const FeatureExtractor<T>& extractor) {
  const auto fp = extractor.features(pred);
  std::vector<Tensor<T>> fg;
  {
    ad::NoGradGuard guard;
    fg = extractor.features(gt);
  }
  Tensor<T> total;
  for (std::size_t i = 0; i < fp.size(); ++i) {
    const Tensor<T> term = pixel_loss(fp[i], fg[i]);
    total = total.defined() ? ad::add(total, term) : term;
  }
  return total;
}

template <class T>
Tensor<T> discriminator_loss(const Discriminator<T>& disc, const Tensor<T>& fake, const Tensor<T>& real) {
  const Tensor<T> lr = disc.forward(real);
  const Tensor<T> lf = disc.forward(fake.detach());
  return ad::add(ad::mean(ad::softplus(ad::scale(lr, T(-1)))), ad::mean(ad::softplus(lf)));
}

template <class T>
Tensor<T> generator_adversarial_loss(const Discriminator<T>& disc, const Tensor<T>& fake) {
  return ad::mean(ad::softplus(ad::scale(disc.forward(fake), T(-1))));
}

template <class T>
AdversarialLosses<T> adversarial_losses(const Discriminator<T>& disc, const Tensor<T>& fake, const Tensor<T>& real) {
  return {generator_adversarial_loss(disc, fake), discriminator_loss(disc, fake, real)};
}

template <class T>
Tensor<T> total_loss(const LossParts<T>& parts, const LossWeights& w) {
  Tensor<T> total;
  auto acc = [&](const Tensor<T>& term, double weight) {
    if (!term.defined() || weight == 0.0) return;
    const Tensor<T> t = ad::scale(term, static_cast<T>(weight));
    total = total.defined() ? ad::add(total, t) : t;
  };
  acc(parts.pixel, w.w_pixel);
  acc(parts.freq, w.w_freq);
  acc(parts.percep, w.w_percep);
  acc(parts.adv_gen, w.w_adv);
  if (!total.defined()) throw ConfigError("total_loss: no weighted term is available");
  return total;
}

template <class T>
LossParts<T> loss_parts(const Tensor<T>& pred, const Tensor<T>& gt, const FeatureExtractor<T>& extractor,
                        const Discriminator<T>* disc) {
  LossParts<T> p;
  p.pixel = pixel_loss(pred, gt);
  p.freq = frequency_loss(pred, gt);
  p.percep = perceptual_loss(pred, gt, extractor);
  if (disc) p.adv_gen = generator_adversarial_loss(*disc, pred);
  return p;
}

#define REFSR_INSTANTIATE(T)                                                                                  \
  template class Generator<T>;                                                                                \
  template class Discriminator<T>;                                                                            \
  template class FeatureExtractor<T>;                                                                         \
  template Tensor<T> pixel_loss(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> frequency_loss(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> perceptual_loss(const Tensor<T>&, const Tensor<T>&, const FeatureExtractor<T>&);         \
  template Tensor<T> discriminator_loss(const Discriminator<T>&, const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> generator_adversarial_loss(const Discriminator<T>&, const Tensor<T>&);                   \
  template AdversarialLosses<T> adversarial_losses(const Discriminator<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> total_loss(const LossParts<T>&, const LossWeights&);                                     \
  template LossParts<T> loss_parts(const Tensor<T>&, const Tensor<T>&, const FeatureExtractor<T>&,            \
                                   const Discriminator<T>*);

REFSR_INSTANTIATE(float)
REFSR_INSTANTIATE(double)

}  // namespace refsr::srnet
