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
#include <numeric>
#include <set>

#include "refsr/core/error.hpp"
#include "refsr/core/rng.hpp"
#include "refsr/metrics/metrics.hpp"
#include "refsr/train/train.hpp"

namespace refsr::train {

using ad::Shape;
using ad::Tensor;
using srnet::Generator;

namespace {

constexpr std::size_t kInferBatch = 16;

// Stream keys so the generator and discriminator never share init draws.
constexpr std::uint64_t kGeneratorKey = 0x67656e;
constexpr std::uint64_t kDiscriminatorKey = 0x646973;
constexpr std::uint64_t kShuffleKey = 0x73687566;

void gather(const PairSet& set, std::span<const std::size_t> idx, Tensor<float>& x, Tensor<float>& y) {
  const std::size_t plane = set.height * set.width;
  const std::size_t b = idx.size();
  std::vector<float> xs(b * set.channels * plane), ys(b * plane);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& p = set.pairs[idx[i]];
    std::copy(p.input.begin(), p.input.end(), xs.begin() + static_cast<std::ptrdiff_t>(i * set.channels * plane));
    std::copy(p.target.begin(), p.target.end(), ys.begin() + static_cast<std::ptrdiff_t>(i * plane));
  }
  x = Tensor<float>::from({b, set.channels, set.height, set.width}, std::move(xs));
  y = Tensor<float>::from({b, 1, set.height, set.width}, std::move(ys));
}

std::vector<std::size_t> strided_subset(std::size_t n, std::size_t max) {
  std::vector<std::size_t> idx;
  if (max == 0 || n <= max) {
    idx.resize(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
  } else {
    for (std::size_t k = 0; k < max; ++k) idx.push_back(k * n / max);
  }
  return idx;
}

double finite_or_throw(const Tensor<float>& t, const char* what, std::size_t batch) {
  const double v = t.item();
  if (!std::isfinite(v)) throw DivergenceError(std::string("non-finite ") + what + " loss", batch);
  return v;
}

}  // namespace

std::pair<double, double> validate_model(const Generator<float>& gen, const PairSet& pairs, std::size_t max_pairs) {
  if (pairs.pairs.empty()) throw DataError("validation set is empty");
  const auto idx = strided_subset(pairs.pairs.size(), max_pairs);
  const std::size_t plane = pairs.height * pairs.width;
  std::vector<double> psnrs, ssims;
  ad::NoGradGuard no_grad;
  std::vector<double> pred(plane), gt(plane);
  for (std::size_t start = 0; start < idx.size(); start += kInferBatch) {
    const std::size_t n = std::min(kInferBatch, idx.size() - start);
    Tensor<float> x, y;
    gather(pairs, std::span(idx).subspan(start, n), x, y);
    const Tensor<float> out = gen.forward(x);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < plane; ++k) {
        pred[k] = out.data()[i * plane + k];
        gt[k] = y.data()[i * plane + k];
      }
      const SliceView pv{pred, pairs.height, pairs.width}, gv{gt, pairs.height, pairs.width};
      psnrs.push_back(psnr(pv, gv));
      ssims.push_back(ssim(pv, gv));
    }
  }
  return {mean_std(psnrs).first, mean_std(ssims).first};
}

TrainResult train(const TrainConfig& cfg, const Dataset& data, const ProgressFn& progress) {
  cfg.validate();
  const PairSet& set = data.train;
  if (set.pairs.empty()) throw DataError("training set is empty");
  if (set.channels != static_cast<std::size_t>(cfg.generator.in_channels)) {
    throw ShapeError("training pairs have " + std::to_string(set.channels) + " channels, the generator expects " +
                     std::to_string(cfg.generator.in_channels));
  }
  const std::set<std::string> held_out(data.held_out_ids.begin(), data.held_out_ids.end());

  Generator<float> gen(cfg.generator, hash_combine(cfg.seed, kGeneratorKey));
  if (cfg.zero_init_output) gen.zero_output_layer();
  srnet::Discriminator<float> disc(hash_combine(cfg.seed, kDiscriminatorKey));
  const srnet::FeatureExtractor<float> extractor;
  ad::Adam opt_g(ad::AdamConfig{cfg.lr}), opt_d(ad::AdamConfig{cfg.lr});
  const bool adversarial = cfg.loss_weights.w_adv > 0.0;

  const std::size_t n = set.pairs.size();
  std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  if (cfg.max_batches_per_epoch > 0) batches = std::min(batches, cfg.max_batches_per_epoch);

  TrainResult result;
  result.best.config = cfg;
  result.best.val_psnr = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> order(n);
  std::size_t batch_index = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(hash_combine(hash_combine(cfg.seed, kShuffleKey), static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochLog log;
    log.epoch = epoch;
    log.lr = lr;
    for (std::size_t b = 0; b < batches; ++b, ++batch_index) {
      const std::size_t begin = b * cfg.batch_size;
      const auto idx = std::span(order).subspan(begin, std::min(cfg.batch_size, n - begin));
      for (std::size_t i : idx) {
        if (held_out.count(set.pairs[i].case_id)) {
          throw ContractError("held-out case " + set.pairs[i].case_id + " reached a training batch");
        }
      }
      Tensor<float> x, y;
      gather(set, idx, x, y);
      const Tensor<float> fake = gen.forward(x);

      if (adversarial) {
        const Tensor<float> ld = srnet::discriminator_loss(disc, fake, y);
        log.adv_d += finite_or_throw(ld, "discriminator", batch_index);
        ld.backward();
        opt_d.step(disc.params(), lr);
        disc.params().zero_grad();
      }

      disc.params().set_trainable(false);
      const auto parts = srnet::loss_parts(fake, y, extractor, adversarial ? &disc : nullptr);
      log.pixel += finite_or_throw(parts.pixel, "pixel", batch_index);
      log.freq += finite_or_throw(parts.freq, "frequency", batch_index);
      log.percep += finite_or_throw(parts.percep, "perceptual", batch_index);
      if (adversarial) log.adv_g += finite_or_throw(parts.adv_gen, "adversarial", batch_index);
      const Tensor<float> total = srnet::total_loss(parts, cfg.loss_weights);
      finite_or_throw(total, "total", batch_index);
      total.backward();
      disc.params().set_trainable(true);
      opt_g.step(gen.params(), lr);
      gen.params().zero_grad();
    }
    const double inv = 1.0 / static_cast<double>(batches);
    log.pixel *= inv;
    log.freq *= inv;
    log.percep *= inv;
    log.adv_g *= inv;
    log.adv_d *= inv;
    std::tie(log.val_psnr, log.val_ssim) = validate_model(gen, data.val, cfg.val_max_pairs);
    if (!std::isfinite(log.val_psnr)) throw DivergenceError("non-finite validation PSNR", batch_index);
    if (log.val_psnr > result.best.val_psnr) {
      result.best.val_psnr = log.val_psnr;
      result.best.epoch = epoch;
      result.best.generator = ad::export_params(gen.params());
    }
    result.log.push_back(log);
    if (progress) progress(log);
  }
  return result;
}

DwiCase infer_volume(const ModelCheckpoint& ckpt, const LowResCase& lr, Mode mode) {
  if (ckpt.config.mode != mode) {
    throw ConfigError(std::string("checkpoint was trained in ") + mode_name(ckpt.config.mode) + " mode, not " +
                      mode_name(mode));
  }
  return infer_volume(ckpt.build(), lr, mode);
}

DwiCase infer_volume(const Generator<float>& gen, const LowResCase& lr, Mode mode) {
  const int want = mode == Mode::kProposed ? 2 : 1;
  if (gen.config().in_channels != want) throw ConfigError("generator input channels do not match the mode");
  const Volume& b0 = lr.b0_hr.volume;
  if (b0.data().empty()) throw DataError("case " + lr.case_id + " has no HR b0 to define the output grid");
  const Dims hr = b0.dims();
  for (const auto& d : lr.dwis) {
    const Dims& l = d.volume.dims();
    if (l.z == 0 || l.y == 0 || l.x == 0 || hr.z % l.z || hr.y % l.y || hr.x % l.x) {
      throw ShapeError("b0 grid " + to_string(hr) + " is not a multiple of the DWI grid " + to_string(l));
    }
  }
  const std::vector<DwiImage> up = bilinear_baseline(lr, hr);
  const std::size_t plane = hr.slice_count();
  const std::size_t ch = static_cast<std::size_t>(want);

  DwiCase out;
  out.case_id = lr.case_id;
  out.b0 = lr.b0_hr;
  ad::NoGradGuard no_grad;
  for (const auto& src : up) {
    DwiImage img = src;
    for (std::size_t z0 = 0; z0 < hr.z; z0 += kInferBatch) {
      const std::size_t nz = std::min(kInferBatch, hr.z - z0);
      std::vector<float> xs(nz * ch * plane);
      for (std::size_t i = 0; i < nz; ++i) {
        const auto a = src.volume.slice(z0 + i);
        std::copy(a.begin(), a.end(), xs.begin() + static_cast<std::ptrdiff_t>(i * ch * plane));
        if (ch == 2) {
          const auto g = b0.slice(z0 + i);
          std::copy(g.begin(), g.end(), xs.begin() + static_cast<std::ptrdiff_t>((i * ch + 1) * plane));
        }
      }
      const Tensor<float> y = gen.forward(Tensor<float>::from({nz, ch, hr.y, hr.x}, std::move(xs)));
      for (std::size_t i = 0; i < nz; ++i) {
        auto dst = img.volume.slice(z0 + i);
        for (std::size_t k = 0; k < plane; ++k) dst[k] = y.data()[i * plane + k];
      }
    }
    out.dwis.push_back(std::move(img));
  }
  return out;
}

}  // namespace refsr::train
