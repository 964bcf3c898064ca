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

#include "refsr/cli/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>

#include "refsr/core/rng.hpp"
#include "refsr/degrade/degrade.hpp"
#include "refsr/dtfit/dtfit.hpp"
#include "refsr/metrics/metrics.hpp"
#include "refsr/phantom/phantom.hpp"
#include "refsr/srnet/srnet.hpp"

namespace refsr::cli {

using ad::Shape;
using ad::Tensor;
using T64 = Tensor<double>;

namespace {

constexpr double kGradLimit = 1e-4;

T64 rnd(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  std::vector<double> v(ad::numel(s));
  for (double& x : v) x = rng.uniform(lo, hi);
  return T64::from(std::move(s), std::move(v));
}

// Keeps values clear of the kink of piecewise-linear activations.
T64 rnd_away(Shape s, std::uint64_t seed) {
  T64 t = rnd(std::move(s), seed);
  for (double& x : t.data()) x += x < 0 ? -0.05 : 0.05;
  return t;
}

// Scalar probe weighting every output element differently.
T64 probe(const T64& y, std::uint64_t seed) { return ad::mean(ad::mul(y, rnd(y.shape(), seed))); }

struct GradCase {
  std::function<T64()> fn;
  std::vector<T64> inputs;
  std::size_t max_per_input = 0;
};

CheckResult grad_row(const std::string& name, const std::vector<GradCase>& cases) {
  CheckResult r{"gradient", name, true, 0.0, kGradLimit, ""};
  std::size_t checked = 0;
  for (const auto& c : cases) {
    const auto rep = ad::gradient_check(c.fn, c.inputs, 1e-5, c.max_per_input);
    checked += rep.checked;
    r.value = std::max(r.value, rep.max_rel_error);
  }
  r.passed = r.value < kGradLimit;
  r.detail = std::to_string(cases.size()) + " shapes, " + std::to_string(checked) + " elements";
  return r;
}

using Unary = std::function<T64(const T64&)>;

CheckResult unary_row(const std::string& name, const Unary& f, const std::vector<Shape>& shapes, std::uint64_t seed) {
  std::vector<GradCase> cases;
  for (const auto& s : shapes) {
    T64 a = rnd_away(s, ++seed);
    const std::uint64_t ps = ++seed;
    cases.push_back({[=] { return probe(f(a), ps); }, {a}});
  }
  return grad_row(name, cases);
}

CheckResult binary_row(const std::string& name, const std::function<T64(const T64&, const T64&)>& f,
                       const std::vector<Shape>& shapes, std::uint64_t seed) {
  std::vector<GradCase> cases;
  for (const auto& s : shapes) {
    T64 a = rnd(s, ++seed), b = rnd(s, ++seed);
    const std::uint64_t ps = ++seed;
    cases.push_back({[=] { return probe(f(a, b), ps); }, {a, b}});
  }
  return grad_row(name, cases);
}

CheckResult conv_row(const std::string& name, std::size_t stride, std::uint64_t seed) {
  struct S {
    Shape x, w;
    std::size_t pad;
  };
  const std::vector<S> shapes = stride == 1
                                    ? std::vector<S>{{{1, 2, 5, 5}, {3, 2, 3, 3}, 1},
                                                     {{2, 3, 4, 6}, {2, 3, 3, 3}, 1},
                                                     {{1, 2, 6, 6}, {3, 2, 1, 1}, 0}}
                                    : std::vector<S>{{{1, 2, 6, 6}, {3, 2, 3, 3}, 1},
                                                     {{2, 1, 8, 8}, {2, 1, 3, 3}, 1},
                                                     {{1, 3, 5, 7}, {2, 3, 3, 3}, 1}};
  std::vector<GradCase> cases;
  for (const auto& s : shapes) {
    T64 x = rnd(s.x, ++seed), w = rnd(s.w, ++seed), b = rnd({s.w[0]}, ++seed);
    const std::uint64_t ps = ++seed;
    const std::size_t pad = s.pad;
    cases.push_back({[=] { return probe(ad::conv2d(x, w, b, stride, pad), ps); }, {x, w, b}});
  }
  return grad_row(name, cases);
}

srnet::GeneratorConfig tiny_generator() {
  srnet::GeneratorConfig c;
  c.base_width = 4;
  c.channel_mults = {1, 2};
  c.attention_at_depth = {1};
  c.attention_heads = 2;
  c.in_channels = 2;
  return c;
}

CheckResult generator_row() {
  const Shape shapes[] = {{1, 2, 16, 16}, {2, 2, 16, 16}, {1, 2, 32, 16}};
  CheckResult r{"gradient", "generator + 4-term loss", true, 0.0, kGradLimit, ""};
  std::uint64_t seed = 900;
  std::size_t checked = 0;
  for (const auto& s : shapes) {
    srnet::Generator<double> g(tiny_generator(), ++seed);
    srnet::Discriminator<double> d(++seed, {4, 8});
    d.params().set_trainable(false);
    const srnet::FeatureExtractor<double> fe;
    const T64 x = rnd(s, ++seed, 0.0, 1.0);
    const T64 gt = rnd({s[0], 1, s[2], s[3]}, ++seed, 0.0, 1.0);
    std::vector<T64> inputs;
    for (auto& p : g.params().items()) inputs.push_back(p.tensor);
    const auto rep = ad::gradient_check(
        [&] { return srnet::total_loss(srnet::loss_parts(g.forward(x), gt, fe, &d), srnet::LossWeights{}); }, inputs,
        1e-5, 6);
    checked += rep.checked;
    r.value = std::max(r.value, rep.max_rel_error);
  }
  r.passed = r.value < kGradLimit;
  r.detail = "3 shapes, " + std::to_string(checked) + " parameter elements";
  return r;
}

CheckResult make_row(const std::string& group, const std::string& name, double value, double limit,
                     bool less_is_pass = true) {
  CheckResult r{group, name, less_is_pass ? value < limit : value == limit, value, limit, ""};
  return r;
}

Volume random_volume(Dims d, std::uint64_t seed) {
  Rng rng(seed);
  Volume v(d);
  for (double& x : v.data()) x = rng.uniform(-1.0, 1.0);
  return v;
}

Volume lincomb(double a, const Volume& v, double b, const Volume& w) {
  Volume out = v;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = a * v.data()[i] + b * w.data()[i];
  return out;
}

double max_abs_diff(const Volume& a, const Volume& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

std::array<double, 9> rotate(const std::array<double, 9>& d, Rng& rng) {
  // random unit quaternion -> rotation matrix
  double q[4];
  double n = 0.0;
  for (double& v : q) {
    v = rng.normal();
    n += v * v;
  }
  n = std::sqrt(n);
  for (double& v : q) v /= n;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  const double r[9] = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
                       2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
                       2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  std::array<double, 9> out{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) s += r[i * 3 + k] * d[static_cast<std::size_t>(k * 3 + l)] * r[j * 3 + l];
      out[static_cast<std::size_t>(i * 3 + j)] = s;
    }
  return out;
}

TensorField single(const std::array<double, 9>& d) {
  TensorField t(Dims{1, 1, 1});
  t.set_tensor(0, d);
  t.mask[0] = 1;
  return t;
}

}  // namespace

std::vector<CheckResult> gradient_checks() {
  const std::vector<Shape> ew{{3}, {2, 5}, {2, 3, 4, 4}};
  std::vector<CheckResult> out;
  out.push_back(binary_row("add", [](const T64& a, const T64& b) { return ad::add(a, b); }, ew, 10));
  out.push_back(binary_row("sub", [](const T64& a, const T64& b) { return ad::sub(a, b); }, ew, 20));
  out.push_back(binary_row("mul", [](const T64& a, const T64& b) { return ad::mul(a, b); }, ew, 30));
  out.push_back(unary_row("scale", [](const T64& a) { return ad::scale(a, 2.5); }, ew, 40));
  out.push_back(unary_row("leaky_relu", [](const T64& a) { return ad::leaky_relu(a); }, ew, 50));
  out.push_back(unary_row("silu", [](const T64& a) { return ad::silu(a); }, ew, 60));
  out.push_back(unary_row("sigmoid", [](const T64& a) { return ad::sigmoid(a); }, ew, 70));
  out.push_back(unary_row("softplus", [](const T64& a) { return ad::softplus(ad::scale(a, 4.0)); }, ew, 80));
  out.push_back(unary_row("softmax_last", [](const T64& a) { return ad::softmax_last(a); }, ew, 90));
  out.push_back(unary_row("mean", [](const T64& a) { return ad::mean(ad::mul(a, a)); }, ew, 100));
  out.push_back(unary_row("spatial_mean", [](const T64& a) { return ad::spatial_mean(a); },
                          {{1, 2, 3, 3}, {2, 3, 4, 4}, {2, 1, 5, 3}}, 110));
  out.push_back(conv_row("conv2d stride 1", 1, 120));
  out.push_back(conv_row("conv2d stride 2", 2, 140));
  out.push_back(unary_row("upsample_nearest2x", [](const T64& a) { return ad::upsample_nearest2x(a); },
                          {{1, 1, 2, 2}, {2, 3, 3, 2}, {1, 2, 4, 4}}, 160));
  out.push_back(unary_row("dft2", [](const T64& a) { return ad::dft2(a); }, {{4, 4}, {1, 2, 4, 8}, {3, 6}}, 170));
  out.push_back(unary_row("reshape", [](const T64& a) { return ad::reshape(a, {a.numel()}); }, ew, 180));
  out.push_back(unary_row("channel", [](const T64& a) { return ad::channel(a, a.dim(1) - 1); },
                          {{1, 2, 3, 3}, {2, 3, 2, 4}, {1, 1, 4, 4}}, 190));
  {
    std::vector<GradCase> cases;
    std::uint64_t seed = 200;
    const std::vector<std::pair<Shape, Shape>> shapes{
        {{1, 1, 3, 3}, {1, 2, 3, 3}}, {{2, 3, 2, 4}, {2, 1, 2, 4}}, {{1, 2, 4, 4}, {1, 2, 4, 4}}};
    for (const auto& [sa, sb] : shapes) {
      T64 a = rnd(sa, ++seed), b = rnd(sb, ++seed);
      const std::uint64_t ps = ++seed;
      cases.push_back({[=] { return probe(ad::concat_channels<double>({a, b}), ps); }, {a, b}});
    }
    out.push_back(grad_row("concat_channels", cases));
  }
  {
    std::vector<GradCase> cases;
    std::uint64_t seed = 220;
    const std::vector<std::array<std::size_t, 5>> shapes{{1, 3, 4, 0, 0}, {2, 4, 5, 1, 1}, {3, 5, 2, 1, 0}};
    for (const auto& s : shapes) {
      const bool ta = s[3], tb = s[4];
      const std::size_t m = s[1], k = s[2], n = s[1] + 1;
      T64 a = rnd(ta ? Shape{s[0], k, m} : Shape{s[0], m, k}, ++seed);
      T64 b = rnd(tb ? Shape{s[0], n, k} : Shape{s[0], k, n}, ++seed);
      const std::uint64_t ps = ++seed;
      cases.push_back({[=] { return probe(ad::matmul(a, b, ta, tb), ps); }, {a, b}});
    }
    out.push_back(grad_row("matmul", cases));
  }
  {
    std::vector<GradCase> cases;
    std::uint64_t seed = 240;
    const std::vector<std::array<std::size_t, 3>> shapes{{1, 3, 2}, {2, 4, 3}, {3, 5, 1}};
    for (const auto& [b, k, n] : shapes) {
      T64 x = rnd({b, k}, ++seed), w = rnd({n, k}, ++seed), bias = rnd({n}, ++seed);
      const std::uint64_t ps = ++seed;
      cases.push_back({[=] { return probe(ad::linear(x, w, bias), ps); }, {x, w, bias}});
    }
    out.push_back(grad_row("linear", cases));
  }
  {
    std::vector<GradCase> cases;
    std::uint64_t seed = 260;
    const std::vector<std::pair<Shape, std::size_t>> shapes{{{1, 4, 3, 3}, 2}, {{2, 6, 2, 2}, 3}, {{2, 4, 4, 4}, 1}};
    for (const auto& [s, groups] : shapes) {
      T64 x = rnd(s, ++seed), gamma = rnd({s[1]}, ++seed, 0.5, 1.5), beta = rnd({s[1]}, ++seed);
      const std::uint64_t ps = ++seed;
      const std::size_t g = groups;
      cases.push_back({[=] { return probe(ad::group_norm(x, gamma, beta, g), ps); }, {x, gamma, beta}});
    }
    out.push_back(grad_row("group_norm", cases));
  }
  out.push_back(generator_row());
  return out;
}

std::vector<CheckResult> parseval_checks() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const std::size_t h = 8 + 8 * (s % 4), w = 8 + 8 * ((s / 4) % 4);
    const T64 a = rnd({1, 1, h, w}, 5000 + s, 0.0, 1.0), b = rnd({1, 1, h, w}, 7000 + s, 0.0, 1.0);
    const double p = srnet::pixel_loss(a, b).item(), f = srnet::frequency_loss(a, b).item();
    worst = std::max(worst, std::abs(f - p) / p);
  }
  auto r = make_row("parseval", "frequency_loss == pixel_loss (100 pairs)", worst, 1e-6);
  return {r};
}

std::vector<CheckResult> degradation_checks() {
  std::vector<CheckResult> out;
  double lin = 0.0, lin_up = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Volume v = random_volume({8, 16, 12}, seed), w = random_volume({8, 16, 12}, seed + 100);
    const double a = 0.3 * static_cast<double>(seed), b = -1.7;
    lin = std::max(lin, max_abs_diff(degrade_volume(lincomb(a, v, b, w), {}),
                                     lincomb(a, degrade_volume(v, {}), b, degrade_volume(w, {}))));
    lin_up = std::max(lin_up, max_abs_diff(upsample_to_grid(lincomb(a, v, b, w), {16, 32, 24}),
                                           lincomb(a, upsample_to_grid(v, {16, 32, 24}), b,
                                                   upsample_to_grid(w, {16, 32, 24}))));
  }
  out.push_back(make_row("degradation", "block average + bilinear downsample linearity", lin, 1e-6));
  out.push_back(make_row("degradation", "bilinear upsample linearity", lin_up, 1e-6));

  Volume c({8, 16, 16});
  for (double& x : c.data()) x = 0.37;
  double cerr = 0.0;
  const Volume down = degrade_volume(c, {}), up = upsample_to_grid(c, {16, 32, 32});
  for (double x : down.data()) cerr = std::max(cerr, std::abs(x - 0.37));
  for (double x : up.data()) cerr = std::max(cerr, std::abs(x - 0.37));
  out.push_back(make_row("degradation", "constant preservation", cerr, 1e-12));

  // f = x sampled at LR centres, and the interior of the round trip
  Volume ramp({8, 32, 32});
  for (std::size_t z = 0; z < 8; ++z)
    for (std::size_t y = 0; y < 32; ++y)
      for (std::size_t x = 0; x < 32; ++x) ramp.at(z, y, x) = 0.5 * static_cast<double>(x) + 0.25 * static_cast<double>(y) + 1.0;
  const Volume lr = downsample_in_plane(ramp, 4);
  double aerr = 0.0;
  for (std::size_t z = 0; z < 8; ++z)
    for (std::size_t j = 0; j < 8; ++j)
      for (std::size_t i = 0; i < 8; ++i) {
        const double xs = (static_cast<double>(i) + 0.5) * 4 - 0.5, ys = (static_cast<double>(j) + 0.5) * 4 - 0.5;
        aerr = std::max(aerr, std::abs(lr.at(z, j, i) - (0.5 * xs + 0.25 * ys + 1.0)));
      }
  const Volume back = upsample_to_grid(degrade_volume(ramp, {}), ramp.dims());
  for (std::size_t z = 0; z < 8; ++z)
    for (std::size_t y = 2; y < 30; ++y)
      for (std::size_t x = 2; x < 30; ++x) aerr = std::max(aerr, std::abs(back.at(z, y, x) - ramp.at(z, y, x)));
  out.push_back(make_row("degradation", "affine exactness", aerr, 1e-9));

  Volume four({4, 8, 8});
  Rng rng(3);
  std::vector<double> plane(64);
  for (double& x : plane) x = rng.uniform();
  for (std::size_t z = 0; z < 4; ++z) std::copy(plane.begin(), plane.end(), four.slice(z).begin());
  const Volume avg = downsample_through_plane(four, {});
  double ferr = 0.0;
  for (std::size_t i = 0; i < 64; ++i) ferr = std::max(ferr, std::abs(avg.data()[i] - plane[i]) / std::max(plane[i], 1e-300));
  out.push_back(make_row("degradation", "4 identical slices average to themselves", ferr, 1e-15));
  return out;
}

std::vector<CheckResult> ssim_checks() {
  std::vector<CheckResult> out;
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 50; ++s) {
    Rng rng(300 + s);
    std::vector<double> a(1024), b(1024);
    for (std::size_t i = 0; i < 1024; ++i) {
      a[i] = rng.uniform();
      b[i] = std::clamp(a[i] + rng.uniform(-0.3, 0.3), 0.0, 1.0);
    }
    const SliceView av{a, 32, 32}, bv{b, 32, 32};
    worst = std::max(worst, std::abs(ssim(av, bv) - reference::ssim_bruteforce(av, bv)));
  }
  out.push_back(make_row("ssim", "separable SSIM vs brute force (50 pairs)", worst, 1e-8));
  Rng rng(9);
  std::vector<double> x(1024);
  for (double& v : x) v = rng.uniform();
  const SliceView xv{x, 32, 32};
  out.push_back(make_row("ssim", "ssim(x, x) == 1", ssim(xv, xv), 1.0, false));
  out.push_back(make_row("ssim", "psnr(mse 0.01, range 1) == 20 dB", psnr_from_mse(0.01, 1.0), 20.0, false));
  return out;
}

std::vector<CheckResult> tensor_checks() {
  std::vector<CheckResult> out;
  PhantomConfig cfg;
  cfg.dims = {8, 48, 48};
  cfg.n_directions = 12;
  cfg.b_values = {500};
  cfg.seed = 11;
  const auto [c, truth] = make_phantom_case(cfg);
  const TensorField fit = fit_tensor(c);
  double worst = 0.0;
  bool covered = true;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth.mask[i] && !fit.mask[i]) covered = false;
    if (!fit.mask[i]) continue;
    const auto a = fit.tensor(i), b = truth.tensor(i);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < 9; ++k) {
      num += (a[k] - b[k]) * (a[k] - b[k]);
      den += b[k] * b[k];
    }
    worst = std::max(worst, std::sqrt(num / den));
  }
  auto rt = make_row("tensor", "noiseless round trip (relative Frobenius)", worst, 1e-9);
  rt.passed = rt.passed && covered;
  if (!covered) rt.detail = "fit mask misses myocardial voxels";
  out.push_back(rt);

  std::array<double, 9> iso{};
  iso[0] = iso[4] = iso[8] = 1.7e-3;
  out.push_back(make_row("tensor", "FA of an isotropic tensor == 0", fa(single(iso)).data()[0], 0.0, false));

  Rng rng(4);
  double md_err = 0.0;
  for (int s = 0; s < 20; ++s) {
    std::array<double, 9> d{};
    d[0] = rng.uniform(1e-4, 3e-3);
    d[4] = rng.uniform(1e-4, 3e-3);
    d[8] = rng.uniform(1e-4, 3e-3);
    md_err = std::max(md_err, std::abs(md(single(d)).data()[0] - md(single(rotate(d, rng))).data()[0]));
  }
  out.push_back(make_row("tensor", "MD rotation invariance (20 rotations)", md_err, 1e-12));

  const PhantomGeometry& g = *c.geometry;
  const Volume h = ha(fit, g);
  double ha_err = 0.0;
  for (std::size_t z = 0; z < cfg.dims.z; ++z)
    for (std::size_t y = 0; y < cfg.dims.y; ++y)
      for (std::size_t x = 0; x < cfg.dims.x; ++x) {
        const std::size_t i = h.index(z, y, x);
        if (!truth.mask[i]) continue;
        const double r = std::hypot(static_cast<double>(x) - g.center_x, static_cast<double>(y) - g.center_y);
        const double depth = (r - g.inner_radius[z]) / (g.outer_radius[z] - g.inner_radius[z]);
        const double want = cfg.ha_endo_deg + (cfg.ha_epi_deg - cfg.ha_endo_deg) * depth;
        ha_err = std::max(ha_err, ha_circular_error(h.data()[i], want));
      }
  out.push_back(make_row("tensor", "HA ramp +60 to -60 deg (max error, deg)", ha_err, 1.0));
  return out;
}

std::vector<CheckResult> all_checks() {
  std::vector<CheckResult> out;
  for (auto part : {gradient_checks, parseval_checks, degradation_checks, ssim_checks, tensor_checks}) {
    auto rows = part();
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

std::string format_matrix(const std::vector<CheckResult>& results) {
  std::string out;
  char buf[512];
  for (const auto& r : results) {
    std::snprintf(buf, sizeof buf, "%-4s  %-12s %-46s %-12.3g %s %-10.3g %s\n", r.passed ? "PASS" : "FAIL",
                  r.group.c_str(), r.name.c_str(), r.value, r.limit == r.value && r.passed ? "==" : "vs", r.limit,
                  r.detail.c_str());
    out += buf;
  }
  return out;
}

}  // namespace refsr::cli
