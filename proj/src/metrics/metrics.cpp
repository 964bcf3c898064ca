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

#include "refsr/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>

#include "json.hpp"
#include "refsr/core/error.hpp"
#include "refsr/core/parallel.hpp"
#include "refsr/simd/kernels.hpp"

namespace refsr {
namespace {

void require_same_shape(const SliceView& a, const SliceView& b) {
  if (a.height != b.height || a.width != b.width || a.data.size() != a.height * a.width ||
      b.data.size() != b.height * b.width) {
    throw ShapeError("slice shapes differ: " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                     std::to_string(b.height) + "x" + std::to_string(b.width));
  }
}

std::vector<double> gaussian_window(const SsimParams& p) {
  std::vector<double> w(p.window);
  const double c = 0.5 * static_cast<double>(p.window - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.window; ++i) {
    const double d = static_cast<double>(i) - c;
    w[i] = std::exp(-d * d / (2.0 * p.sigma * p.sigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

void check_ssim_inputs(const SliceView& a, const SliceView& b, const SsimParams& p) {
  require_same_shape(a, b);
  if (p.window == 0 || a.height < p.window || a.width < p.window) {
    throw ShapeError("SSIM needs slices of at least " + std::to_string(p.window) + "x" + std::to_string(p.window));
  }
}

double ssim_from_moments(double mx, double my, double sxx, double syy, double sxy, double c1, double c2) {
  const double vx = sxx - mx * mx;
  const double vy = syy - my * my;
  const double cov = sxy - mx * my;
  return ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
}

}  // namespace

double psnr_from_mse(double mse, double data_range) {
  if (!(data_range > 0.0)) throw ConfigError("PSNR data range must be positive");
  if (mse == 0.0) return kPsnrInfinite;
  return 10.0 * std::log10(data_range * data_range / mse);
}

double psnr(const SliceView& pred, const SliceView& gt, double data_range) {
  require_same_shape(pred, gt);
  const double sse = simd::sum_squared_diff(simd::active_isa(), pred.data.size(), pred.data.data(), gt.data.data());
  return psnr_from_mse(sse / static_cast<double>(pred.data.size()), data_range);
}

std::vector<double> ssim_map(const SliceView& pred, const SliceView& gt, const SsimParams& p) {
  check_ssim_inputs(pred, gt, p);
  const auto w = gaussian_window(p);
  const std::size_t h = pred.height, wd = pred.width, k = p.window;
  const std::size_t oh = h - k + 1, ow = wd - k + 1;
  // Five moment images, filtered along x then y over the valid region.
  std::vector<double> rows(5 * h * ow);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double m[5] = {0, 0, 0, 0, 0};
      for (std::size_t t = 0; t < k; ++t) {
        const double a = pred.data[y * wd + x + t];
        const double b = gt.data[y * wd + x + t];
        m[0] += w[t] * a;
        m[1] += w[t] * b;
        m[2] += w[t] * (a * a);
        m[3] += w[t] * (b * b);
        m[4] += w[t] * (a * b);
      }
      for (int c = 0; c < 5; ++c) rows[(static_cast<std::size_t>(c) * h + y) * ow + x] = m[c];
    }
  }
  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
  std::vector<double> out(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    for (std::size_t x = 0; x < ow; ++x) {
      double m[5] = {0, 0, 0, 0, 0};
      for (std::size_t t = 0; t < k; ++t) {
        for (int c = 0; c < 5; ++c) m[c] += w[t] * rows[(static_cast<std::size_t>(c) * h + y + t) * ow + x];
      }
      out[y * ow + x] = ssim_from_moments(m[0], m[1], m[2], m[3], m[4], c1, c2);
    }
  }
  return out;
}

double ssim(const SliceView& pred, const SliceView& gt, const SsimParams& p) {
  const auto map = ssim_map(pred, gt, p);
  double sum = 0.0;
  for (double v : map) sum += v;
  return sum / static_cast<double>(map.size());
}

double reference::ssim_bruteforce(const SliceView& pred, const SliceView& gt, const SsimParams& p) {
  check_ssim_inputs(pred, gt, p);
  const auto g = gaussian_window(p);
  const std::size_t k = p.window;
  const double c1 = (p.k1 * p.data_range) * (p.k1 * p.data_range);
  const double c2 = (p.k2 * p.data_range) * (p.k2 * p.data_range);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t y0 = 0; y0 + k <= pred.height; ++y0) {
    for (std::size_t x0 = 0; x0 + k <= pred.width; ++x0) {
      double mx = 0, my = 0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const double wt = g[i] * g[j];
          mx += wt * pred.data[(y0 + i) * pred.width + x0 + j];
          my += wt * gt.data[(y0 + i) * gt.width + x0 + j];
        }
      }
      double vx = 0, vy = 0, cov = 0;
      for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
          const double wt = g[i] * g[j];
          const double a = pred.data[(y0 + i) * pred.width + x0 + j] - mx;
          const double b = gt.data[(y0 + i) * gt.width + x0 + j] - my;
          vx += wt * a * a;
          vy += wt * b * b;
          cov += wt * a * b;
        }
      }
      total += ((2 * mx * my + c1) * (2 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

const char* method_name(Method m) {
  switch (m) {
    case Method::kBilinear:
      return "bilinear";
    case Method::kProposed:
      return "proposed";
    case Method::kConventional:
      return "conventional";
  }
  return "unknown";
}

std::pair<double, double> mean_std(std::span<const double> values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    sum += v;
    ++n;
  }
  if (n == 0) return {0.0, 0.0};
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) {
    if (std::isfinite(v)) ss += (v - mean) * (v - mean);
  }
  return {mean, std::sqrt(ss / static_cast<double>(n))};
}

const Aggregate& MetricsReport::at(double b_value, Method m) const {
  const auto it = aggregates.find({b_value, m});
  if (it == aggregates.end()) {
    throw DataError(std::string("no metrics for ") + method_name(m) + " at b=" + std::to_string(b_value));
  }
  return it->second;
}

namespace {

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_b(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", b);
  return buf;
}

}  // namespace

std::string MetricsReport::rows_csv() const {
  std::string out = "case_id,image_index,b_value,slice_index,method,psnr_db,ssim\n";
  for (const auto& r : rows) {
    out += r.case_id + "," + std::to_string(r.image_index) + "," + fmt_b(r.b_value) + "," +
           std::to_string(r.slice_index) + "," + method_name(r.method) + "," + fmt(r.psnr_db) + "," + fmt(r.ssim) +
           "\n";
  }
  return out;
}

std::string MetricsReport::table_csv(double b_value, std::span<const Method> methods) const {
  std::string out = "metric";
  for (Method m : methods) out += std::string(",") + method_name(m) + "_mean," + method_name(m) + "_std";
  out += "\npsnr_db";
  for (Method m : methods) out += "," + fmt(at(b_value, m).psnr_mean) + "," + fmt(at(b_value, m).psnr_std);
  out += "\nssim";
  for (Method m : methods) out += "," + fmt(at(b_value, m).ssim_mean) + "," + fmt(at(b_value, m).ssim_std);
  out += "\n";
  return out;
}

std::string MetricsReport::summary_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [key, agg] : aggregates) {
    auto& entry = j["b" + fmt_b(key.first)][method_name(key.second)];
    entry["psnr_mean"] = agg.psnr_mean;
    entry["psnr_std"] = agg.psnr_std;
    entry["ssim_mean"] = agg.ssim_mean;
    entry["ssim_std"] = agg.ssim_std;
    entry["slices"] = agg.count;
    entry["excluded_infinite"] = agg.excluded_infinite;
  }
  return j.dump(2) + "\n";
}

MetricsReport evaluate(std::span<const Prediction> predictions, std::span<const DwiCase> reference,
                       const EvalOptions& options) {
  struct Job {
    const Prediction* pred;
    const DwiCase* ref;
    std::size_t image;
  };
  std::vector<Job> jobs;
  for (const auto& p : predictions) {
    const auto it = std::find_if(reference.begin(), reference.end(),
                                 [&](const DwiCase& c) { return c.case_id == p.case_id; });
    if (it == reference.end()) throw DataError("prediction for unknown case " + p.case_id);
    if (p.dwis.size() != it->dwis.size()) {
      throw DataError("case " + p.case_id + ": prediction has " + std::to_string(p.dwis.size()) +
                      " images, reference " + std::to_string(it->dwis.size()));
    }
    for (std::size_t k = 0; k < p.dwis.size(); ++k) {
      const double b = it->dwis[k].b_value;
      if (p.dwis[k].b_value != b) throw DataError("case " + p.case_id + ": b-value mismatch at image " + std::to_string(k));
      if (p.dwis[k].volume.dims() != it->dims()) throw ShapeError("case " + p.case_id + ": prediction grid differs");
      if (!options.b_values.empty() &&
          std::find(options.b_values.begin(), options.b_values.end(), b) == options.b_values.end()) {
        continue;
      }
      jobs.push_back({&p, &*it, k});
    }
  }
  if (options.myocardium_mask) {
    for (const auto& j : jobs) {
      if (!j.ref->geometry) throw DataError("myocardium-masked metrics need case geometry: " + j.ref->case_id);
    }
  }

  std::vector<std::vector<SliceMetrics>> per_job(jobs.size());
  SsimParams sp = options.ssim;
  sp.data_range = options.data_range;
  parallel_for(jobs.size(), [&](std::size_t ji) {
    const Job& job = jobs[ji];
    const Volume& pv = job.pred->dwis[job.image].volume;
    const Volume& gv = job.ref->dwis[job.image].volume;
    const Dims d = gv.dims();
    for (std::size_t z = 0; z < d.z; ++z) {
      const SliceView a{pv.slice(z), d.y, d.x};
      const SliceView b{gv.slice(z), d.y, d.x};
      SliceMetrics m;
      m.case_id = job.ref->case_id;
      m.slice_index = z;
      m.image_index = job.image;
      m.b_value = job.ref->dwis[job.image].b_value;
      m.method = job.pred->method;
      if (!options.myocardium_mask) {
        m.psnr_db = psnr(a, b, options.data_range);
        m.ssim = ssim(a, b, sp);
      } else {
        const PhantomGeometry& g = *job.ref->geometry;
        double sse = 0.0;
        std::size_t n = 0;
        for (std::size_t y = 0; y < d.y; ++y) {
          for (std::size_t x = 0; x < d.x; ++x) {
            if (!g.contains(z, static_cast<double>(x), static_cast<double>(y))) continue;
            const double e = a.data[y * d.x + x] - b.data[y * d.x + x];
            sse += e * e;
            ++n;
          }
        }
        m.psnr_db = n ? psnr_from_mse(sse / static_cast<double>(n), options.data_range) : kPsnrInfinite;
        const auto map = ssim_map(a, b, sp);
        const std::size_t half = sp.window / 2, ow = d.x - sp.window + 1;
        double sum = 0.0;
        std::size_t cnt = 0;
        for (std::size_t i = 0; i < map.size(); ++i) {
          const double cx = static_cast<double>(i % ow + half), cy = static_cast<double>(i / ow + half);
          if (!g.contains(z, cx, cy)) continue;
          sum += map[i];
          ++cnt;
        }
        m.ssim = cnt ? sum / static_cast<double>(cnt) : 1.0;
      }
      per_job[ji].push_back(m);
    }
  });

  MetricsReport report;
  for (auto& v : per_job) report.rows.insert(report.rows.end(), v.begin(), v.end());
  std::map<std::pair<double, Method>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : report.rows) {
    auto& g = groups[{r.b_value, r.method}];
    g.first.push_back(r.psnr_db);
    g.second.push_back(r.ssim);
  }
  for (const auto& [key, vals] : groups) {
    Aggregate a;
    std::tie(a.psnr_mean, a.psnr_std) = mean_std(vals.first);
    std::tie(a.ssim_mean, a.ssim_std) = mean_std(vals.second);
    a.count = vals.first.size();
    a.excluded_infinite = static_cast<std::size_t>(
        std::count_if(vals.first.begin(), vals.first.end(), [](double v) { return !std::isfinite(v); }));
    if (a.excluded_infinite > 0) {
      std::cerr << "warning: " << a.excluded_infinite << " slice(s) with zero error excluded from PSNR mean ("
                << method_name(key.second) << ", b=" << key.first << ")\n";
    }
    report.aggregates[key] = a;
  }
  return report;
}

}  // namespace refsr
