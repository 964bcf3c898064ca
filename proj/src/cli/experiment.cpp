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

#include "refsr/cli/experiment.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "refsr/core/error.hpp"
#include "refsr/core/normalize.hpp"
#include "refsr/core/parallel.hpp"
#include "refsr/core/rvol.hpp"

namespace refsr::cli {

namespace fs = std::filesystem;
using train::Mode;

std::pair<DwiCase, TensorField> simulate_case(const ExperimentManifest& m, std::size_t index) {
  return make_noisy_case(cohort_member(m.phantom, index));
}

std::vector<CohortCase> build_cohort(const ExperimentManifest& m) {
  std::vector<CohortCase> out(m.cases);
  parallel_for(m.cases, [&](std::size_t i) {
    auto [raw, truth] = make_noisy_case(cohort_member(m.phantom, i));
    CohortCase& c = out[i];
    c.geometry = *raw.geometry;
    c.myocardium = truth.mask;
    c.data = degrade_case(normalize_case(raw, m.normalize_percentile), m.degrade);
  });
  return out;
}

void write_case_dir(const DwiCase& c, const fs::path& dir) {
  fs::create_directories(dir);
  write_dwi(c.b0, c.case_id, dir, "b0");
  for (std::size_t i = 0; i < c.dwis.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "dwi_%03zu", i);
    write_dwi(c.dwis[i], c.case_id, dir, stem);
  }
  if (c.geometry) {
    const nlohmann::ordered_json g = {{"center_x", c.geometry->center_x},
                                      {"center_y", c.geometry->center_y},
                                      {"inner_radius", c.geometry->inner_radius},
                                      {"outer_radius", c.geometry->outer_radius}};
    write_text_file(dir / "geometry.json", g.dump(2) + "\n");
  }
}

void write_tensor_field(const TensorField& t, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  for (std::size_t k = 0; k < 6; ++k) write_volume(t.components[k], dir / (prefix + TensorField::kNames[k] + ".rvol"));
  Volume mask(t.dims(), t.components[0].spacing());
  for (std::size_t i = 0; i < t.size(); ++i) mask.data()[i] = t.mask[i];
  write_volume(mask, dir / (prefix + "mask.rvol"));
}

void write_maps(const DtMaps& maps, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  write_volume(maps.md, dir / (prefix + "md.rvol"));
  write_volume(maps.fa, dir / (prefix + "fa.rvol"));
  write_volume(maps.ha, dir / (prefix + "ha.rvol"));
}

DwiCase read_case_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a case directory: " + dir.string());
  DwiCase c;
  c.b0 = read_dwi(dir, "b0", &c.case_id);
  std::vector<std::string> stems;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("dwi_", 0) == 0 && e.path().extension() == ".rvol") stems.push_back(e.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  for (const auto& s : stems) c.dwis.push_back(read_dwi(dir, s));
  if (fs::exists(dir / "geometry.json")) {
    try {
      const auto j = nlohmann::json::parse(read_text_file(dir / "geometry.json"));
      PhantomGeometry g;
      g.center_x = j.at("center_x").get<double>();
      g.center_y = j.at("center_y").get<double>();
      g.inner_radius = j.at("inner_radius").get<std::vector<double>>();
      g.outer_radius = j.at("outer_radius").get<std::vector<double>>();
      c.geometry = g;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError((dir / "geometry.json").string() + ": " + e.what(), 0);
    }
  }
  c.validate();
  return c;
}

void write_png_gray(const fs::path& path, std::span<const double> values, std::size_t height, std::size_t width,
                    double lo, double hi) {
  if (values.size() != height * width) throw ShapeError("PNG buffer does not match its size");
  std::vector<png_byte> pixels(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = std::clamp((values[i] - lo) / (hi - lo), 0.0, 1.0);
    pixels[i] = static_cast<png_byte>(std::lround(t * 255.0));
  }
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.string().c_str(), "wb"), &std::fclose);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("libpng failed writing " + path.string());
  }
  png_init_io(png, f.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t y = 0; y < height; ++y) png_write_row(png, pixels.data() + y * width);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void write_montage(const fs::path& path, const std::vector<std::span<const double>>& panels, std::size_t height,
                   std::size_t width) {
  constexpr std::size_t gap = 2;
  const std::size_t n = panels.size();
  const std::size_t total_w = n * width + (n - 1) * gap;
  std::vector<double> canvas(height * total_w, 1.0);
  for (std::size_t p = 0; p < n; ++p) {
    if (panels[p].size() != height * width) throw ShapeError("montage panel has the wrong size");
    for (std::size_t y = 0; y < height; ++y) {
      std::copy_n(panels[p].begin() + static_cast<std::ptrdiff_t>(y * width), width,
                  canvas.begin() + static_cast<std::ptrdiff_t>(y * total_w + p * (width + gap)));
    }
  }
  write_png_gray(path, canvas, height, total_w);
}

namespace {

bool in(const std::vector<double>& bs, double b) { return std::find(bs.begin(), bs.end(), b) != bs.end(); }

LowResCase lr_subset(const LowResCase& c, const std::vector<double>& bs) {
  LowResCase out;
  out.case_id = c.case_id;
  out.b0_hr = c.b0_hr;
  for (const auto& d : c.dwis) {
    if (in(bs, d.b_value)) out.dwis.push_back(d);
  }
  return out;
}

DwiCase hr_subset(const DwiCase& c, const std::vector<double>& bs) {
  DwiCase out = c;
  out.dwis.clear();
  for (const auto& d : c.dwis) {
    if (in(bs, d.b_value)) out.dwis.push_back(d);
  }
  return out;
}

std::vector<DwiImage> images_subset(const DwiCase& c, const std::vector<DwiImage>& imgs, const std::vector<double>& bs) {
  std::vector<DwiImage> out;
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    if (in(bs, c.dwis[i].b_value)) out.push_back(imgs[i]);
  }
  return out;
}

void merge(MetricsReport& into, MetricsReport&& from) {
  for (auto& r : from.rows) into.rows.push_back(std::move(r));
  for (const auto& [k, v] : from.aggregates) into.aggregates[k] = v;
}

DtMaps maps_for(const DwiCase& c, const std::vector<DwiImage>& dwis, const CohortCase& cc) {
  DwiCase fit_case;
  fit_case.case_id = c.case_id;
  fit_case.b0 = c.b0;
  fit_case.dwis = dwis;
  return compute_maps(fit_tensor(fit_case, cc.myocardium), cc.geometry);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string maps_csv(const std::vector<MapRow>& rows) {
  std::string out = "method,voxels,md_mae,md_p95,fa_mae,fa_p95,ha_mae_deg,ha_p95_deg\n";
  for (const auto& r : rows) {
    const auto& e = r.error;
    out += r.method + "," + std::to_string(e.voxels) + "," + fmt(e.md.mae) + "," + fmt(e.md.p95) + "," +
           fmt(e.fa.mae) + "," + fmt(e.fa.p95) + "," + fmt(e.ha.mae) + "," + fmt(e.ha.p95) + "\n";
  }
  return out;
}

std::string maps_json(const std::vector<MapRow>& rows) {
  nlohmann::ordered_json j;
  for (const auto& r : rows) {
    const auto& e = r.error;
    j[r.method] = {{"voxels", e.voxels},
                   {"md", {{"mae", e.md.mae}, {"p95", e.md.p95}}},
                   {"fa", {{"mae", e.fa.mae}, {"p95", e.fa.p95}}},
                   {"ha_deg", {{"mae", e.ha.mae}, {"p95", e.ha.p95}}}};
  }
  return j.dump(2) + "\n";
}

// Pools per-case comparisons by voxel count. The 95th percentiles are
// combined the same way, which is an approximation.
MapComparison pool(const std::vector<MapComparison>& parts) {
  MapComparison out;
  for (const auto& p : parts) out.voxels += p.voxels;
  if (out.voxels == 0) return out;
  for (const auto& p : parts) {
    const double w = static_cast<double>(p.voxels) / static_cast<double>(out.voxels);
    out.md.mae += w * p.md.mae;
    out.md.p95 += w * p.md.p95;
    out.fa.mae += w * p.fa.mae;
    out.fa.p95 += w * p.fa.p95;
    out.ha.mae += w * p.ha.mae;
    out.ha.p95 += w * p.ha.p95;
  }
  return out;
}

std::string fmt_b(double b) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", b);
  return buf;
}

}  // namespace

std::vector<std::string> ablation_csv_files() {
  return {"table1.csv", "table2.csv", "metrics_rows.csv", "dt_maps.csv", "train_proposed.csv", "train_conventional.csv"};
}

AblationResult run_ablation(const ExperimentManifest& m, const fs::path& out_dir, const LogFn& log) {
  m.validate();
  auto say = [&](const std::string& s) {
    if (log) log(s);
  };
  fs::create_directories(out_dir / "montages");
  write_text_file(out_dir / "manifest.json", dump_manifest(m));

  say("simulating " + std::to_string(m.cases) + " cases");
  const std::vector<CohortCase> cohort = build_cohort(m);
  std::vector<std::string> ids;
  for (const auto& c : cohort) ids.push_back(c.data.hr.case_id);

  AblationResult res;
  res.split = train::split_cases(ids, m.train.split_ratio, m.train.seed);
  write_text_file(out_dir / "split.json",
                  nlohmann::ordered_json{{"train", res.split.train}, {"val", res.split.val}, {"test", res.split.test}}
                          .dump(2) +
                      "\n");
  auto find = [&](const std::string& id) -> const CohortCase& {
    return *std::find_if(cohort.begin(), cohort.end(), [&](const CohortCase& c) { return c.data.hr.case_id == id; });
  };

  std::vector<double> unseen;
  for (double b : m.train.eval_b_values) {
    if (!in(m.train.train_b_values, b)) unseen.push_back(b);
  }
  res.table1_b = m.train.train_b_values.front();
  res.unseen_b = unseen;

  std::vector<train::ModelCheckpoint> models;
  for (Mode mode : {Mode::kProposed, Mode::kConventional}) {
    const train::TrainConfig cfg = m.train.with_mode(mode);
    train::Dataset data;
    for (const auto& id : res.split.train) data.train.append(train::make_training_pairs(find(id).data, mode, cfg.train_b_values));
    for (const auto& id : res.split.val) data.val.append(train::make_training_pairs(find(id).data, mode, cfg.train_b_values));
    data.held_out_ids = res.split.test;
    say(std::string("training ") + train::mode_name(mode) + " on " + std::to_string(data.train.pairs.size()) +
        " pairs");
    const auto result = train::train(cfg, data, [&](const train::EpochLog& e) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "  %s epoch %d: pixel %.5f val PSNR %.3f SSIM %.4f", train::mode_name(mode),
                    e.epoch, e.pixel, e.val_psnr, e.val_ssim);
      say(buf);
    });
    const std::string name = train::mode_name(mode);
    write_text_file(out_dir / ("train_" + name + ".csv"), train::epoch_log_csv(result.log));
    train::save_checkpoint(result.best, (out_dir / (name + ".ckpt")).string());
    (mode == Mode::kProposed ? res.proposed_log : res.conventional_log) = result.log;
    models.push_back(result.best);
  }

  say("evaluating " + std::to_string(res.split.test.size()) + " test cases");
  const auto gen_p = models[0].build();
  const auto gen_c = models[1].build();
  const std::vector<double> table1_bs{res.table1_b};
  std::vector<DwiCase> ref_all, ref_t1;
  std::vector<Prediction> pred_all, pred_t1;
  std::vector<MapComparison> map_bilinear, map_proposed, map_conventional;
  for (const auto& id : res.split.test) {
    const CohortCase& cc = find(id);
    const DegradedCase& d = cc.data;
    const DwiCase sr_p = train::infer_volume(gen_p, lr_subset(d.lr, m.train.eval_b_values), Mode::kProposed);
    const DwiCase sr_c = train::infer_volume(gen_c, lr_subset(d.lr, table1_bs), Mode::kConventional);
    const DwiCase hr_eval = hr_subset(d.hr, m.train.eval_b_values);
    const DwiCase hr_t1 = hr_subset(d.hr, table1_bs);
    const auto bil_eval = images_subset(d.hr, d.lr_on_hr_grid, m.train.eval_b_values);
    ref_all.push_back(hr_eval);
    ref_t1.push_back(hr_t1);
    pred_all.push_back({Method::kBilinear, id, bil_eval});
    pred_all.push_back({Method::kProposed, id, sr_p.dwis});
    pred_t1.push_back({Method::kConventional, id, sr_c.dwis});

    // Tensor maps from the training b-value shell; reference maps come from the HR DWIs.
    const DtMaps ref_maps = maps_for(d.hr, hr_t1.dwis, cc);
    const auto p_t1 = images_subset(hr_eval, sr_p.dwis, table1_bs);
    const auto b_t1 = images_subset(d.hr, d.lr_on_hr_grid, table1_bs);
    const DtMaps mb = maps_for(d.hr, b_t1, cc), mp = maps_for(d.hr, p_t1, cc), mc = maps_for(d.hr, sr_c.dwis, cc);
    // every method is scored on the same voxels
    std::vector<std::uint8_t> common(ref_maps.mask.size());
    for (std::size_t i = 0; i < common.size(); ++i) {
      common[i] = ref_maps.mask[i] && mb.mask[i] && mp.mask[i] && mc.mask[i];
    }
    write_maps(ref_maps, out_dir / "maps", id + "_hr_");
    write_maps(mb, out_dir / "maps", id + "_bilinear_");
    write_maps(mp, out_dir / "maps", id + "_proposed_");
    write_maps(mc, out_dir / "maps", id + "_conventional_");
    map_bilinear.push_back(compare_maps(mb, ref_maps, common));
    map_proposed.push_back(compare_maps(mp, ref_maps, common));
    map_conventional.push_back(compare_maps(mc, ref_maps, common));

    const std::size_t z = d.hr.dims().z / 2;
    const std::size_t hgt = d.hr.dims().y, wid = d.hr.dims().x;
    // first DWI of each evaluated shell
    for (double b : m.train.eval_b_values) {
      std::size_t k = 0;
      while (k < hr_eval.dwis.size() && hr_eval.dwis[k].b_value != b) ++k;
      if (k == hr_eval.dwis.size()) continue;
      std::vector<std::span<const double>> panels{bil_eval[k].volume.slice(z), hr_eval.dwis[k].volume.slice(z),
                                                  sr_p.dwis[k].volume.slice(z)};
      if (b == res.table1_b) {
        std::size_t kc = 0;
        while (hr_t1.dwis[kc].direction != hr_eval.dwis[k].direction) ++kc;
        panels.push_back(sr_c.dwis[kc].volume.slice(z));
      }
      write_montage(out_dir / "montages" / (id + "_b" + fmt_b(b) + "_z" + std::to_string(z) + ".png"), panels, hgt,
                    wid);
    }
  }
  EvalOptions opt;
  opt.b_values = m.train.eval_b_values;
  res.report = evaluate(pred_all, ref_all, opt);
  opt.b_values = table1_bs;
  merge(res.report, evaluate(pred_t1, ref_t1, opt));

  res.maps = {{"bilinear", pool(map_bilinear)}, {"proposed", pool(map_proposed)},
              {"conventional", pool(map_conventional)}};

  const Method t1[] = {Method::kBilinear, Method::kProposed, Method::kConventional};
  const Method t2[] = {Method::kBilinear, Method::kProposed};
  write_text_file(out_dir / "table1.csv", res.report.table_csv(res.table1_b, t1));
  std::string table2 = "b_value,";
  {
    // one block per unseen b-value, each prefixed by its b
    std::string body;
    bool header = false;
    for (double b : unseen) {
      const std::string t = res.report.table_csv(b, t2);
      const auto nl = t.find('\n');
      if (!header) {
        table2 += t.substr(0, nl + 1);
        header = true;
      }
      std::size_t pos = nl + 1;
      while (pos < t.size()) {
        const auto e = t.find('\n', pos);
        body += fmt_b(b) + "," + t.substr(pos, e - pos + 1);
        pos = e + 1;
      }
    }
    if (!header) table2 += "metric\n";
    table2 += body;
  }
  write_text_file(out_dir / "table2.csv", table2);
  write_text_file(out_dir / "metrics_rows.csv", res.report.rows_csv());
  write_text_file(out_dir / "summary.json", res.report.summary_json());
  write_text_file(out_dir / "dt_maps.csv", maps_csv(res.maps));
  write_text_file(out_dir / "dt_maps.json", maps_json(res.maps));

  const auto& bil = res.report.at(res.table1_b, Method::kBilinear);
  const auto& pro = res.report.at(res.table1_b, Method::kProposed);
  const auto& con = res.report.at(res.table1_b, Method::kConventional);
  res.ordering_holds = pro.psnr_mean > con.psnr_mean && con.psnr_mean > bil.psnr_mean &&
                       pro.ssim_mean > con.ssim_mean && con.ssim_mean > bil.ssim_mean;
  return res;
}

}  // namespace refsr::cli
