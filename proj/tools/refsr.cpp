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

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "refsr/cli/checks.hpp"
#include "refsr/cli/experiment.hpp"
#include "refsr/core/error.hpp"
#include "refsr/core/normalize.hpp"
#include "refsr/core/rvol.hpp"
#include "refsr/substrate/tensor.hpp"

namespace fs = std::filesystem;
using namespace refsr;

namespace {

enum Exit { kOk = 0, kError = 1, kConfig = 2, kOrdering = 3, kDiverged = 4 };

struct Options {
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::string output;
  bool force = false;
  bool dry_run = false;
  std::optional<std::size_t> cases;
  std::string mode = "proposed";
  std::string checkpoint;
  std::string input;
  double perturb = 0.0;
};

void note(const std::string& s) { std::cerr << s << std::endl; }

cli::ExperimentManifest manifest_from(const Options& o) {
  cli::ExperimentManifest m = cli::load_manifest(o.manifest);
  if (o.seed) {
    m.phantom.seed = *o.seed;
    m.train.seed = *o.seed;
  }
  if (o.cases) m.cases = *o.cases;
  if (!o.output.empty()) m.output_dir = o.output;
  return m;
}

// Refuses to write into a non-empty directory unless forced.
fs::path prepare_output(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw IoError(dir.string() + " exists and is not a directory");
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!force) throw IoError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
  return dir;
}

std::string stem_of(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "dwi_%03zu", i);
  return buf;
}

// LR directories hold the HR b0 next to LR DWIs; read_case_dir would reject
// the mixed dims.
void write_lr_dir(const LowResCase& c, const fs::path& dir) {
  fs::create_directories(dir);
  write_dwi(c.b0_hr, c.case_id, dir, "b0");
  for (std::size_t i = 0; i < c.dwis.size(); ++i) write_dwi(c.dwis[i], c.case_id, dir, stem_of(i));
}

LowResCase read_lr_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a case directory: " + dir.string());
  LowResCase c;
  c.b0_hr = read_dwi(dir, "b0", &c.case_id);
  for (std::size_t i = 0; fs::exists(dir / (stem_of(i) + ".rvol")); ++i) c.dwis.push_back(read_dwi(dir, stem_of(i)));
  if (c.dwis.empty()) throw DataError(dir.string() + " holds no DWIs");
  return c;
}

std::vector<DwiCase> read_case_dirs(const fs::path& root) {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "b0.rvol")) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw DataError("no case directories under " + root.string());
  std::vector<DwiCase> out;
  for (const auto& d : dirs) out.push_back(cli::read_case_dir(d));
  return out;
}

int cmd_phantom(const Options& o) {
  const auto m = manifest_from(o);
  m.phantom.validate();
  if (m.cases == 0) throw ConfigError("--cases must be positive");
  if (o.dry_run) return kOk;
  const fs::path out = prepare_output(m.output_dir, o.force);
  for (std::size_t i = 0; i < m.cases; ++i) {
    const auto [c, truth] = cli::simulate_case(m, i);
    cli::write_case_dir(c, out / c.case_id);
    cli::write_tensor_field(truth, out / c.case_id, "truth_");
    note("wrote " + (out / c.case_id).string());
  }
  write_text_file(out / "manifest.json", cli::dump_manifest(m));
  return kOk;
}

int cmd_degrade(const Options& o) {
  const auto m = manifest_from(o);
  m.degrade.validate();
  if (o.input.empty()) throw ConfigError("degrade needs --input <case dir>");
  if (o.dry_run) return kOk;
  const DwiCase raw = cli::read_case_dir(o.input);
  const fs::path out = prepare_output(m.output_dir, o.force);
  const DegradedCase d = degrade_case(normalize_case(raw, m.normalize_percentile), m.degrade);
  cli::write_case_dir(d.hr, out / "hr");
  write_lr_dir(d.lr, out / "lr");
  DwiCase bil = d.hr;
  bil.dwis = d.lr_on_hr_grid;
  cli::write_case_dir(bil, out / "bilinear");
  write_text_file(out / "degrade.json", nlohmann::json(m.degrade).dump(2) + "\n");
  return kOk;
}

int cmd_train(const Options& o) {
  auto m = manifest_from(o);
  m.train = m.train.with_mode(train::parse_mode(o.mode));
  m.validate();
  if (o.dry_run) return kOk;
  const fs::path out = prepare_output(m.output_dir, o.force);

  std::vector<DegradedCase> cases;
  if (o.input.empty()) {
    for (auto& c : cli::build_cohort(m)) cases.push_back(std::move(c.data));
  } else {
    for (const auto& raw : read_case_dirs(o.input)) {
      cases.push_back(degrade_case(normalize_case(raw, m.normalize_percentile), m.degrade));
    }
  }
  std::vector<std::string> ids;
  for (const auto& c : cases) ids.push_back(c.hr.case_id);
  const auto split = train::split_cases(ids, m.train.split_ratio, m.train.seed);
  auto in = [](const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
  };
  train::Dataset data;
  for (const auto& c : cases) {
    if (in(split.train, c.hr.case_id)) data.train.append(train::make_training_pairs(c, m.train.mode, m.train.train_b_values));
    if (in(split.val, c.hr.case_id)) data.val.append(train::make_training_pairs(c, m.train.mode, m.train.train_b_values));
  }
  data.held_out_ids = split.test;
  write_text_file(out / "split.json",
                  nlohmann::ordered_json{{"train", split.train}, {"val", split.val}, {"test", split.test}}.dump(2) +
                      "\n");
  note("training " + std::string(train::mode_name(m.train.mode)) + " on " + std::to_string(data.train.pairs.size()) +
       " pairs");
  const auto result = train::train(m.train, data, [](const train::EpochLog& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d: pixel %.5f val PSNR %.3f SSIM %.4f", e.epoch, e.pixel, e.val_psnr,
                  e.val_ssim);
    note(buf);
  });
  write_text_file(out / "train_log.csv", train::epoch_log_csv(result.log));
  train::save_checkpoint(result.best, (out / "model.ckpt").string());
  return kOk;
}

int cmd_infer(const Options& o) {
  if (o.checkpoint.empty() || o.input.empty()) throw ConfigError("infer needs --checkpoint and --input");
  if (o.output.empty()) throw ConfigError("infer needs --output");
  const auto ckpt = train::load_checkpoint(o.checkpoint);
  const LowResCase lr = read_lr_dir(o.input);
  if (o.dry_run) return kOk;
  const fs::path out = prepare_output(o.output, o.force);
  cli::write_case_dir(train::infer_volume(ckpt, lr, ckpt.config.mode), out);
  return kOk;
}

int cmd_ablation(const Options& o) {
  const auto m = manifest_from(o);
  m.validate();
  if (o.dry_run) {
    note("manifest is valid");
    return kOk;
  }
  const fs::path out = prepare_output(m.output_dir, o.force);
  const auto res = cli::run_ablation(m, out, note);
  const auto& r = res.report;
  for (auto method : {Method::kBilinear, Method::kConventional, Method::kProposed}) {
    const auto& s = r.at(res.table1_b, method);
    char buf[160];
    std::snprintf(buf, sizeof buf, "b=%g %-12s PSNR %.3f (%.3f)  SSIM %.4f (%.4f)", res.table1_b, method_name(method),
                  s.psnr_mean, s.psnr_std, s.ssim_mean, s.ssim_std);
    std::cout << buf << "\n";
  }
  for (double b : res.unseen_b) {
    for (auto method : {Method::kBilinear, Method::kProposed}) {
      const auto& s = r.at(b, method);
      char buf[160];
      std::snprintf(buf, sizeof buf, "b=%g %-12s PSNR %.3f (%.3f)  SSIM %.4f (%.4f)", b, method_name(method),
                    s.psnr_mean, s.psnr_std, s.ssim_mean, s.ssim_std);
      std::cout << buf << "\n";
    }
  }
  std::cout << (res.ordering_holds ? "ordering holds: proposed > conventional > bilinear\n"
                                   : "ordering FAILED: proposed > conventional > bilinear does not hold\n");
  return res.ordering_holds ? kOk : kOrdering;
}

int cmd_check(const Options& o) {
  if (o.perturb != 0.0) ad::testing::set_conv_backward_perturbation(o.perturb);
  const auto rows = cli::all_checks();
  std::cout << cli::format_matrix(rows);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += !r.passed;
  std::cout << rows.size() - failed << "/" << rows.size() << " checks passed\n";
  return failed ? kError : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reference-guided volumetric super-resolution toolkit"};
  app.require_subcommand(1);
  Options o;

  auto common = [&](CLI::App* sub, bool outputs) {
    sub->add_option("--manifest", o.manifest, "experiment manifest (JSON)");
    sub->add_option("--seed", o.seed, "overrides phantom and training seeds");
    if (outputs) {
      sub->add_option("--output", o.output, "output directory");
      sub->add_flag("--force", o.force, "overwrite a non-empty output directory");
    }
    sub->add_flag("--dry-run", o.dry_run, "validate inputs without computing");
  };

  auto* phantom = app.add_subcommand("phantom", "simulate the phantom cohort as RVOL case directories");
  common(phantom, true);
  phantom->add_option("--cases", o.cases, "number of cases");

  auto* degrade = app.add_subcommand("degrade", "normalize and degrade one case directory");
  common(degrade, true);
  degrade->add_option("--input", o.input, "case directory")->required();

  auto* trn = app.add_subcommand("train", "train one model");
  common(trn, true);
  trn->add_option("--cases", o.cases, "number of simulated cases");
  trn->add_option("--mode", o.mode, "proposed or conventional");
  trn->add_option("--input", o.input, "directory of case directories (default: simulate)");

  auto* infer = app.add_subcommand("infer", "super-resolve an LR case directory");
  common(infer, true);
  infer->add_option("--checkpoint", o.checkpoint, "model checkpoint")->required();
  infer->add_option("--input", o.input, "LR case directory (as written by degrade)")->required();

  auto* ablation = app.add_subcommand("run-ablation", "full protocol: both models, baseline, tables, montages");
  common(ablation, true);
  ablation->add_option("--cases", o.cases, "number of simulated cases");

  auto* check = app.add_subcommand("check", "self-test matrix");
  check->add_option("--perturb-conv-backward", o.perturb)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (*phantom) return cmd_phantom(o);
    if (*degrade) return cmd_degrade(o);
    if (*trn) return cmd_train(o);
    if (*infer) return cmd_infer(o);
    if (*ablation) return cmd_ablation(o);
    if (*check) return cmd_check(o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const DivergenceError& e) {
    std::cerr << "training diverged: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
