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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"
#include "refsr/cli/manifest.hpp"
#include "refsr/core/error.hpp"
#include "refsr/core/rvol.hpp"

namespace fs = std::filesystem;
using namespace refsr;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(REFSR_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("refsr_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int n = 0;
    return n;
  }
};

// Small enough that a two-epoch training takes seconds.
std::string tiny_manifest(const fs::path& dir) {
  const auto path = dir / "tiny.json";
  write_text_file(path, R"({
  "cases": 3,
  "phantom": {"dims": [8, 32, 32], "n_directions": 6, "b_values": [500.0, 1000.0], "noise_sigma": 0.03},
  "train": {"batch_size": 4, "epochs": 2, "max_batches_per_epoch": 2, "val_max_pairs": 8,
            "split_ratio": [1, 1, 1],
            "generator": {"base_width": 4, "channel_mults": [1, 2], "attention_at_depth": [1], "attention_heads": 2}}
}
)");
  return path.string();
}

// manifest.json records the output directory, so it is skipped.
bool same_tree(const fs::path& a, const fs::path& b) {
  std::size_t n = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || read_file_bytes(e.path()) != read_file_bytes(b / rel)) return false;
    ++n;
  }
  return n > 0;
}

}  // namespace

TEST_CASE("manifest: defaults round trip and unknown keys are rejected") {
  TempDir t;
  const cli::ExperimentManifest d;
  CHECK(d.phantom.noise_sigma == doctest::Approx(0.03));
  write_text_file(t.path / "m.json", cli::dump_manifest(d));
  CHECK(cli::dump_manifest(cli::load_manifest((t.path / "m.json").string())) == cli::dump_manifest(d));

  write_text_file(t.path / "partial.json", R"({"phantom": {"seed": 9}})");
  const auto p = cli::load_manifest((t.path / "partial.json").string());
  CHECK(p.phantom.seed == 9);
  CHECK(p.phantom.noise_sigma == doctest::Approx(0.03));

  write_text_file(t.path / "typo.json", R"({"train": {"epochz": 3}})");
  CHECK_THROWS_AS(cli::load_manifest((t.path / "typo.json").string()), ConfigError);
}

TEST_CASE("manifest: cross-module validation") {
  cli::ExperimentManifest m;
  CHECK_NOTHROW(m.validate());
  m.cases = 2;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = {};
  m.phantom.dims = {30, 64, 64};
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m = {};
  m.train.eval_b_values = {500.0, 2000.0};
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("cli: phantom writes N case directories, byte-identical on rerun") {
  TempDir t;
  const auto m = tiny_manifest(t.path);
  REQUIRE(run("phantom --manifest " + m + " --cases 3 --output " + (t.path / "a").string()) == 0);
  std::size_t dirs = 0;
  for (const auto& e : fs::directory_iterator(t.path / "a")) dirs += e.is_directory();
  CHECK(dirs == 3);
  for (const char* f : {"b0.rvol", "b0.json", "dwi_000.rvol", "geometry.json", "truth_Dxx.rvol", "truth_Dyz.rvol"}) {
    CHECK(fs::exists(t.path / "a" / "case_00" / f));
  }
  REQUIRE(run("phantom --manifest " + m + " --cases 3 --output " + (t.path / "b").string()) == 0);
  CHECK(same_tree(t.path / "a", t.path / "b"));

  // a different seed changes the data
  REQUIRE(run("phantom --manifest " + m + " --cases 3 --seed 7 --output " + (t.path / "c").string()) == 0);
  CHECK_FALSE(same_tree(t.path / "a", t.path / "c"));
}

TEST_CASE("cli: non-empty output needs --force") {
  TempDir t;
  const auto m = tiny_manifest(t.path);
  const std::string out = (t.path / "o").string();
  REQUIRE(run("phantom --manifest " + m + " --cases 3 --output " + out) == 0);
  CHECK(run("phantom --manifest " + m + " --cases 3 --output " + out) == 1);
  CHECK(run("phantom --manifest " + m + " --cases 3 --output " + out + " --force") == 0);
}

TEST_CASE("cli: dry run validates without writing") {
  TempDir t;
  const auto m = tiny_manifest(t.path);
  CHECK(run("run-ablation --dry-run --manifest " + m + " --output " + (t.path / "x").string()) == 0);
  CHECK_FALSE(fs::exists(t.path / "x"));
  write_text_file(t.path / "bad.json", R"({"cases": 2})");
  CHECK(run("run-ablation --dry-run --manifest " + (t.path / "bad.json").string()) == 2);
  CHECK(run("run-ablation --dry-run --bogus-flag") == 2);
}

TEST_CASE("cli: phantom, degrade, train, infer chain") {
  TempDir t;
  const auto m = tiny_manifest(t.path);
  const auto p = t.path;
  REQUIRE(run("phantom --manifest " + m + " --output " + (p / "cases").string()) == 0);
  REQUIRE(run("degrade --manifest " + m + " --input " + (p / "cases" / "case_00").string() + " --output " +
              (p / "deg").string()) == 0);
  CHECK(fs::exists(p / "deg" / "lr" / "dwi_000.rvol"));
  const auto lr = read_volume(p / "deg" / "lr" / "dwi_000.rvol");
  CHECK(lr.dims() == Dims{2, 8, 8});

  REQUIRE(run("train --manifest " + m + " --input " + (p / "cases").string() + " --output " + (p / "model").string()) ==
          0);
  CHECK(fs::exists(p / "model" / "train_log.csv"));
  REQUIRE(run("infer --checkpoint " + (p / "model" / "model.ckpt").string() + " --input " + (p / "deg" / "lr").string() +
              " --output " + (p / "sr").string()) == 0);
  const auto sr = read_volume(p / "sr" / "dwi_000.rvol");
  CHECK(sr.dims() == Dims{8, 32, 32});

  // conventional mode, simulating its cases
  REQUIRE(run("train --mode conventional --manifest " + m + " --output " + (p / "conv").string()) == 0);
  CHECK(run("train --mode sideways --manifest " + m + " --output " + (p / "bad").string()) == 2);
}

TEST_CASE("cli: check passes, and fails under a perturbed conv backward") {
  CHECK(run("check") == 0);
  CHECK(run("check --perturb-conv-backward 1e-3") == 1);
}
