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

#include "refsr/cli/manifest.hpp"

#include <algorithm>

#include "refsr/core/error.hpp"
#include "refsr/core/rvol.hpp"

namespace refsr {

void to_json(nlohmann::json& j, const PhantomConfig& c) {
  j = {{"dims", {c.dims.z, c.dims.y, c.dims.x}},
       {"spacing", {c.spacing.z, c.spacing.y, c.spacing.x}},
       {"ha_endo_deg", c.ha_endo_deg},
       {"ha_epi_deg", c.ha_epi_deg},
       {"eigenvalues_mm2_per_s", c.eigenvalues_mm2_per_s},
       {"s0_mean", c.s0_mean},
       {"noise_sigma", c.noise_sigma},
       {"n_directions", c.n_directions},
       {"b_values", c.b_values},
       {"b_ref", c.b_ref},
       {"seed", c.seed},
       {"outer_radius_fraction", c.outer_radius_fraction},
       {"wall_fraction", c.wall_fraction},
       {"geometry_jitter", c.geometry_jitter},
       {"texture_amplitude", c.texture_amplitude},
       {"body_radius_fraction", c.body_radius_fraction},
       {"tissue_s0_fraction", c.tissue_s0_fraction},
       {"tissue_diffusivity", c.tissue_diffusivity},
       {"blood_s0_fraction", c.blood_s0_fraction},
       {"blood_diffusivity", c.blood_diffusivity}};
}

void from_json(const nlohmann::json& j, PhantomConfig& c) {
  if (j.contains("dims")) {
    const auto v = j.at("dims").get<std::array<std::size_t, 3>>();
    c.dims = {v[0], v[1], v[2]};
  }
  if (j.contains("spacing")) {
    const auto v = j.at("spacing").get<std::array<double, 3>>();
    c.spacing = {v[0], v[1], v[2]};
  }
  c.ha_endo_deg = j.value("ha_endo_deg", c.ha_endo_deg);
  c.ha_epi_deg = j.value("ha_epi_deg", c.ha_epi_deg);
  c.eigenvalues_mm2_per_s = j.value("eigenvalues_mm2_per_s", c.eigenvalues_mm2_per_s);
  c.s0_mean = j.value("s0_mean", c.s0_mean);
  c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
  c.n_directions = j.value("n_directions", c.n_directions);
  c.b_values = j.value("b_values", c.b_values);
  c.b_ref = j.value("b_ref", c.b_ref);
  c.seed = j.value("seed", c.seed);
  c.outer_radius_fraction = j.value("outer_radius_fraction", c.outer_radius_fraction);
  c.wall_fraction = j.value("wall_fraction", c.wall_fraction);
  c.geometry_jitter = j.value("geometry_jitter", c.geometry_jitter);
  c.texture_amplitude = j.value("texture_amplitude", c.texture_amplitude);
  c.body_radius_fraction = j.value("body_radius_fraction", c.body_radius_fraction);
  c.tissue_s0_fraction = j.value("tissue_s0_fraction", c.tissue_s0_fraction);
  c.tissue_diffusivity = j.value("tissue_diffusivity", c.tissue_diffusivity);
  c.blood_s0_fraction = j.value("blood_s0_fraction", c.blood_s0_fraction);
  c.blood_diffusivity = j.value("blood_diffusivity", c.blood_diffusivity);
}

void to_json(nlohmann::json& j, const DegradeConfig& c) {
  j = {{"through_plane_factor", c.through_plane_factor},
       {"in_plane_factor", c.in_plane_factor},
       {"slice_mode", c.slice_mode == SliceMode::kBlock ? "block" : "sliding"},
       {"boundary", c.boundary == Boundary::kTruncate ? "truncate" : "reflect"}};
}

void from_json(const nlohmann::json& j, DegradeConfig& c) {
  DegradeConfig d;
  c.through_plane_factor = j.value("through_plane_factor", d.through_plane_factor);
  c.in_plane_factor = j.value("in_plane_factor", d.in_plane_factor);
  const std::string mode = j.value("slice_mode", std::string("block"));
  if (mode == "block") {
    c.slice_mode = SliceMode::kBlock;
  } else if (mode == "sliding") {
    c.slice_mode = SliceMode::kSliding;
  } else {
    throw ConfigError("slice_mode must be block or sliding, got '" + mode + "'");
  }
  const std::string boundary = j.value("boundary", std::string("truncate"));
  if (boundary == "truncate") {
    c.boundary = Boundary::kTruncate;
  } else if (boundary == "reflect") {
    c.boundary = Boundary::kReflect;
  } else {
    throw ConfigError("boundary must be truncate or reflect, got '" + boundary + "'");
  }
}

}  // namespace refsr

namespace refsr::cli {

namespace {

// Rejects keys the defaults do not have, so typos fail loudly.
void check_keys(const nlohmann::json& in, const nlohmann::json& ref, const std::string& path) {
  if (!in.is_object() || !ref.is_object()) return;
  for (const auto& [key, value] : in.items()) {
    if (!ref.contains(key)) throw ConfigError("unknown manifest key '" + path + key + "'");
    check_keys(value, ref.at(key), path + key + ".");
  }
}

bool has_b(const std::vector<double>& bs, double b) { return std::find(bs.begin(), bs.end(), b) != bs.end(); }

}  // namespace

PhantomConfig experiment_phantom() {
  PhantomConfig c;
  c.noise_sigma = 0.03;
  return c;
}

void ExperimentManifest::validate() const {
  phantom.validate();
  degrade.validate();
  train.validate();
  train.with_mode(train::Mode::kConventional).validate();
  if (cases < 3) throw ConfigError("an experiment needs at least 3 cases, got " + std::to_string(cases));
  if (!(normalize_percentile > 0.0 && normalize_percentile <= 100.0)) {
    throw ConfigError("normalize_percentile must lie in (0, 100]");
  }
  const Dims& d = phantom.dims;
  const auto tp = static_cast<std::size_t>(degrade.through_plane_factor);
  const auto ip = static_cast<std::size_t>(degrade.in_plane_factor);
  if (d.z % tp || d.y % ip || d.x % ip) {
    throw ConfigError("phantom dims " + to_string(d) + " are not divisible by the degradation factors");
  }
  const std::size_t div = std::size_t{1} << train.generator.levels();
  if (d.y % div || d.x % div) {
    throw ConfigError("slice size " + std::to_string(d.y) + "x" + std::to_string(d.x) + " is not divisible by " +
                      std::to_string(div) + " as the generator depth requires");
  }
  for (double b : train.train_b_values) {
    if (!has_b(phantom.b_values, b)) throw ConfigError("train b-value " + std::to_string(b) + " is not simulated");
  }
  for (double b : train.eval_b_values) {
    if (!has_b(phantom.b_values, b)) throw ConfigError("eval b-value " + std::to_string(b) + " is not simulated");
  }
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

void to_json(nlohmann::json& j, const ExperimentManifest& m) {
  j = {{"phantom", m.phantom},
       {"cases", m.cases},
       {"normalize_percentile", m.normalize_percentile},
       {"degrade", m.degrade},
       {"train", m.train},
       {"output_dir", m.output_dir}};
}

void from_json(const nlohmann::json& j, ExperimentManifest& m) {
  ExperimentManifest d;
  m.phantom = d.phantom;
  if (j.contains("phantom")) j.at("phantom").get_to(m.phantom);
  m.cases = j.value("cases", d.cases);
  m.normalize_percentile = j.value("normalize_percentile", d.normalize_percentile);
  m.degrade = j.value("degrade", d.degrade);
  m.train = j.value("train", d.train);
  m.output_dir = j.value("output_dir", d.output_dir);
}

ExperimentManifest load_manifest(const std::string& path) {
  if (path.empty()) return ExperimentManifest{};
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    check_keys(j, nlohmann::json(ExperimentManifest{}), "");
    return j.get<ExperimentManifest>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string dump_manifest(const ExperimentManifest& m) { return nlohmann::json(m).dump(2) + "\n"; }

}  // namespace refsr::cli
