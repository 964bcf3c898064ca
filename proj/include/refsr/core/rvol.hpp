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
#include <filesystem>
#include <string>
#include <vector>

#include "refsr/core/volume.hpp"

namespace refsr {

/// RVOL layout (all little-endian):
///   0..5   magic "RVOL1\0"
///   6..7   reserved, zero
///   8..19  dims z, y, x as uint32
///   20..31 spacing z, y, x as float32 (mm)
///   32..35 intensity_scale as float32
///   36..   z*y*x float32 values, z-major then y then x
inline constexpr std::size_t kRvolHeaderBytes = 36;

std::vector<std::uint8_t> encode_volume(const Volume& vol);
Volume decode_volume(const std::vector<std::uint8_t>& bytes);

void write_volume(const Volume& vol, const std::filesystem::path& path);
Volume read_volume(const std::filesystem::path& path);

/// Sidecar `<name>.json` carrying {case_id, b_value, direction:[x,y,z]}.
struct Sidecar {
  std::string case_id;
  double b_value = 0.0;
  Vec3 direction{};
};

void write_sidecar(const Sidecar& sc, const std::filesystem::path& path);
Sidecar read_sidecar(const std::filesystem::path& path);

/// Writes `<dir>/<stem>.rvol` plus `<dir>/<stem>.json`.
void write_dwi(const DwiImage& img, const std::string& case_id, const std::filesystem::path& dir,
               const std::string& stem);
DwiImage read_dwi(const std::filesystem::path& dir, const std::string& stem, std::string* case_id = nullptr);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace refsr
