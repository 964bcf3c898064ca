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

#include "refsr/core/rvol.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "json.hpp"

#include "refsr/core/error.hpp"

namespace refsr {
namespace {

constexpr char kMagic[6] = {'R', 'V', 'O', 'L', '1', '\0'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[off + i]) << (8 * i);
  return v;
}

float get_f32(const std::vector<std::uint8_t>& in, std::size_t off) {
  return std::bit_cast<float>(get_u32(in, off));
}

float to_stored(double v, const char* what) {
  if (!std::isfinite(v) || std::abs(v) > std::numeric_limits<float>::max()) {
    throw ValidationError(std::string(what) + " is not representable as a finite 32-bit real");
  }
  return static_cast<float>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_volume(const Volume& vol) {
  vol.validate();
  const Dims& d = vol.dims();
  std::vector<std::uint8_t> out;
  out.reserve(kRvolHeaderBytes + 4 * d.count());
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  out.push_back(0);
  out.push_back(0);
  for (std::size_t n : {d.z, d.y, d.x}) {
    if (n > std::numeric_limits<std::uint32_t>::max()) throw ValidationError("volume dimension too large");
    put_u32(out, static_cast<std::uint32_t>(n));
  }
  put_f32(out, to_stored(vol.spacing().z, "spacing"));
  put_f32(out, to_stored(vol.spacing().y, "spacing"));
  put_f32(out, to_stored(vol.spacing().x, "spacing"));
  put_f32(out, to_stored(vol.intensity_scale(), "intensity_scale"));
  for (double v : vol.data()) put_f32(out, to_stored(v, "voxel value"));
  return out;
}

Volume decode_volume(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), kMagic, 6) != 0) {
    throw FormatError("missing RVOL magic", 0);
  }
  if (bytes.size() < kRvolHeaderBytes) throw FormatError("truncated RVOL header", bytes.size());
  if (bytes[6] != 0 || bytes[7] != 0) throw FormatError("reserved RVOL bytes must be zero", 6);
  const Dims d{get_u32(bytes, 8), get_u32(bytes, 12), get_u32(bytes, 16)};
  if (d.z == 0 || d.y == 0 || d.x == 0) throw FormatError("RVOL dimension is zero", 8);
  const Spacing sp{get_f32(bytes, 20), get_f32(bytes, 24), get_f32(bytes, 28)};
  const double scale = get_f32(bytes, 32);
  const std::size_t expected = kRvolHeaderBytes + 4 * d.count();
  if (bytes.size() != expected) {
    throw FormatError("RVOL payload size mismatch: expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()),
                      std::min(bytes.size(), expected));
  }
  std::vector<double> data(d.count());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const float f = get_f32(bytes, kRvolHeaderBytes + 4 * i);
    if (!std::isfinite(f)) {
      throw ValidationError("RVOL payload value " + std::to_string(i) + " is not finite");
    }
    data[i] = f;
  }
  Volume vol(d, sp, scale, std::move(data));
  vol.validate();
  return vol;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return std::string(bytes.begin(), bytes.end());
}

void write_volume(const Volume& vol, const std::filesystem::path& path) {
  // Encode first: a validation failure must not leave a partial file behind.
  write_file_bytes(path, encode_volume(vol));
}

Volume read_volume(const std::filesystem::path& path) { return decode_volume(read_file_bytes(path)); }

void write_sidecar(const Sidecar& sc, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["case_id"] = sc.case_id;
  j["b_value"] = sc.b_value;
  j["direction"] = {sc.direction.x, sc.direction.y, sc.direction.z};
  write_text_file(path, j.dump(2) + "\n");
}

Sidecar read_sidecar(const std::filesystem::path& path) {
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    Sidecar sc;
    sc.case_id = j.at("case_id").get<std::string>();
    sc.b_value = j.at("b_value").get<double>();
    const auto& dir = j.at("direction");
    if (!dir.is_array() || dir.size() != 3) throw FormatError("sidecar direction must have 3 entries", 0);
    sc.direction = {dir[0].get<double>(), dir[1].get<double>(), dir[2].get<double>()};
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what(), 0);
  }
}

void write_dwi(const DwiImage& img, const std::string& case_id, const std::filesystem::path& dir,
               const std::string& stem) {
  write_volume(img.volume, dir / (stem + ".rvol"));
  write_sidecar({case_id, img.b_value, img.direction}, dir / (stem + ".json"));
}

DwiImage read_dwi(const std::filesystem::path& dir, const std::string& stem, std::string* case_id) {
  DwiImage img;
  img.volume = read_volume(dir / (stem + ".rvol"));
  const Sidecar sc = read_sidecar(dir / (stem + ".json"));
  img.b_value = sc.b_value;
  img.direction = sc.direction;
  if (case_id) *case_id = sc.case_id;
  return img;
}

}  // namespace refsr
