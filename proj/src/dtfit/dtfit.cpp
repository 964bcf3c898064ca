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

#include "refsr/dtfit/dtfit.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "refsr/core/error.hpp"
#include "refsr/core/normalize.hpp"
#include "refsr/core/parallel.hpp"

namespace refsr {

TensorField fit_tensor(const DwiCase& c, std::span<const std::uint8_t> mask) {
  const Dims dims = c.dims();
  if (!mask.empty() && mask.size() != dims.count()) throw ShapeError("fit mask size does not match the case");

  std::vector<const DwiImage*> used;
  for (const auto& img : c.dwis) {
    if (img.b_value > c.b0.b_value) used.push_back(&img);
    if (img.volume.dims() != dims) throw ShapeError("DWI dims differ from b0 in case " + c.case_id);
  }
  const auto n = static_cast<Eigen::Index>(used.size());
  Eigen::MatrixXd design(n, 6);
  std::string scheme;
  for (Eigen::Index r = 0; r < n; ++r) {
    const DwiImage& img = *used[static_cast<std::size_t>(r)];
    const double b = img.b_value - c.b0.b_value;
    const Vec3& g = img.direction;
    design.row(r) << -b * g.x * g.x, -b * g.y * g.y, -b * g.z * g.z, -2 * b * g.x * g.y, -2 * b * g.x * g.z,
        -2 * b * g.y * g.z;
    scheme += (r ? "; " : "") + std::to_string(b) + "@(" + std::to_string(g.x) + "," + std::to_string(g.y) + "," +
              std::to_string(g.z) + ")";
  }
  if (n < 6) {
    throw ConfigError("tensor fit needs >= 6 weighted directions, got " + std::to_string(n) + ": [" + scheme + "]");
  }
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() < 6) {
    throw ConfigError("tensor fit design matrix is rank " + std::to_string(qr.rank()) + " for directions [" +
                      scheme + "]");
  }
  const Eigen::MatrixXd pinv = (design.transpose() * design).ldlt().solve(design.transpose());

  TensorField out(dims, c.b0.volume.spacing());
  const std::size_t plane = dims.slice_count();
  parallel_for(dims.z, [&](std::size_t z) {
    Eigen::VectorXd y(n);
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t i = z * plane + p;
      if (!mask.empty() && !mask[i]) continue;
      const double s0 = c.b0.volume.data()[i];
      if (!(s0 > 0.0)) continue;
      bool ok = true;
      for (Eigen::Index r = 0; r < n; ++r) {
        const double s = used[static_cast<std::size_t>(r)]->volume.data()[i];
        if (!(s > 0.0)) {
          ok = false;
          break;
        }
        y[r] = std::log(s / s0);
      }
      if (!ok) continue;
      const Eigen::Matrix<double, 6, 1> d = pinv * y;
      for (int k = 0; k < 6; ++k) out.components[static_cast<std::size_t>(k)].data()[i] = d[k];
      out.mask[i] = 1;
    }
  });
  return out;
}

Eigen3 eigen_symmetric(const std::array<double, 9>& d) {
  Eigen::Matrix3d m;
  m << d[0], d[1], d[2], d[3], d[4], d[5], d[6], d[7], d[8];
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(m);
  Eigen3 out;
  // Eigen returns ascending order.
  for (int k = 0; k < 3; ++k) {
    out.values[static_cast<std::size_t>(k)] = es.eigenvalues()[2 - k];
    const auto v = es.eigenvectors().col(2 - k);
    out.vectors[static_cast<std::size_t>(k)] = {v[0], v[1], v[2]};
  }
  return out;
}

Volume md(const TensorField& t) {
  Volume out(t.dims(), t.components[0].spacing());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t.mask[i]) continue;
    out.data()[i] = (t.components[TensorField::kXX].data()[i] + t.components[TensorField::kYY].data()[i] +
                     t.components[TensorField::kZZ].data()[i]) /
                    3.0;
  }
  return out;
}

double fa_from_eigenvalues(std::array<double, 3> l) {
  for (double& v : l) v = std::max(v, 0.0);
  const double norm2 = l[0] * l[0] + l[1] * l[1] + l[2] * l[2];
  if (norm2 == 0.0) return 0.0;
  const double mean = (l[0] + l[1] + l[2]) / 3.0;
  const double dev2 = (l[0] - mean) * (l[0] - mean) + (l[1] - mean) * (l[1] - mean) + (l[2] - mean) * (l[2] - mean);
  return std::clamp(std::sqrt(1.5 * dev2 / norm2), 0.0, 1.0);
}

Volume fa(const TensorField& t) {
  Volume out(t.dims(), t.components[0].spacing());
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!t.mask[i]) continue;
    out.data()[i] = fa_from_eigenvalues(eigen_symmetric(t.tensor(i)).values);
  }
  return out;
}

Volume ha(const TensorField& t, const PhantomGeometry& geom, std::vector<std::uint8_t>* valid) {
  const Dims dims = t.dims();
  Volume out(dims, t.components[0].spacing());
  if (valid) *valid = t.mask;
  const double rad2deg = 180.0 / std::numbers::pi;
  for (std::size_t z = 0; z < dims.z; ++z) {
    for (std::size_t y = 0; y < dims.y; ++y) {
      for (std::size_t x = 0; x < dims.x; ++x) {
        const std::size_t i = out.index(z, y, x);
        if (!t.mask[i]) continue;
        const double px = static_cast<double>(x) - geom.center_x;
        const double py = static_cast<double>(y) - geom.center_y;
        const double r = std::hypot(px, py);
        if (r == 0.0) {
          if (valid) (*valid)[i] = 0;
          continue;
        }
        const Vec3 circ{-py / r, px / r, 0.0};
        Vec3 e1 = eigen_symmetric(t.tensor(i)).vectors[0];
        double c = e1.dot(circ);
        double a = e1.z;
        if (c < 0.0 || (c == 0.0 && a < 0.0)) {
          c = -c;
          a = -a;
        }
        double angle = std::atan2(a, c) * rad2deg;  // [-90, 90]
        if (angle <= -90.0) angle += 180.0;
        out.data()[i] = angle;
      }
    }
  }
  return out;
}

double ha_circular_error(double a_deg, double b_deg) {
  double e = std::fmod(std::abs(a_deg - b_deg), 180.0);
  return std::min(e, 180.0 - e);
}

DtMaps compute_maps(const TensorField& t, const PhantomGeometry& geom) {
  DtMaps m;
  m.md = md(t);
  m.fa = fa(t);
  m.ha = ha(t, geom, &m.mask);
  return m;
}

namespace {

MapError summarize(std::vector<double>& errors) {
  MapError e;
  if (errors.empty()) return e;
  double sum = 0.0;
  for (double v : errors) sum += v;
  e.mae = sum / static_cast<double>(errors.size());
  e.p95 = percentile(errors, 95.0);
  return e;
}

}  // namespace

MapComparison compare_maps(const DtMaps& test, const DtMaps& reference, std::span<const std::uint8_t> mask) {
  const std::size_t n = reference.md.data().size();
  if (test.md.data().size() != n || (!mask.empty() && mask.size() != n)) {
    throw ShapeError("map comparison inputs differ in size");
  }
  std::vector<double> e_md, e_fa, e_ha;
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (!test.mask[i] || !reference.mask[i]) continue;
    e_md.push_back(std::abs(test.md.data()[i] - reference.md.data()[i]));
    e_fa.push_back(std::abs(test.fa.data()[i] - reference.fa.data()[i]));
    e_ha.push_back(ha_circular_error(test.ha.data()[i], reference.ha.data()[i]));
  }
  MapComparison out;
  out.voxels = e_md.size();
  out.md = summarize(e_md);
  out.fa = summarize(e_fa);
  out.ha = summarize(e_ha);
  return out;
}

}  // namespace refsr
