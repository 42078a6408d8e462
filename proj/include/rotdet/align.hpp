// Copyright 2026 The rotdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Sampling grids for aligned convolution: the k x k taps of a kernel are
// spread uniformly over the interior of a rotated proposal instead of the
// regular dilation-1 window, and reported as offsets from that window.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {

struct FeatureCell {
  std::size_t i = 0;  // column
  std::size_t j = 0;  // row
};

struct SamplingGrid {
  int k = 1;
  double stride = 1.0;
  // k * k entries, row-major over taps (v, u) with u, v in [-(k-1)/2, (k-1)/2].
  std::vector<Point> points;   // image space
  std::vector<Point> offsets;  // feature-map units

  int radius() const { return (k - 1) / 2; }
  std::size_t index(int u, int v) const {
    return static_cast<std::size_t>(v + radius()) * static_cast<std::size_t>(k) +
           static_cast<std::size_t>(u + radius());
  }
};

// Tap (u, v) samples center + R(theta) * (u * w / k, v * h / k) and its
// offset is measured against the standard tap
// ((i + 0.5 + u) * stride, (j + 0.5 + v) * stride), divided by stride.
inline SamplingGrid align_sampling_grid(const RotatedBox& box, int k, double stride, FeatureCell cell) {
  if (k < 1 || k % 2 == 0) throw InvalidArgument("kernel size must be odd and >= 1, got " + std::to_string(k));
  if (!(stride > 0.0)) throw InvalidArgument("stride must be positive");

  SamplingGrid g;
  g.k = k;
  g.stride = stride;
  g.points.reserve(static_cast<std::size_t>(k) * k);
  g.offsets.reserve(static_cast<std::size_t>(k) * k);
  const double c = std::cos(box.theta);
  const double s = std::sin(box.theta);
  const double base_x = (static_cast<double>(cell.i) + 0.5) * stride;
  const double base_y = (static_cast<double>(cell.j) + 0.5) * stride;
  const int r = g.radius();
  for (int v = -r; v <= r; ++v) {
    for (int u = -r; u <= r; ++u) {
      const double along = u * box.w / k;
      const double across = v * box.h / k;
      const Point p{box.cx + (c * along - s * across), box.cy + (s * along + c * across)};
      const Point tap{base_x + u * stride, base_y + v * stride};
      g.points.push_back(p);
      g.offsets.push_back({(p.x - tap.x) / stride, (p.y - tap.y) / stride});
    }
  }
  return g;
}

inline bool grid_inside_box(const SamplingGrid& grid, const RotatedBox& box) {
  const double tol = 1e-12 * std::max({1.0, box.w, std::abs(box.cx), std::abs(box.cy)});
  for (const Point& p : grid.points) {
    if (!box_contains(box, p, tol)) return false;
  }
  return true;
}

}  // namespace rotdet
