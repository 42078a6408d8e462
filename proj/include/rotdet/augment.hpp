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

// Geometric augmentation that keeps oriented boxes consistent, and the
// class-balanced repeat-factor planner.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rotdet/annotation.hpp"
#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {

enum class FlipAxis { horizontal, vertical };

// horizontal: x -> image_w - x. vertical: y -> image_h - y.
inline AnnotationSet flip_obb(const AnnotationSet& set, FlipAxis axis) {
  AnnotationSet out = set;
  for (Annotation& o : out.objects) {
    if (axis == FlipAxis::horizontal) {
      o.box.cx = set.image_w - o.box.cx;
    } else {
      o.box.cy = set.image_h - o.box.cy;
    }
    o.box.theta = normalize_angle(-o.box.theta);
  }
  return out;
}

// Row-major 2x3 matrix [a b tx; c d ty] acting on column vectors.
struct Affine2D {
  double a = 1.0, b = 0.0, tx = 0.0;
  double c = 0.0, d = 1.0, ty = 0.0;

  static Affine2D identity() { return {}; }
  static Affine2D scale(double s) { return {s, 0.0, 0.0, 0.0, s, 0.0}; }
  static Affine2D translation(double x, double y) { return {1.0, 0.0, x, 0.0, 1.0, y}; }
  static Affine2D rotation(double phi) {
    const double co = std::cos(phi), si = std::sin(phi);
    return {co, -si, 0.0, si, co, 0.0};
  }
  // Rotation by phi about (px, py).
  static Affine2D rotation_about(double phi, double px, double py) {
    return translation(px, py) * rotation(phi) * translation(-px, -py);
  }

  double det() const { return a * d - b * c; }

  Point apply(Point p) const { return {a * p.x + b * p.y + tx, c * p.x + d * p.y + ty}; }

  // (m * n)(p) == m(n(p))
  friend Affine2D operator*(const Affine2D& m, const Affine2D& n) {
    return {m.a * n.a + m.b * n.c, m.a * n.b + m.b * n.d, m.a * n.tx + m.b * n.ty + m.tx,
            m.c * n.a + m.d * n.c, m.c * n.b + m.d * n.d, m.c * n.tx + m.d * n.ty + m.ty};
  }

  friend bool operator==(const Affine2D&, const Affine2D&) = default;
};

inline constexpr double kSingularDet = 1e-12;

// Maps one box. Similarities (rotation, uniform scale, reflection) map
// rectangles to rectangles and are handled in closed form; anything else is
// refit as the minimum-area rectangle around the mapped corners.
inline RotatedBox affine_box(const RotatedBox& box, const Affine2D& m) {
  const Point c = m.apply(box.center());
  if (m.a == m.d && m.b == -m.c) {
    const double s = std::hypot(m.a, m.c);
    return normalize(c.x, c.y, box.w * s, box.h * s, box.theta + std::atan2(m.c, m.a));
  }
  if (m.a == -m.d && m.b == m.c) {
    const double s = std::hypot(m.a, m.c);
    return normalize(c.x, c.y, box.w * s, box.h * s, std::atan2(m.c, m.a) - box.theta);
  }
  auto corners = detail::box_corners(box);
  for (Point& p : corners) p = m.apply(p);
  return min_area_rect(corners);
}

// Maps every box through m; boxes whose new center leaves
// [0, out_w) x [0, out_h) are dropped.
inline AnnotationSet affine_obb(const AnnotationSet& set, const Affine2D& m, double out_w, double out_h) {
  if (!(std::abs(m.det()) > kSingularDet)) throw InvalidArgument("affine matrix is singular");
  AnnotationSet out{set.image_id, out_w, out_h, {}};
  for (const Annotation& o : set.objects) {
    Annotation t = o;
    t.box = affine_box(o.box, m);
    if (t.box.cx >= 0.0 && t.box.cx < out_w && t.box.cy >= 0.0 && t.box.cy < out_h) out.objects.push_back(t);
  }
  return out;
}

inline std::vector<Affine2D> multiscale_plan(std::span<const double> scales) {
  std::vector<Affine2D> out;
  out.reserve(scales.size());
  for (double s : scales) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("scales must be positive");
    out.push_back(Affine2D::scale(s));
  }
  return out;
}

struct BalancePlan {
  // Parallel to the input sets.
  std::vector<std::string> image_ids;
  std::vector<int> repeat_factors;
  // Keyed by class id; only classes with at least one instance.
  std::map<int, std::size_t> counts_before;
  std::map<int, std::size_t> counts_after;
  std::map<int, int> class_repeat;
  // Classes of the table with no instance; excluded from the plan.
  std::vector<int> excluded_classes;
  double target_ratio = 1.0;
  double min_max_before = 0.0;  // rarest / most frequent class count
  double min_max_after = 0.0;
  double image_inflation = 1.0;     // sum of repeats / image count
  double instance_inflation = 1.0;  // instances after / before
  // Set when the raw plan would have worsened the min/max ratio and was
  // reset to all ones instead.
  bool fell_back = false;
};

namespace detail {

inline double min_max_ratio(const std::map<int, std::size_t>& counts) {
  if (counts.empty()) return 0.0;
  std::size_t lo = counts.begin()->second, hi = lo;
  for (const auto& [cls, n] : counts) {
    lo = std::min(lo, n);
    hi = std::max(hi, n);
  }
  return static_cast<double>(lo) / static_cast<double>(hi);
}

}  // namespace detail

// Image-level repeat-factor balancing. For class frequency f_c and
// t = target_ratio / num_classes, a class repeats r_c = max(1, ceil(sqrt(t / f_c)))
// times and an image repeats max r_c over the classes it contains.
// `num_classes` is the class-table size; classes of the table that never occur
// are reported in excluded_classes and do not count towards t.
inline BalancePlan balance_plan(std::span<const AnnotationSet> sets, double target_ratio, int num_classes) {
  if (!(target_ratio > 0.0 && target_ratio <= 1.0)) throw InvalidArgument("target ratio must be in (0, 1]");
  BalancePlan plan;
  plan.target_ratio = target_ratio;
  std::size_t total = 0;
  for (const AnnotationSet& s : sets) {
    for (const Annotation& o : s.objects) {
      ++plan.counts_before[o.class_id];
      ++total;
    }
  }
  if (sets.empty() || total == 0) throw InvalidArgument("cannot balance an empty dataset");
  for (int c = 0; c < num_classes; ++c) {
    if (!plan.counts_before.contains(c)) plan.excluded_classes.push_back(c);
  }

  const double t = target_ratio / static_cast<double>(plan.counts_before.size());
  for (const auto& [cls, n] : plan.counts_before) {
    const double f = static_cast<double>(n) / static_cast<double>(total);
    plan.class_repeat[cls] = std::max(1, static_cast<int>(std::ceil(std::sqrt(t / f))));
  }

  const auto bookkeep = [&] {
    plan.counts_after.clear();
    std::size_t repeats = 0;
    for (const auto& [cls, n] : plan.counts_before) plan.counts_after[cls] = 0;
    for (std::size_t i = 0; i < sets.size(); ++i) {
      repeats += static_cast<std::size_t>(plan.repeat_factors[i]);
      for (const Annotation& o : sets[i].objects) {
        plan.counts_after[o.class_id] += static_cast<std::size_t>(plan.repeat_factors[i]);
      }
    }
    std::size_t after = 0;
    for (const auto& [cls, n] : plan.counts_after) after += n;
    plan.image_inflation = static_cast<double>(repeats) / static_cast<double>(sets.size());
    plan.instance_inflation = static_cast<double>(after) / static_cast<double>(total);
    plan.min_max_after = detail::min_max_ratio(plan.counts_after);
  };

  for (const AnnotationSet& s : sets) {
    int r = 1;
    for (const Annotation& o : s.objects) r = std::max(r, plan.class_repeat[o.class_id]);
    plan.image_ids.push_back(s.image_id);
    plan.repeat_factors.push_back(r);
  }
  plan.min_max_before = detail::min_max_ratio(plan.counts_before);
  bookkeep();
  if (plan.min_max_after < plan.min_max_before) {
    std::fill(plan.repeat_factors.begin(), plan.repeat_factors.end(), 1);
    plan.fell_back = true;
    bookkeep();
  }
  return plan;
}

}  // namespace rotdet
