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

// Oriented rectangles, their polygon forms, convex clipping and rotated IoU.
//
// Angle convention: `w` is the long side, `h` the short side and `theta` the
// orientation of the long side in (-pi/2, pi/2]. Polygons use mathematical
// orientation (counter-clockwise means positive signed area with y pointing
// up); in image coordinates with y pointing down the same vertex order reads
// clockwise on screen.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "rotdet/errors.hpp"
#include "rotdet/parallel.hpp"

namespace rotdet {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kHalfPi = std::numbers::pi / 2.0;

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(Point a, double s) { return {a.x * s, a.y * s}; }
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }

struct RotatedBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  double theta = 0.0;

  double area() const { return w * h; }
  Point center() const { return {cx, cy}; }

  friend bool operator==(const RotatedBox&, const RotatedBox&) = default;
};

struct AxisBox {
  double xmin = 0.0;
  double ymin = 0.0;
  double xmax = 0.0;
  double ymax = 0.0;

  double area() const { return (xmax - xmin) * (ymax - ymin); }

  // Closed boxes: touching edges count as overlapping.
  bool overlaps(const AxisBox& o) const {
    return !(xmax < o.xmin || o.xmax < xmin || ymax < o.ymin || o.ymax < ymin);
  }

  friend bool operator==(const AxisBox&, const AxisBox&) = default;
};

// Maps any finite angle onto the long-side range (-pi/2, pi/2]. Angles already
// in range are returned bit-for-bit, which makes normalization idempotent.
inline double normalize_angle(double theta) {
  if (theta > -kHalfPi && theta <= kHalfPi) return theta;
  double t = std::fmod(theta + kHalfPi, kPi);
  if (t <= 0.0) t += kPi;
  double r = t - kHalfPi;
  if (r <= -kHalfPi) r = kHalfPi;
  return r;
}

inline RotatedBox normalize(double cx, double cy, double w, double h, double theta) {
  if (!std::isfinite(cx) || !std::isfinite(cy) || !std::isfinite(w) || !std::isfinite(h) ||
      !std::isfinite(theta)) {
    throw GeometryError("box has non-finite fields");
  }
  if (!(w > 0.0) || !(h > 0.0)) {
    throw GeometryError("box sides must be positive (w=" + std::to_string(w) +
                        ", h=" + std::to_string(h) + ")");
  }
  if (w < h) {
    std::swap(w, h);
    theta += kHalfPi;
  }
  return {cx, cy, w, h, normalize_angle(theta)};
}

inline RotatedBox normalize(const RotatedBox& b) { return normalize(b.cx, b.cy, b.w, b.h, b.theta); }

inline bool is_normalized(const RotatedBox& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.theta) &&
         std::isfinite(b.w) && b.h > 0.0 && b.w >= b.h && b.theta > -kHalfPi && b.theta <= kHalfPi;
}

namespace detail {

// Shoelace formula, anchored at the first vertex for accuracy far from the
// origin.
inline double signed_area(const Point* pts, std::size_t n) {
  if (n < 3) return 0.0;
  const Point o = pts[0];
  double acc = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i) acc += cross(pts[i] - o, pts[i + 1] - o);
  return 0.5 * acc;
}

inline std::array<Point, 4> box_corners(const RotatedBox& b) {
  const double c = std::cos(b.theta);
  const double s = std::sin(b.theta);
  const double hw = 0.5 * b.w;
  const double hh = 0.5 * b.h;
  auto corner = [&](double x, double y) -> Point {
    return {b.cx + c * x - s * y, b.cy + s * x + c * y};
  };
  return {corner(hw, hh), corner(-hw, hh), corner(-hw, -hh), corner(hw, -hh)};
}

inline AxisBox envelope(std::span<const Point> pts) {
  AxisBox e{pts[0].x, pts[0].y, pts[0].x, pts[0].y};
  for (const Point& p : pts.subspan(1)) {
    e.xmin = std::min(e.xmin, p.x);
    e.ymin = std::min(e.ymin, p.y);
    e.xmax = std::max(e.xmax, p.x);
    e.ymax = std::max(e.ymax, p.y);
  }
  return e;
}

// One Sutherland-Hodgman step: keeps the part of convex polygon `in` on the
// closed left side of the directed line a->b. Writes at most 2n points.
inline std::size_t clip_half_plane(const Point* in, std::size_t n, Point a, Point b, Point* out) {
  if (n == 0) return 0;
  const Point dir = b - a;
  std::size_t m = 0;
  Point prev = in[n - 1];
  double dprev = cross(dir, prev - a);
  for (std::size_t i = 0; i < n; ++i) {
    const Point cur = in[i];
    const double dcur = cross(dir, cur - a);
    const bool cur_in = dcur >= 0.0;
    const bool prev_in = dprev >= 0.0;
    if (cur_in != prev_in) {
      const double t = dprev / (dprev - dcur);
      out[m++] = prev + (cur - prev) * t;
    }
    if (cur_in) out[m++] = cur;
    prev = cur;
    dprev = dcur;
  }
  return m;
}

// Intersection area of two counter-clockwise quadrilaterals. Fixed-size
// buffers: four clip steps at most double the vertex count each time.
inline double quad_intersection_area(const std::array<Point, 4>& subject,
                                     const std::array<Point, 4>& clip) {
  std::array<Point, 64> buf_a;
  std::array<Point, 64> buf_b;
  std::copy(subject.begin(), subject.end(), buf_a.begin());
  std::size_t n = 4;
  Point* cur = buf_a.data();
  Point* next = buf_b.data();
  for (std::size_t e = 0; e < 4 && n > 0; ++e) {
    n = clip_half_plane(cur, n, clip[e], clip[(e + 1) % 4], next);
    std::swap(cur, next);
  }
  return std::max(0.0, signed_area(cur, n));
}

}  // namespace detail

// Quadrilateral with counter-clockwise winding. Construction reorders
// clockwise input; zero-area input is kept but flagged as degenerate.
class Quad {
 public:
  explicit Quad(const std::array<Point, 4>& vertices) : v_(vertices) {
    double a = detail::signed_area(v_.data(), 4);
    if (a < 0.0) {
      std::swap(v_[1], v_[3]);
      a = -a;
    }
    area_ = a;
  }

  const std::array<Point, 4>& vertices() const { return v_; }
  const Point& operator[](std::size_t i) const { return v_[i]; }
  double area() const { return area_; }
  bool degenerate() const { return !(area_ > 0.0); }

  friend bool operator==(const Quad& a, const Quad& b) { return a.v_ == b.v_; }

 private:
  std::array<Point, 4> v_;
  double area_ = 0.0;
};

// Corners at center + R(theta) * (+-w/2, +-h/2), starting at (+w/2, +h/2).
inline Quad obb_to_quad(const RotatedBox& box) { return Quad(detail::box_corners(box)); }

inline AxisBox hbb_envelope(const RotatedBox& box) {
  const auto c = detail::box_corners(box);
  return detail::envelope(c);
}

// Andrew's monotone chain. Returns the hull counter-clockwise without
// collinear or duplicate points.
inline std::vector<Point> convex_hull(std::span<const Point> points) {
  std::vector<Point> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(),
            [](Point a, Point b) { return std::tie(a.x, a.y) < std::tie(b.x, b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point> hull(2 * pts.size());
  std::size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    const Point& p = pts[i];
    while (k >= lower && cross(hull[k - 1] - hull[k - 2], p - hull[k - 2]) <= 0.0) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

// Minimum-area enclosing rectangle by rotating calipers over the convex hull:
// the optimum has one side flush with a hull edge, so every edge direction is
// tried and the first strictly smallest wins.
inline RotatedBox min_area_rect(std::span<const Point> points) {
  for (const Point& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw GeometryError("non-finite vertex");
  }
  const std::vector<Point> hull = convex_hull(points);
  if (hull.size() < 3) throw GeometryError("degenerate polygon: all vertices collinear");

  double best_area = INFINITY;
  RotatedBox best;
  const std::size_t n = hull.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point origin = hull[i];
    const Point edge = hull[(i + 1) % n] - origin;
    const double len = std::hypot(edge.x, edge.y);
    const Point u{edge.x / len, edge.y / len};
    const Point v{-u.y, u.x};
    double umin = INFINITY, umax = -INFINITY, vmin = INFINITY, vmax = -INFINITY;
    for (const Point& p : hull) {
      const Point d = p - origin;
      const double a = dot(d, u);
      const double b = dot(d, v);
      umin = std::min(umin, a);
      umax = std::max(umax, a);
      vmin = std::min(vmin, b);
      vmax = std::max(vmax, b);
    }
    const double area = (umax - umin) * (vmax - vmin);
    if (area < best_area) {
      best_area = area;
      const Point c = origin + u * (0.5 * (umin + umax)) + v * (0.5 * (vmin + vmax));
      best = {c.x, c.y, umax - umin, vmax - vmin, std::atan2(u.y, u.x)};
    }
  }
  if (!(best.w > 0.0) || !(best.h > 0.0)) throw GeometryError("degenerate polygon: zero area");
  return normalize(best);
}

inline RotatedBox quad_to_obb(const Quad& quad) { return min_area_rect(quad.vertices()); }

// Clips convex polygon `subject` by convex polygon `clip` (both
// counter-clockwise). The result may contain repeated vertices where the
// boundaries touch; its area is unaffected.
inline std::vector<Point> clip_convex(std::span<const Point> subject, std::span<const Point> clip) {
  std::vector<Point> cur(subject.begin(), subject.end());
  std::vector<Point> next;
  for (std::size_t e = 0; e < clip.size() && !cur.empty(); ++e) {
    next.resize(2 * cur.size());
    const std::size_t m =
        detail::clip_half_plane(cur.data(), cur.size(), clip[e], clip[(e + 1) % clip.size()], next.data());
    next.resize(m);
    std::swap(cur, next);
  }
  return cur;
}

inline double polygon_area(std::span<const Point> pts) {
  return std::abs(detail::signed_area(pts.data(), pts.size()));
}

// Area of a ∩ b. The arguments are put into a canonical order first so the
// result is bitwise symmetric.
inline double convex_intersection_area(const Quad& a, const Quad& b) {
  const auto& va = a.vertices();
  const auto& vb = b.vertices();
  auto key = [](const std::array<Point, 4>& v) {
    return std::array<double, 8>{v[0].x, v[0].y, v[1].x, v[1].y, v[2].x, v[2].y, v[3].x, v[3].y};
  };
  if (key(vb) < key(va)) return detail::quad_intersection_area(vb, va);
  return detail::quad_intersection_area(va, vb);
}

// A box with its corners, envelope and area precomputed, for kernels that
// evaluate many pairs.
struct PreparedBox {
  RotatedBox box;
  std::array<Point, 4> corners;
  AxisBox envelope;
  double area = 0.0;

  explicit PreparedBox(const RotatedBox& b)
      : box(b), corners(detail::box_corners(b)), envelope(detail::envelope(corners)), area(b.area()) {}
};

inline double rotated_iou(const PreparedBox& a, const PreparedBox& b) {
  const auto field_key = [](const RotatedBox& r) { return std::tie(r.cx, r.cy, r.w, r.h, r.theta); };
  const PreparedBox* p = &a;
  const PreparedBox* q = &b;
  if (field_key(q->box) < field_key(p->box)) std::swap(p, q);
  if (p->box == q->box) return 1.0;
  if (!p->envelope.overlaps(q->envelope)) return 0.0;
  double inter = detail::quad_intersection_area(p->corners, q->corners);
  inter = std::min(inter, std::min(p->area, q->area));
  const double uni = p->area + q->area - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

inline double rotated_iou(const RotatedBox& a, const RotatedBox& b) {
  return rotated_iou(PreparedBox(a), PreparedBox(b));
}

inline std::vector<PreparedBox> prepare_boxes(std::span<const RotatedBox> boxes) {
  std::vector<PreparedBox> out;
  out.reserve(boxes.size());
  for (const RotatedBox& b : boxes) out.emplace_back(b);
  return out;
}

// Row-major |rows| x |cols| IoU matrix.
struct IouMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

inline IouMatrix pairwise_iou(std::span<const PreparedBox> rows, std::span<const PreparedBox> cols,
                              std::size_t threads = 1) {
  IouMatrix m{rows.size(), cols.size(), std::vector<double>(rows.size() * cols.size(), 0.0)};
  parallel_for(rows.size(), threads, [&](std::size_t r) {
    double* out = m.values.data() + r * cols.size();
    for (std::size_t c = 0; c < cols.size(); ++c) out[c] = rotated_iou(rows[r], cols[c]);
  });
  return m;
}

inline IouMatrix pairwise_iou(std::span<const RotatedBox> rows, std::span<const RotatedBox> cols,
                              std::size_t threads = 1) {
  const auto pr = prepare_boxes(rows);
  const auto pc = prepare_boxes(cols);
  return pairwise_iou(std::span<const PreparedBox>(pr), std::span<const PreparedBox>(pc), threads);
}

// Closed containment test in the box frame, with an absolute slack `tol`.
inline bool box_contains(const RotatedBox& box, Point p, double tol = 0.0) {
  const double c = std::cos(box.theta);
  const double s = std::sin(box.theta);
  const Point d = p - box.center();
  const double along = d.x * c + d.y * s;
  const double across = -d.x * s + d.y * c;
  return std::abs(along) <= 0.5 * box.w + tol && std::abs(across) <= 0.5 * box.h + tol;
}

}  // namespace rotdet
