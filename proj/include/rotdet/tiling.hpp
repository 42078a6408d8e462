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

// Splitting large images into overlapping square patches, remapping
// annotations into patch frames and merging per-patch detections back.

#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rotdet/annotation.hpp"
#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"
#include "rotdet/nms.hpp"
#include "rotdet/parallel.hpp"

namespace rotdet {

inline constexpr int kDefaultPatch = 800;
inline constexpr int kDefaultGap = 150;
inline constexpr double kDefaultKeepVisibility = 0.7;

struct TileOrigin {
  int x0 = 0;
  int y0 = 0;

  friend auto operator<=>(const TileOrigin&, const TileOrigin&) = default;
};

struct TilePlan {
  int image_w = 0;
  int image_h = 0;
  int patch = kDefaultPatch;
  // Overlap between neighbouring patches; the stride is patch - gap.
  int gap = kDefaultGap;
  // Row-major: sorted by y0, then x0.
  std::vector<TileOrigin> origins;
};

// Origins 0, s, 2s, ... (s = patch - gap) along one axis, with the first
// window that would cross the far edge pulled back to dim - patch.
inline std::vector<int> axis_origins(int dim, int patch, int gap) {
  if (dim < 1) throw InvalidArgument("image dimension must be >= 1");
  if (gap < 0 || patch <= gap) throw InvalidArgument("tiling requires patch > gap >= 0");
  const int step = patch - gap;
  std::vector<int> out;
  for (int o = 0;; o += step) {
    const int x = o + patch > dim ? std::max(dim - patch, 0) : o;
    if (out.empty() || out.back() != x) out.push_back(x);
    if (x + patch >= dim) break;
  }
  return out;
}

inline TilePlan plan_tiles(int image_w, int image_h, int patch = kDefaultPatch, int gap = kDefaultGap) {
  TilePlan plan{image_w, image_h, patch, gap, {}};
  const auto xs = axis_origins(image_w, patch, gap);
  const auto ys = axis_origins(image_h, patch, gap);
  plan.origins.reserve(xs.size() * ys.size());
  for (int y : ys) {
    for (int x : xs) plan.origins.push_back({x, y});
  }
  return plan;
}

// Pixel window of a tile; the part beyond valid_w / valid_h lies outside the
// image and is meant to be zero-padded by the extractor.
struct TileWindow {
  TileOrigin origin;
  int width = 0;
  int height = 0;
  int valid_w = 0;
  int valid_h = 0;
};

// Hook for pixel slicing: the toolkit never touches imagery itself.
inline void for_each_tile(const TilePlan& plan, const std::function<void(const TileWindow&)>& extract) {
  for (const TileOrigin& o : plan.origins) {
    extract({o, plan.patch, plan.patch, std::min(plan.patch, plan.image_w - o.x0),
             std::min(plan.patch, plan.image_h - o.y0)});
  }
}

struct TileObject {
  RotatedBox box;  // tile frame
  int class_id = 0;
  bool difficult = false;
  // Fraction of the original box area inside the tile, in (0, 1].
  double visibility = 1.0;
  bool truncated = false;
};

struct TileAnnotation {
  TileOrigin origin;
  std::vector<TileObject> objects;
};

inline std::array<Point, 4> tile_polygon(TileOrigin o, int patch) {
  const double x0 = o.x0, y0 = o.y0, x1 = x0 + patch, y1 = y0 + patch;
  return {Point{x0, y0}, Point{x1, y0}, Point{x1, y1}, Point{x0, y1}};
}

// Clips one box against one tile window. Boxes wholly inside are translated
// unchanged with visibility exactly 1; cut boxes are refit as the minimum-area
// rectangle around the clipped polygon.
inline std::optional<TileObject> clip_to_tile(const Annotation& obj, TileOrigin origin, int patch,
                                              double keep_visibility) {
  const auto corners = detail::box_corners(obj.box);
  const double x0 = origin.x0, y0 = origin.y0, x1 = x0 + patch, y1 = y0 + patch;
  const bool inside = std::all_of(corners.begin(), corners.end(), [&](const Point& p) {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  });
  if (inside) {
    RotatedBox b = obj.box;
    b.cx -= x0;
    b.cy -= y0;
    return TileObject{b, obj.class_id, obj.difficult, 1.0, obj.truncated};
  }
  const AxisBox window{x0, y0, x1, y1};
  if (!window.overlaps(detail::envelope(corners))) return std::nullopt;
  const auto window_poly = tile_polygon(origin, patch);
  const std::vector<Point> clipped = clip_convex(corners, window_poly);
  const double visibility = std::min(1.0, polygon_area(clipped) / obj.box.area());
  if (!(visibility > 0.0) || visibility < keep_visibility) return std::nullopt;
  std::vector<Point> local;
  local.reserve(clipped.size());
  for (const Point& p : clipped) local.push_back({p.x - x0, p.y - y0});
  try {
    return TileObject{min_area_rect(local), obj.class_id, obj.difficult, visibility, true};
  } catch (const GeometryError&) {
    return std::nullopt;  // sliver collapsed to a segment
  }
}

// One entry per plan origin, in plan order.
inline std::vector<TileAnnotation> clip_annotations(const AnnotationSet& gts, const TilePlan& plan,
                                                    double keep_visibility = kDefaultKeepVisibility,
                                                    std::size_t threads = 1) {
  if (!(keep_visibility > 0.0 && keep_visibility <= 1.0)) {
    throw InvalidArgument("keep_visibility must be in (0, 1]");
  }
  std::vector<TileAnnotation> out(plan.origins.size());
  parallel_for(plan.origins.size(), threads, [&](std::size_t t) {
    out[t].origin = plan.origins[t];
    for (const Annotation& obj : gts.objects) {
      if (auto o = clip_to_tile(obj, plan.origins[t], plan.patch, keep_visibility)) {
        out[t].objects.push_back(*o);
      }
    }
  });
  return out;
}

inline std::string tile_name(std::string_view image_id, TileOrigin o) {
  return std::string(image_id) + "__" + std::to_string(o.x0) + "__" + std::to_string(o.y0);
}

struct TileRef {
  std::string image_id;
  TileOrigin origin;
};

// Parses "<image_id>__<x0>__<y0>" from the right, so image ids may contain
// "__" themselves.
inline std::optional<TileRef> parse_tile_name(std::string_view name) {
  const auto parse_int = [](std::string_view s, int& v) {
    if (s.empty()) return false;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc{} && r.ptr == s.data() + s.size() && v >= 0;
  };
  const auto p2 = name.rfind("__");
  if (p2 == std::string_view::npos || p2 == 0) return std::nullopt;
  const auto p1 = name.rfind("__", p2 - 1);
  if (p1 == std::string_view::npos || p1 == 0) return std::nullopt;
  TileRef ref{std::string(name.substr(0, p1)), {}};
  if (!parse_int(name.substr(p1 + 2, p2 - p1 - 2), ref.origin.x0)) return std::nullopt;
  if (!parse_int(name.substr(p2 + 2), ref.origin.y0)) return std::nullopt;
  return ref;
}

inline AnnotationSet tile_annotation_set(const TileAnnotation& tile, std::string_view image_id, int patch) {
  AnnotationSet s{tile_name(image_id, tile.origin), static_cast<double>(patch), static_cast<double>(patch), {}};
  for (const TileObject& o : tile.objects) s.objects.push_back({o.box, o.class_id, o.difficult, o.truncated});
  return s;
}

struct TileDetections {
  TileOrigin origin;
  std::vector<Detection> detections;  // tile frame
};

// Shifts every detection into the image frame, concatenates in tile order
// and runs rotated NMS. Returns the kept detections in NMS order.
inline std::vector<Detection> merge_detections(std::span<const TileDetections> per_tile, double iou_thr,
                                               NmsMode mode, std::size_t threads = 1) {
  std::vector<Detection> all;
  for (const TileDetections& t : per_tile) {
    for (Detection d : t.detections) {
      d.box.cx += t.origin.x0;
      d.box.cy += t.origin.y0;
      all.push_back(d);
    }
  }
  const auto keep = rotated_nms(all, iou_thr, mode, threads);
  return select(all, keep);
}

}  // namespace rotdet
