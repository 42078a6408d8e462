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

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"
#include "rotdet/parallel.hpp"

namespace rotdet {

struct Detection {
  RotatedBox box;
  int class_id = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class NmsMode { class_aware, class_agnostic };

inline std::string_view to_string(NmsMode m) {
  return m == NmsMode::class_aware ? "class_aware" : "class_agnostic";
}

inline NmsMode parse_nms_mode(std::string_view s) {
  if (s == "class_aware") return NmsMode::class_aware;
  if (s == "class_agnostic") return NmsMode::class_agnostic;
  throw InvalidArgument("unknown NMS mode '" + std::string(s) + "'");
}

// Keeps detections with score >= conf_thr, in input order.
inline std::vector<Detection> score_filter(std::span<const Detection> dets, double conf_thr) {
  if (!(conf_thr >= 0.0 && conf_thr <= 1.0)) throw InvalidArgument("confidence threshold must be in [0, 1]");
  std::vector<Detection> out;
  for (const Detection& d : dets) {
    if (d.score >= conf_thr) out.push_back(d);
  }
  return out;
}

// Descending score, ties by lower index.
inline std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

namespace detail {

// Greedy suppression over `order` (already score-sorted indices into dets).
// A detection is suppressed when its IoU with a kept one is strictly greater
// than iou_thr. The envelope test is only a shortcut: disjoint envelopes
// imply zero IoU.
inline std::vector<std::size_t> greedy_nms(std::span<const Detection> dets, std::span<const PreparedBox> prepared,
                                           const std::vector<std::size_t>& order, double iou_thr,
                                           bool same_class_only) {
  std::vector<std::size_t> keep;
  std::vector<char> suppressed(order.size(), 0);
  for (std::size_t a = 0; a < order.size(); ++a) {
    if (suppressed[a]) continue;
    const std::size_t i = order[a];
    keep.push_back(i);
    const PreparedBox& pi = prepared[i];
    for (std::size_t b = a + 1; b < order.size(); ++b) {
      if (suppressed[b]) continue;
      const std::size_t j = order[b];
      if (same_class_only && dets[j].class_id != dets[i].class_id) continue;
      if (!pi.envelope.overlaps(prepared[j].envelope)) continue;
      if (rotated_iou(pi, prepared[j]) > iou_thr) suppressed[b] = 1;
    }
  }
  return keep;
}

}  // namespace detail

// Greedy rotated NMS. Returns kept indices ordered by descending score (ties
// by lower index). In class-aware mode the classes are independent and may
// be processed on `threads` workers; the merge is deterministic.
inline std::vector<std::size_t> rotated_nms(std::span<const Detection> dets, double iou_thr, NmsMode mode,
                                            std::size_t threads = 1) {
  if (!(iou_thr >= 0.0 && iou_thr <= 1.0)) throw InvalidArgument("NMS IoU threshold must be in [0, 1]");
  if (dets.empty()) return {};
  std::vector<PreparedBox> prepared;
  prepared.reserve(dets.size());
  for (const Detection& d : dets) prepared.emplace_back(d.box);
  const std::vector<std::size_t> order = score_order(dets);

  if (mode == NmsMode::class_agnostic) return detail::greedy_nms(dets, prepared, order, iou_thr, false);

  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i : order) by_class[dets[i].class_id].push_back(i);
  std::vector<const std::vector<std::size_t>*> groups;
  for (const auto& [cls, idx] : by_class) groups.push_back(&idx);
  std::vector<std::vector<std::size_t>> kept(groups.size());
  parallel_for(groups.size(), threads, [&](std::size_t g) {
    kept[g] = detail::greedy_nms(dets, prepared, *groups[g], iou_thr, false);
  });

  std::vector<std::size_t> out;
  for (const auto& k : kept) out.insert(out.end(), k.begin(), k.end());
  std::sort(out.begin(), out.end(), [&](std::size_t a, std::size_t b) {
    if (dets[a].score != dets[b].score) return dets[a].score > dets[b].score;
    return a < b;
  });
  return out;
}

inline std::vector<Detection> select(std::span<const Detection> dets, std::span<const std::size_t> indices) {
  std::vector<Detection> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(dets[i]);
  return out;
}

}  // namespace rotdet
