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

// Rotated box regression deltas and the two-stage refinement cascade
// (anchor refinement stage followed by the accurate detection stage),
// expressed as pure box arithmetic.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {

// Center offsets are measured along the anchor's own long (dx) and short (dy)
// axes, in units of the anchor's w and h.
struct BoxDelta {
  double dx = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dh = 0.0;
  double dtheta = 0.0;

  friend bool operator==(const BoxDelta&, const BoxDelta&) = default;
};

inline constexpr double kMaxLogScale = 4.0;

inline BoxDelta encode_delta(const RotatedBox& anchor, const RotatedBox& target) {
  const double c = std::cos(anchor.theta);
  const double s = std::sin(anchor.theta);
  const double ddx = target.cx - anchor.cx;
  const double ddy = target.cy - anchor.cy;
  return {
      (ddx * c + ddy * s) / anchor.w,
      (-ddx * s + ddy * c) / anchor.h,
      std::log(target.w / anchor.w),
      std::log(target.h / anchor.h),
      normalize_angle(target.theta - anchor.theta),
  };
}

struct DecodeResult {
  RotatedBox box;
  // Set when |dw| or |dh| exceeded kMaxLogScale and was clamped.
  bool clamped = false;
};

inline DecodeResult decode_delta(const RotatedBox& anchor, const BoxDelta& delta) {
  bool clamped = false;
  auto clamp_log = [&](double v) {
    if (v > kMaxLogScale) {
      clamped = true;
      return kMaxLogScale;
    }
    if (v < -kMaxLogScale) {
      clamped = true;
      return -kMaxLogScale;
    }
    return v;
  };
  const double dw = clamp_log(delta.dw);
  const double dh = clamp_log(delta.dh);
  const double c = std::cos(anchor.theta);
  const double s = std::sin(anchor.theta);
  const double along = delta.dx * anchor.w;
  const double across = delta.dy * anchor.h;
  const double cx = anchor.cx + along * c - across * s;
  const double cy = anchor.cy + along * s + across * c;
  return {normalize(cx, cy, anchor.w * std::exp(dw), anchor.h * std::exp(dh), anchor.theta + delta.dtheta),
          clamped};
}

struct StageThresholds {
  double pos_iou = 0.5;
  double neg_iou = 0.4;

  friend bool operator==(const StageThresholds&, const StageThresholds&) = default;
};

// Per-stage assignment thresholds, first stage first. The default is the
// 0.5 / 0.6 positive-threshold pair with a shared 0.4 negative threshold.
struct CascadeConfig {
  std::vector<StageThresholds> stages{{0.5, 0.4}, {0.6, 0.4}};

  void validate() const {
    if (stages.empty()) throw InvalidArgument("cascade needs at least one stage");
    for (std::size_t i = 0; i < stages.size(); ++i) {
      const auto& st = stages[i];
      if (!(st.neg_iou > 0.0 && st.neg_iou <= st.pos_iou && st.pos_iou <= 1.0)) {
        throw InvalidArgument("stage " + std::to_string(i) +
                              ": thresholds must satisfy 0 < neg <= pos <= 1");
      }
    }
  }

  friend bool operator==(const CascadeConfig&, const CascadeConfig&) = default;
};

struct CascadeResult {
  // stages[0] holds the input anchors, stages[k] the output of stage k.
  std::vector<std::vector<RotatedBox>> stages;
  // Number of decodes that hit the log-scale clamp, over all stages.
  std::size_t clamped = 0;

  const std::vector<RotatedBox>& final_boxes() const { return stages.back(); }
};

inline CascadeResult cascade_refine(const std::vector<RotatedBox>& anchors,
                                    const std::vector<std::vector<BoxDelta>>& stage_deltas) {
  CascadeResult out;
  out.stages.reserve(stage_deltas.size() + 1);
  out.stages.push_back(anchors);
  for (std::size_t k = 0; k < stage_deltas.size(); ++k) {
    const auto& deltas = stage_deltas[k];
    const auto& prev = out.stages.back();
    if (deltas.size() != prev.size()) {
      throw DimensionError("stage " + std::to_string(k + 1) + " has " + std::to_string(deltas.size()) +
                           " deltas for " + std::to_string(prev.size()) + " boxes");
    }
    std::vector<RotatedBox> next;
    next.reserve(prev.size());
    for (std::size_t i = 0; i < prev.size(); ++i) {
      const DecodeResult r = decode_delta(prev[i], deltas[i]);
      out.clamped += r.clamped ? 1 : 0;
      next.push_back(r.box);
    }
    out.stages.push_back(std::move(next));
  }
  return out;
}

}  // namespace rotdet
