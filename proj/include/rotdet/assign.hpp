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

// Dense anchor layout and max-IoU training sample assignment.

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "rotdet/codec.hpp"
#include "rotdet/errors.hpp"
#include "rotdet/geometry.hpp"

namespace rotdet {

struct AnchorGrid {
  double stride = 8.0;
  double base_size = 32.0;
  std::size_t grid_w = 1;
  std::size_t grid_h = 1;
  double base_theta = 0.0;

  void validate() const {
    if (!(stride > 0.0)) throw InvalidArgument("anchor stride must be positive");
    if (!(base_size > 0.0)) throw InvalidArgument("anchor base size must be positive");
    if (grid_w < 1 || grid_h < 1) throw InvalidArgument("anchor grid must be at least 1x1");
  }
};

// One square anchor per cell, row-major.
inline std::vector<RotatedBox> generate_anchors(const AnchorGrid& grid) {
  grid.validate();
  std::vector<RotatedBox> anchors;
  anchors.reserve(grid.grid_w * grid.grid_h);
  const double theta = normalize_angle(grid.base_theta);
  for (std::size_t j = 0; j < grid.grid_h; ++j) {
    for (std::size_t i = 0; i < grid.grid_w; ++i) {
      anchors.push_back({(static_cast<double>(i) + 0.5) * grid.stride,
                         (static_cast<double>(j) + 0.5) * grid.stride, grid.base_size, grid.base_size,
                         theta});
    }
  }
  return anchors;
}

enum class LabelKind { negative, ignore, positive };

struct AnchorLabel {
  LabelKind kind = LabelKind::negative;
  // Assigned ground truth; meaningful only for positives.
  std::size_t gt = 0;

  friend bool operator==(const AnchorLabel&, const AnchorLabel&) = default;
};

struct AssignmentResult {
  std::vector<AnchorLabel> labels;
  std::vector<double> max_iou;
  // IoU of each anchor with the ground truth it is labelled positive for
  // (0 for non-positives).
  std::vector<double> assigned_iou;
  // Per ground truth: argmax anchor, present only when that IoU is > 0.
  std::vector<std::optional<std::size_t>> gt_best_anchor;

  std::vector<std::size_t> positive_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i].kind == LabelKind::positive) out.push_back(i);
    }
    return out;
  }
};

struct AssignOptions {
  double pos_iou = 0.5;
  double neg_iou = 0.4;
  // Forces every ground truth's best anchor positive regardless of the
  // thresholds.
  bool low_quality_match = true;
  std::size_t threads = 1;
};

// Labels from a precomputed anchors x gts IoU matrix.
//
// Argmax ties between ground truths go to the lowest index. When several
// ground truths share a best anchor under low-quality matching, the lowest
// ground-truth index keeps it.
inline AssignmentResult assign_from_iou(const IouMatrix& ious, const AssignOptions& opt) {
  if (!(opt.neg_iou > 0.0 && opt.neg_iou <= opt.pos_iou && opt.pos_iou <= 1.0)) {
    throw InvalidArgument("assignment thresholds must satisfy 0 < neg <= pos <= 1");
  }
  const std::size_t n_anchor = ious.rows;
  const std::size_t n_gt = ious.cols;
  AssignmentResult r;
  r.labels.assign(n_anchor, {});
  r.max_iou.assign(n_anchor, 0.0);
  r.assigned_iou.assign(n_anchor, 0.0);
  r.gt_best_anchor.assign(n_gt, std::nullopt);
  if (n_gt == 0) return r;

  std::vector<double> gt_best_iou(n_gt, 0.0);
  for (std::size_t a = 0; a < n_anchor; ++a) {
    std::size_t arg = 0;
    double best = ious(a, 0);
    for (std::size_t g = 0; g < n_gt; ++g) {
      const double v = ious(a, g);
      if (v > best) {
        best = v;
        arg = g;
      }
      if (v > gt_best_iou[g]) {
        gt_best_iou[g] = v;
        r.gt_best_anchor[g] = a;
      }
    }
    r.max_iou[a] = best;
    if (best >= opt.pos_iou) {
      r.labels[a] = {LabelKind::positive, arg};
      r.assigned_iou[a] = best;
    } else if (best < opt.neg_iou) {
      r.labels[a] = {LabelKind::negative, 0};
    } else {
      r.labels[a] = {LabelKind::ignore, 0};
    }
  }

  if (opt.low_quality_match) {
    // Highest index first so that lower indices overwrite on conflicts.
    for (std::size_t g = n_gt; g-- > 0;) {
      if (!r.gt_best_anchor[g]) continue;
      const std::size_t a = *r.gt_best_anchor[g];
      r.labels[a] = {LabelKind::positive, g};
      r.assigned_iou[a] = ious(a, g);
    }
  }
  return r;
}

inline AssignmentResult max_iou_assign(std::span<const RotatedBox> anchors, std::span<const RotatedBox> gts,
                                       const AssignOptions& opt) {
  return assign_from_iou(pairwise_iou(anchors, gts, opt.threads), opt);
}

struct AssignmentStats {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t ignored = 0;
  // Fraction of ground truths with at least one positive anchor; 0 when
  // there are no ground truths.
  double gt_recall = 0.0;
  // Mean IoU of positives with their assigned ground truth; 0 without
  // positives.
  double mean_pos_iou = 0.0;
};

inline AssignmentStats assignment_stats(const AssignmentResult& result, std::size_t gt_count) {
  AssignmentStats s;
  std::vector<bool> covered(gt_count, false);
  double iou_sum = 0.0;
  for (std::size_t a = 0; a < result.labels.size(); ++a) {
    const AnchorLabel& l = result.labels[a];
    switch (l.kind) {
      case LabelKind::positive:
        ++s.positives;
        iou_sum += result.assigned_iou[a];
        if (l.gt < gt_count) covered[l.gt] = true;
        break;
      case LabelKind::negative:
        ++s.negatives;
        break;
      case LabelKind::ignore:
        ++s.ignored;
        break;
    }
  }
  if (gt_count > 0) {
    std::size_t hit = 0;
    for (bool c : covered) hit += c ? 1 : 0;
    s.gt_recall = static_cast<double>(hit) / static_cast<double>(gt_count);
  }
  if (s.positives > 0) s.mean_pos_iou = iou_sum / static_cast<double>(s.positives);
  return s;
}

inline AssignmentStats assignment_stats(const AssignmentResult& result, std::span<const RotatedBox> gts) {
  return assignment_stats(result, gts.size());
}

struct CascadeAssignment {
  // Boxes each stage assigned (anchors, then refined proposals).
  std::vector<std::vector<RotatedBox>> inputs;
  std::vector<AssignmentResult> results;
};

// Assigns every stage's input boxes from scratch under that stage's
// thresholds. stage_deltas[k] refines the inputs of stage k into those of
// stage k + 1, so it needs one entry fewer than there are stages.
inline CascadeAssignment cascade_assign(const std::vector<RotatedBox>& anchors,
                                        const std::vector<std::vector<BoxDelta>>& stage_deltas,
                                        std::span<const RotatedBox> gts, const CascadeConfig& config,
                                        bool low_quality_match = true, std::size_t threads = 1) {
  config.validate();
  if (stage_deltas.size() + 1 != config.stages.size()) {
    throw DimensionError("cascade with " + std::to_string(config.stages.size()) + " stages needs " +
                         std::to_string(config.stages.size() - 1) + " delta sets, got " +
                         std::to_string(stage_deltas.size()));
  }
  CascadeAssignment out;
  out.inputs = cascade_refine(anchors, stage_deltas).stages;
  for (std::size_t k = 0; k < config.stages.size(); ++k) {
    AssignOptions opt{config.stages[k].pos_iou, config.stages[k].neg_iou, low_quality_match, threads};
    out.results.push_back(max_iou_assign(out.inputs[k], gts, opt));
  }
  return out;
}

}  // namespace rotdet
