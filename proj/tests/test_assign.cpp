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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "oracles.hpp"
#include "rotdet/assign.hpp"

namespace rotdet {
namespace {

std::set<std::size_t> positives(const AssignmentResult& r) {
  const auto p = r.positive_indices();
  return {p.begin(), p.end()};
}

std::vector<RotatedBox> scene_anchors() { return generate_anchors({8, 32, 32, 32, 0}); }

TEST(Anchors, SingleCell) {
  const auto a = generate_anchors({8, 8, 1, 1, 0});
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0], (RotatedBox{4, 4, 8, 8, 0}));
}

TEST(Anchors, RowMajorCenters) {
  const auto a = generate_anchors({8, 16, 2, 2, 0});
  ASSERT_EQ(a.size(), 4u);
  EXPECT_EQ(a[0].center(), (Point{4, 4}));
  EXPECT_EQ(a[1].center(), (Point{12, 4}));
  EXPECT_EQ(a[2].center(), (Point{4, 12}));
  EXPECT_EQ(a[3].center(), (Point{12, 12}));
}

TEST(Anchors, CountAndAngle) {
  for (std::size_t w : {1u, 3u, 17u}) {
    for (std::size_t h : {1u, 5u, 9u}) {
      const auto a = generate_anchors({4, 10, w, h, 0.25});
      ASSERT_EQ(a.size(), w * h);
      for (const auto& b : a) ASSERT_EQ(b.theta, 0.25);
    }
  }
}

TEST(Anchors, InvalidGrid) {
  EXPECT_THROW(generate_anchors({0, 8, 1, 1, 0}), InvalidArgument);
  EXPECT_THROW(generate_anchors({8, -1, 1, 1, 0}), InvalidArgument);
  EXPECT_THROW(generate_anchors({8, 8, 0, 1, 0}), InvalidArgument);
}

TEST(Assign, IdenticalAnchorIsPositive) {
  const std::vector<RotatedBox> anchors{{10, 10, 8, 8, 0}, {100, 100, 8, 8, 0}};
  const std::vector<RotatedBox> gts{{10, 10, 8, 8, 0}};
  const auto r = max_iou_assign(anchors, gts, {0.5, 0.4, false, 1});
  EXPECT_EQ(r.labels[0], (AnchorLabel{LabelKind::positive, 0}));
  EXPECT_EQ(r.labels[1].kind, LabelKind::negative);
  EXPECT_EQ(r.max_iou[0], 1.0);
}

TEST(Assign, AllZeroIouIsAllNegative) {
  const auto anchors = generate_anchors({8, 8, 4, 4, 0});
  const std::vector<RotatedBox> gts{{500, 500, 10, 10, 0}};
  for (bool lq : {false, true}) {
    const auto r = max_iou_assign(anchors, gts, {0.5, 0.4, lq, 1});
    for (const auto& l : r.labels) ASSERT_EQ(l.kind, LabelKind::negative);
    EXPECT_FALSE(r.gt_best_anchor[0].has_value());
  }
}

TEST(Assign, EmptyGroundTruthIsAllNegative) {
  const auto anchors = generate_anchors({8, 8, 3, 3, 0});
  const auto r = max_iou_assign(anchors, {}, {});
  ASSERT_EQ(r.labels.size(), 9u);
  for (const auto& l : r.labels) EXPECT_EQ(l.kind, LabelKind::negative);
  EXPECT_EQ(assignment_stats(r, 0).gt_recall, 0.0);
}

TEST(Assign, IgnoreBandAt045) {
  // Two 10x10 squares offset by d have IoU (10 - d) / (10 + d).
  const double d = 5.5 / 1.45;
  const RotatedBox gt{0, 0, 10, 10, 0}, anchor{d, 0, 10, 10, 0};
  ASSERT_NEAR(oracle::raster_iou(anchor, gt).iou(), 0.45, 0.005);
  ASSERT_NEAR(rotated_iou(anchor, gt), 0.45, 1e-12);
  const std::vector<RotatedBox> anchors{anchor}, gts{gt};
  EXPECT_EQ(max_iou_assign(anchors, gts, {0.5, 0.4, false, 1}).labels[0].kind, LabelKind::ignore);
  EXPECT_EQ(max_iou_assign(anchors, gts, {0.4, 0.4, false, 1}).labels[0], (AnchorLabel{LabelKind::positive, 0}));
}

TEST(Assign, ArgmaxTieGoesToLowestGtIndex) {
  // Anchor centered between two equal ground truths.
  const std::vector<RotatedBox> anchors{{0, 0, 10, 10, 0}};
  const std::vector<RotatedBox> gts{{2, 0, 10, 10, 0}, {-2, 0, 10, 10, 0}};
  const auto r = max_iou_assign(anchors, gts, {0.5, 0.4, false, 1});
  ASSERT_EQ(rotated_iou(anchors[0], gts[0]), rotated_iou(anchors[0], gts[1]));
  EXPECT_EQ(r.labels[0], (AnchorLabel{LabelKind::positive, 0}));
}

TEST(Assign, SharedBestAnchorGoesToLowestGtIndex) {
  const std::vector<RotatedBox> anchors{{0, 0, 40, 40, 0}, {200, 200, 8, 8, 0}};
  const std::vector<RotatedBox> gts{{3, 0, 4, 4, 0}, {-3, 0, 4, 4, 0}};
  const auto r = max_iou_assign(anchors, gts, {0.5, 0.4, true, 1});
  EXPECT_EQ(r.labels[0], (AnchorLabel{LabelKind::positive, 0}));
  EXPECT_EQ(r.gt_best_anchor[1], std::optional<std::size_t>(0));
  EXPECT_EQ(assignment_stats(r, gts.size()).gt_recall, 0.5);
}

TEST(Assign, LowQualityForcesBestAnchor) {
  const std::vector<RotatedBox> anchors{{0, 0, 32, 32, 0}, {64, 0, 32, 32, 0}};
  const std::vector<RotatedBox> gts{{2, 0, 6, 4, 0.3}};
  const auto off = max_iou_assign(anchors, gts, {0.5, 0.4, false, 1});
  EXPECT_EQ(off.labels[0].kind, LabelKind::negative);
  EXPECT_EQ(assignment_stats(off, gts.size()).gt_recall, 0.0);
  const auto on = max_iou_assign(anchors, gts, {0.5, 0.4, true, 1});
  EXPECT_EQ(on.labels[0], (AnchorLabel{LabelKind::positive, 0}));
  EXPECT_EQ(on.labels[1].kind, LabelKind::negative);
  const auto s = assignment_stats(on, gts.size());
  EXPECT_EQ(s.gt_recall, 1.0);
  EXPECT_NEAR(s.mean_pos_iou, rotated_iou(anchors[0], gts[0]), 1e-15);
}

TEST(Assign, InvalidThresholds) {
  const std::vector<RotatedBox> a{{0, 0, 1, 1, 0}};
  EXPECT_THROW(max_iou_assign(a, a, {0.4, 0.5, true, 1}), InvalidArgument);
  EXPECT_THROW(max_iou_assign(a, a, {0.5, 0.0, true, 1}), InvalidArgument);
  EXPECT_THROW(max_iou_assign(a, a, {1.5, 0.4, true, 1}), InvalidArgument);
}

TEST(AssignStats, PerfectSingleAnchor) {
  const std::vector<RotatedBox> a{{5, 5, 10, 10, 0}};
  const auto s = assignment_stats(max_iou_assign(a, a, {}), a);
  EXPECT_EQ(s.positives, 1u);
  EXPECT_EQ(s.negatives, 0u);
  EXPECT_EQ(s.ignored, 0u);
  EXPECT_EQ(s.gt_recall, 1.0);
  EXPECT_EQ(s.mean_pos_iou, 1.0);
}

class RandomScenes : public ::testing::Test {
 protected:
  void SetUp() override {
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<std::size_t> n(1, 20);
    for (int i = 0; i < 100; ++i) scenes.push_back(oracle::random_scene(rng, n(rng), 256, 6, 120));
  }
  std::vector<std::vector<RotatedBox>> scenes;
  std::vector<RotatedBox> anchors = scene_anchors();
};

TEST_F(RandomScenes, PartitionAndBookkeeping) {
  for (const auto& gts : scenes) {
    const auto r = max_iou_assign(anchors, gts, {0.5, 0.4, true, 1});
    const auto s = assignment_stats(r, gts);
    ASSERT_EQ(s.positives + s.negatives + s.ignored, anchors.size());
    ASSERT_GE(s.gt_recall, 0.0);
    ASSERT_LE(s.gt_recall, 1.0);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      bool any = false;
      for (std::size_t a = 0; a < anchors.size(); ++a) any |= rotated_iou(anchors[a], gts[g]) > 0.0;
      ASSERT_EQ(r.gt_best_anchor[g].has_value(), any);
    }
  }
}

TEST_F(RandomScenes, ThresholdMonotonicity) {
  for (const auto& gts : scenes) {
    for (bool lq : {false, true}) {
      const auto lo = max_iou_assign(anchors, gts, {0.4, 0.4, lq, 1});
      const auto hi = max_iou_assign(anchors, gts, {0.5, 0.4, lq, 1});
      const auto plo = positives(lo), phi = positives(hi);
      ASSERT_TRUE(std::includes(plo.begin(), plo.end(), phi.begin(), phi.end()));
      ASSERT_GE(assignment_stats(lo, gts).gt_recall, assignment_stats(hi, gts).gt_recall);
      // Raising neg_thr never removes negatives.
      const auto n3 = max_iou_assign(anchors, gts, {0.5, 0.3, lq, 1});
      ASSERT_LE(assignment_stats(n3, gts).negatives, assignment_stats(hi, gts).negatives);
    }
  }
}

TEST_F(RandomScenes, DeterministicAcrossThreads) {
  for (const auto& gts : scenes) {
    const auto a = max_iou_assign(anchors, gts, {0.5, 0.4, true, 1});
    const auto b = max_iou_assign(anchors, gts, {0.5, 0.4, true, 5});
    ASSERT_EQ(a.labels, b.labels);
    ASSERT_EQ(a.max_iou, b.max_iou);
  }
}

// With distinct best anchors every ground truth keeps its forced positive.
TEST_F(RandomScenes, LowQualityGuarantee) {
  int checked = 0;
  for (const auto& gts : scenes) {
    const auto r = max_iou_assign(anchors, gts, {0.9, 0.4, true, 1});
    std::set<std::size_t> best;
    bool all = true;
    for (const auto& b : r.gt_best_anchor) {
      all &= b.has_value();
      if (b) best.insert(*b);
    }
    if (!all || best.size() != gts.size()) continue;
    ++checked;
    ASSERT_EQ(assignment_stats(r, gts).gt_recall, 1.0);
  }
  EXPECT_GT(checked, 30);
}

TEST(CascadeAssign, ReassignsEachStage) {
  const std::vector<RotatedBox> anchors{{0, 0, 32, 32, 0}, {100, 0, 32, 32, 0}};
  const std::vector<RotatedBox> gts{{6, 4, 30, 10, 0.6}};
  std::vector<BoxDelta> stage1{encode_delta(anchors[0], gts[0]), BoxDelta{}};
  const auto c = cascade_assign(anchors, {stage1}, gts, CascadeConfig{}, false);
  ASSERT_EQ(c.results.size(), 2u);
  ASSERT_EQ(c.inputs.size(), 2u);
  EXPECT_NE(c.results[0].labels[0].kind, LabelKind::positive);
  EXPECT_EQ(c.results[1].labels[0], (AnchorLabel{LabelKind::positive, 0}));
  EXPECT_EQ(c.results[1].labels[1].kind, LabelKind::negative);
  EXPECT_THROW(cascade_assign(anchors, {}, gts, CascadeConfig{}), DimensionError);
}

}  // namespace
}  // namespace rotdet
