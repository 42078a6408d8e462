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

// VOC-style evaluation of rotated detections: greedy score-ordered matching,
// precision/recall curves, per-class AP and mAP.

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
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

enum class ApMode { all_point, eleven_point };

inline std::string_view to_string(ApMode m) { return m == ApMode::all_point ? "all_point" : "eleven_point"; }

inline ApMode parse_ap_mode(std::string_view s) {
  if (s == "all_point") return ApMode::all_point;
  if (s == "eleven_point") return ApMode::eleven_point;
  throw InvalidArgument("unknown AP mode '" + std::string(s) + "'");
}

enum class MatchStatus { true_positive, false_positive, ignored };

struct DetectionMatch {
  std::size_t image = 0;  // position in the pooled image list
  std::size_t index = 0;  // position within that image's detections
  double score = 0.0;
  MatchStatus status = MatchStatus::false_positive;
  std::optional<std::size_t> gt;  // flattened ground-truth index for TPs
};

struct MatchResult {
  // Descending score; ties by (image, index).
  std::vector<DetectionMatch> detections;
  // Flattened over images in pooled order.
  std::vector<bool> gt_matched;
  // Ground truths that count towards recall.
  std::size_t gt_count = 0;

  std::size_t true_positives() const {
    return static_cast<std::size_t>(std::count_if(detections.begin(), detections.end(), [](const auto& d) {
      return d.status == MatchStatus::true_positive;
    }));
  }
};

struct MatchOptions {
  double iou_thr = 0.5;
  // Detections whose best match is a difficult ground truth are dropped from
  // scoring, and difficult ground truths leave the recall denominator.
  bool ignore_difficult = true;
};

// Matches detections against ground truth across several images at once.
// Each detection, in score order, takes the unmatched same-class ground
// truth of its image with the highest IoU, if that IoU reaches iou_thr.
inline MatchResult match_pooled(std::span<const std::span<const Detection>> dets,
                                std::span<const std::span<const Annotation>> gts, const MatchOptions& opt) {
  if (!(opt.iou_thr > 0.0 && opt.iou_thr <= 1.0)) throw InvalidArgument("match IoU threshold must be in (0, 1]");
  if (dets.size() != gts.size()) throw DimensionError("detections and ground truth cover different image counts");
  MatchResult r;
  std::vector<std::size_t> gt_offset(gts.size(), 0);
  std::vector<std::vector<PreparedBox>> prepared(gts.size());
  std::size_t flat = 0;
  for (std::size_t im = 0; im < gts.size(); ++im) {
    gt_offset[im] = flat;
    flat += gts[im].size();
    for (const Annotation& g : gts[im]) {
      prepared[im].emplace_back(g.box);
      if (!(opt.ignore_difficult && g.difficult)) ++r.gt_count;
    }
  }
  r.gt_matched.assign(flat, false);

  for (std::size_t im = 0; im < dets.size(); ++im) {
    for (std::size_t i = 0; i < dets[im].size(); ++i) {
      r.detections.push_back({im, i, dets[im][i].score, MatchStatus::false_positive, std::nullopt});
    }
  }
  std::stable_sort(r.detections.begin(), r.detections.end(),
                   [](const DetectionMatch& a, const DetectionMatch& b) { return a.score > b.score; });

  for (DetectionMatch& m : r.detections) {
    const Detection& d = dets[m.image][m.index];
    const PreparedBox pd(d.box);
    const auto& image_gts = gts[m.image];
    double best = -1.0;
    std::optional<std::size_t> arg;
    for (std::size_t g = 0; g < image_gts.size(); ++g) {
      if (image_gts[g].class_id != d.class_id || r.gt_matched[gt_offset[m.image] + g]) continue;
      const double v = rotated_iou(pd, prepared[m.image][g]);
      if (v > best) {
        best = v;
        arg = g;
      }
    }
    if (!arg || best < opt.iou_thr) continue;  // false positive
    if (opt.ignore_difficult && image_gts[*arg].difficult) {
      m.status = MatchStatus::ignored;
      continue;
    }
    m.status = MatchStatus::true_positive;
    m.gt = gt_offset[m.image] + *arg;
    r.gt_matched[*m.gt] = true;
  }
  return r;
}

inline MatchResult match_detections(std::span<const Detection> dets, std::span<const Annotation> gts,
                                    const MatchOptions& opt = {}) {
  const std::span<const Detection> d[1] = {dets};
  const std::span<const Annotation> g[1] = {gts};
  return match_pooled(d, g, opt);
}

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;

  friend bool operator==(const PrPoint&, const PrPoint&) = default;
};

// Cumulative precision / recall after each scored (non-ignored) detection.
// With gt_count == 0 every recall is 0.
inline std::vector<PrPoint> pr_curve(const MatchResult& match, std::size_t gt_count) {
  std::vector<PrPoint> curve;
  std::size_t tp = 0, fp = 0;
  for (const DetectionMatch& m : match.detections) {
    if (m.status == MatchStatus::ignored) continue;
    (m.status == MatchStatus::true_positive ? tp : fp)++;
    const double recall = gt_count == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(gt_count);
    curve.push_back({recall, static_cast<double>(tp) / static_cast<double>(tp + fp)});
  }
  return curve;
}

inline double average_precision(std::span<const PrPoint> curve, ApMode mode) {
  if (curve.empty()) return 0.0;
  if (mode == ApMode::eleven_point) {
    double sum = 0.0;
    for (int k = 0; k <= 10; ++k) {
      const double t = k / 10.0;
      double p = 0.0;
      for (const PrPoint& pt : curve) {
        if (pt.recall >= t) p = std::max(p, pt.precision);
      }
      sum += p;
    }
    return sum / 11.0;
  }
  // Area under the monotone precision envelope, sentinel-padded.
  std::vector<double> rec{0.0}, prec{0.0};
  for (const PrPoint& pt : curve) {
    rec.push_back(pt.recall);
    prec.push_back(pt.precision);
  }
  rec.push_back(1.0);
  prec.push_back(0.0);
  for (std::size_t i = prec.size() - 1; i-- > 0;) prec[i] = std::max(prec[i], prec[i + 1]);
  double ap = 0.0;
  for (std::size_t i = 1; i < rec.size(); ++i) {
    if (rec[i] != rec[i - 1]) ap += (rec[i] - rec[i - 1]) * prec[i];
  }
  return std::clamp(ap, 0.0, 1.0);
}

struct ClassReport {
  int class_id = 0;
  std::string name;
  double ap = 0.0;
  std::vector<PrPoint> curve;
  std::size_t gt_count = 0;
  std::size_t det_count = 0;
  // Detections present but no ground truth: AP is reported as 0 and the
  // class stays out of the mAP.
  bool no_ground_truth = false;
};

struct EvalReport {
  std::vector<ClassReport> classes;  // class-table order
  double map = 0.0;
  std::size_t classes_in_map = 0;
  ApMode mode = ApMode::all_point;
  double iou_thr = 0.5;
};

struct EvalOptions {
  double iou_thr = 0.5;
  ApMode mode = ApMode::all_point;
  bool ignore_difficult = true;
  std::size_t threads = 1;
};

// Pools every image per class, then match -> curve -> AP. Image ids present
// only on the detection side are evaluated as images without objects.
inline EvalReport evaluate(const std::map<std::string, std::vector<Detection>>& dets_by_image,
                           const std::map<std::string, AnnotationSet>& gts_by_image,
                           std::span<const std::string> class_names, const EvalOptions& opt = {}) {
  const int num_classes = static_cast<int>(class_names.size());
  for (const auto& [image, dets] : dets_by_image) {
    for (const Detection& d : dets) {
      if (d.class_id < 0 || d.class_id >= num_classes) {
        throw ClassTableError("detection in image '" + image + "' has class id " + std::to_string(d.class_id) +
                              " outside the " + std::to_string(num_classes) + "-class table");
      }
    }
  }
  std::vector<std::string> images;
  for (const auto& [id, s] : gts_by_image) images.push_back(id);
  for (const auto& [id, d] : dets_by_image) {
    if (!gts_by_image.contains(id)) images.push_back(id);
  }
  std::sort(images.begin(), images.end());

  EvalReport report;
  report.mode = opt.mode;
  report.iou_thr = opt.iou_thr;
  report.classes.resize(class_names.size());
  const MatchOptions mopt{opt.iou_thr, opt.ignore_difficult};
  parallel_for(class_names.size(), opt.threads, [&](std::size_t c) {
    const int cls = static_cast<int>(c);
    std::vector<std::vector<Detection>> dets(images.size());
    std::vector<std::vector<Annotation>> gts(images.size());
    for (std::size_t im = 0; im < images.size(); ++im) {
      if (auto it = dets_by_image.find(images[im]); it != dets_by_image.end()) {
        for (const Detection& d : it->second) {
          if (d.class_id == cls) dets[im].push_back(d);
        }
      }
      if (auto it = gts_by_image.find(images[im]); it != gts_by_image.end()) {
        for (const Annotation& g : it->second.objects) {
          if (g.class_id == cls) gts[im].push_back(g);
        }
      }
    }
    std::vector<std::span<const Detection>> dspan(dets.begin(), dets.end());
    std::vector<std::span<const Annotation>> gspan(gts.begin(), gts.end());
    const MatchResult match = match_pooled(dspan, gspan, mopt);

    ClassReport& cr = report.classes[c];
    cr.class_id = cls;
    cr.name = class_names[c];
    cr.gt_count = match.gt_count;
    cr.det_count = match.detections.size();
    cr.curve = pr_curve(match, match.gt_count);
    cr.no_ground_truth = match.gt_count == 0 && cr.det_count > 0;
    cr.ap = match.gt_count == 0 ? 0.0 : average_precision(cr.curve, opt.mode);
  });

  double sum = 0.0;
  for (const ClassReport& cr : report.classes) {
    if (cr.gt_count == 0) continue;
    sum += cr.ap;
    ++report.classes_in_map;
  }
  report.map = report.classes_in_map == 0 ? 0.0 : sum / static_cast<double>(report.classes_in_map);
  return report;
}

}  // namespace rotdet
