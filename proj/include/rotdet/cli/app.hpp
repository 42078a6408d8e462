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

// The `rotdet` command line. Each subcommand is a thin composition of one
// module's operations. Flags are validated before any file is touched; errors
// are reported as a single line
//
//   rotdet: error: <kind>: <message>
//
// with exit status 2 for usage errors and 1 for everything else.

#pragma once

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rotdet/align.hpp"
#include "rotdet/assign.hpp"
#include "rotdet/augment.hpp"
#include "rotdet/eval.hpp"
#include "rotdet/io/formats.hpp"
#include "rotdet/nms.hpp"
#include "rotdet/parallel.hpp"
#include "rotdet/tiling.hpp"

namespace rotdet::cli {

namespace fs = std::filesystem;

struct CommonOptions {
  std::string config_path;
  std::string class_table_path;
  std::size_t threads = 0;
  bool skip_unknown = false;
};

// Flags that override fields of the pipeline config when given explicitly.
class Overrides {
 public:
  template <typename T>
  void add(CLI::App* app, const std::string& name, const std::string& help, std::function<void(io::PipelineConfig&, const T&)> apply) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app->add_option(name, *value, help);
    entries_.push_back({opt, [value, apply](io::PipelineConfig& c) { apply(c, *value); }});
  }

  void apply(io::PipelineConfig& c) const {
    for (const auto& e : entries_) {
      if (e.opt->count() > 0) e.fn(c);
    }
  }

 private:
  struct Entry {
    CLI::Option* opt;
    std::function<void(io::PipelineConfig&)> fn;
  };
  std::vector<Entry> entries_;
};

inline std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!s.empty() && s.back() == ' ') s.pop_back();
  return s;
}

class App {
 public:
  App(std::ostream& out, std::ostream& err) : out_(out), err_(err) { build(); }

  int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"rotdet"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app_.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
      out_ << app_.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out_ << app_.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      err_ << "rotdet: error: usage: " << one_line(e.what()) << "\n";
      return 2;
    }
    try {
      for (const auto& [sub, action] : actions_) {
        if (sub->parsed()) {
          action();
          return 0;
        }
      }
      err_ << "rotdet: error: usage: a subcommand is required (run with --help)\n";
      return 2;
    } catch (const InvalidArgument& e) {
      err_ << "rotdet: error: usage: " << one_line(e.what()) << "\n";
      return 2;
    } catch (const Error& e) {
      err_ << "rotdet: error: " << e.kind() << ": " << one_line(e.what()) << "\n";
      return 1;
    } catch (const std::exception& e) {
      err_ << "rotdet: error: internal: " << one_line(e.what()) << "\n";
      return 1;
    }
  }

 private:
  // ------------------------------------------------------------------------
  // Shared plumbing

  void add_common(CLI::App* sub, CommonOptions& common) {
    sub->add_option("--config", common.config_path, "Pipeline config (JSON); flags override its fields");
    sub->add_option("--class-table", common.class_table_path, "Class table file (default: 37-class FAIR1M table)");
    sub->add_option("--threads", common.threads, "Worker threads, 0 = all cores; output does not depend on it");
  }

  io::PipelineConfig load_config(const CommonOptions& common, const Overrides& ov) const {
    io::PipelineConfig c = common.config_path.empty() ? io::PipelineConfig{} : io::load_config(common.config_path);
    ov.apply(c);
    c.validate();
    return c;
  }

  static io::ClassTable load_table(const CommonOptions& common) {
    return common.class_table_path.empty() ? io::ClassTable::fair1m() : io::ClassTable::load(common.class_table_path);
  }

  // ------------------------------------------------------------------------
  // tile

  void add_tile() {
    auto* sub = app_.add_subcommand("tile", "Split annotations into overlapping patches");
    auto st = std::make_shared<TileArgs>();
    add_common(sub, st->common);
    sub->add_option("--ann", st->ann, "Annotation file or directory")->required();
    sub->add_option("--out", st->out, "Output directory for per-tile annotation files")->required();
    sub->add_flag("--skip-unknown", st->common.skip_unknown, "Drop objects of unknown categories");
    st->ov.add<int>(sub, "--patch", "Patch side in pixels", [](auto& c, const int& v) { c.patch = v; });
    st->ov.add<int>(sub, "--gap", "Overlap between patches in pixels", [](auto& c, const int& v) { c.gap = v; });
    st->ov.add<double>(sub, "--keep-visibility", "Minimum visible fraction of a cut box",
                       [](auto& c, const double& v) { c.keep_visibility = v; });
    actions_.push_back({sub, [this, st] { run_tile(*st); }});
  }

  struct TileArgs {
    CommonOptions common;
    Overrides ov;
    std::string ann;
    std::string out;
  };

  void run_tile(const TileArgs& a) {
    const auto cfg = load_config(a.common, a.ov);
    const auto table = load_table(a.common);
    const auto sets = io::load_annotations(a.ann, table, {a.common.skip_unknown});
    fs::create_directories(a.out);
    out_ << "# class-table " << table.version() << "\n";
    out_ << "# patch " << cfg.patch << " gap " << cfg.gap << " keep_visibility "
         << io::format_shortest(cfg.keep_visibility) << "\n";
    for (const auto& [id, set] : sets) {
      const int w = static_cast<int>(std::ceil(set.image_w));
      const int h = static_cast<int>(std::ceil(set.image_h));
      const TilePlan plan = plan_tiles(w, h, cfg.patch, cfg.gap);
      const auto tiles = clip_annotations(set, plan, cfg.keep_visibility, a.common.threads);
      std::vector<std::string> texts(tiles.size());
      parallel_for(tiles.size(), a.common.threads, [&](std::size_t t) {
        texts[t] = io::format_annotations(tile_annotation_set(tiles[t], id, cfg.patch), table);
      });
      for (std::size_t t = 0; t < tiles.size(); ++t) {
        const std::string name = tile_name(id, tiles[t].origin);
        io::write_text_atomic(fs::path(a.out) / (name + ".txt"), texts[t]);
        std::size_t truncated = 0;
        for (const auto& o : tiles[t].objects) truncated += o.truncated ? 1 : 0;
        out_ << name << " objects " << tiles[t].objects.size() << " truncated " << truncated << "\n";
      }
    }
  }

  // ------------------------------------------------------------------------
  // merge

  struct DetArgs {
    CommonOptions common;
    Overrides ov;
    std::string dets;
    std::string out;
  };

  void add_merge() {
    auto* sub = app_.add_subcommand("merge", "Map per-tile detections to image frames and run NMS");
    auto st = std::make_shared<DetArgs>();
    add_common(sub, st->common);
    sub->add_option("--dets", st->dets, "Directory of per-tile Task1_<category>.txt files")->required();
    sub->add_option("--out", st->out, "Output directory")->required();
    sub->add_flag("--skip-unknown", st->common.skip_unknown, "Ignore files of unknown categories");
    add_nms_flags(sub, st->ov);
    actions_.push_back({sub, [this, st] { run_merge(*st); }});
  }

  static void add_nms_flags(CLI::App* sub, Overrides& ov) {
    ov.add<double>(sub, "--iou", "NMS IoU threshold (suppress when IoU > thr)",
                   [](auto& c, const double& v) { c.nms_thr = v; });
    ov.add<std::string>(sub, "--mode", "class_aware or class_agnostic",
                        [](auto& c, const std::string& v) { c.nms_mode = parse_nms_mode(v); });
  }

  void run_merge(const DetArgs& a) {
    const auto cfg = load_config(a.common, a.ov);
    const auto table = load_table(a.common);
    const auto dets = io::parse_detections(a.dets, table, {a.common.skip_unknown});

    std::map<std::string, std::vector<TileDetections>> by_image;
    for (const auto& [name, list] : dets) {
      const auto ref = parse_tile_name(name);
      const std::string image = ref ? ref->image_id : name;
      by_image[image].push_back({ref ? ref->origin : TileOrigin{}, list});
    }
    std::vector<const std::string*> ids;
    std::vector<const std::vector<TileDetections>*> groups;
    for (auto& [id, tiles] : by_image) {
      std::sort(tiles.begin(), tiles.end(),
                [](const TileDetections& x, const TileDetections& y) { return x.origin < y.origin; });
      ids.push_back(&id);
      groups.push_back(&tiles);
    }
    std::vector<std::vector<Detection>> merged(groups.size());
    parallel_for(groups.size(), a.common.threads,
                 [&](std::size_t i) { merged[i] = merge_detections(*groups[i], cfg.nms_thr, cfg.nms_mode, 1); });
    io::DetectionsByImage result;
    std::size_t kept = 0, total = 0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      for (const auto& t : *groups[i]) total += t.detections.size();
      kept += merged[i].size();
      result[*ids[i]] = std::move(merged[i]);
    }
    io::write_detections(result, a.out, table);
    out_ << "merged " << total << " detections from " << dets.size() << " tiles into " << result.size()
         << " images; kept " << kept << " (" << to_string(cfg.nms_mode) << ", iou "
         << io::format_shortest(cfg.nms_thr) << ")\n";
  }

  // ------------------------------------------------------------------------
  // nms

  void add_nms() {
    auto* sub = app_.add_subcommand("nms", "Confidence filtering and rotated NMS per image");
    auto st = std::make_shared<DetArgs>();
    add_common(sub, st->common);
    sub->add_option("--dets", st->dets, "Directory of Task1_<category>.txt files")->required();
    sub->add_option("--out", st->out, "Output directory")->required();
    sub->add_flag("--skip-unknown", st->common.skip_unknown, "Ignore files of unknown categories");
    st->ov.add<double>(sub, "--conf", "Confidence threshold (keep score >= thr)",
                       [](auto& c, const double& v) { c.conf_thr = v; });
    add_nms_flags(sub, st->ov);
    actions_.push_back({sub, [this, st] { run_nms(*st); }});
  }

  void run_nms(const DetArgs& a) {
    const auto cfg = load_config(a.common, a.ov);
    const auto table = load_table(a.common);
    const auto dets = io::parse_detections(a.dets, table, {a.common.skip_unknown});
    std::vector<const std::vector<Detection>*> groups;
    for (const auto& [id, list] : dets) groups.push_back(&list);
    std::vector<std::vector<Detection>> kept(groups.size());
    parallel_for(groups.size(), a.common.threads, [&](std::size_t i) {
      const auto filtered = score_filter(*groups[i], cfg.conf_thr);
      kept[i] = select(filtered, rotated_nms(filtered, cfg.nms_thr, cfg.nms_mode, 1));
    });
    io::DetectionsByImage result;
    std::size_t n_in = 0, n_out = 0, i = 0;
    for (const auto& [id, list] : dets) {
      n_in += list.size();
      n_out += kept[i].size();
      result[id] = std::move(kept[i++]);
    }
    io::write_detections(result, a.out, table);
    out_ << "kept " << n_out << " of " << n_in << " detections (conf >= " << io::format_shortest(cfg.conf_thr)
         << ", " << to_string(cfg.nms_mode) << ", iou " << io::format_shortest(cfg.nms_thr) << ")\n";
  }

  // ------------------------------------------------------------------------
  // eval

  struct EvalArgs {
    CommonOptions common;
    Overrides ov;
    std::string dets;
    std::string gts;
    std::string json_out;
    std::string report_out;
  };

  void add_eval() {
    auto* sub = app_.add_subcommand("eval", "Per-class AP and mAP of rotated detections");
    auto st = std::make_shared<EvalArgs>();
    add_common(sub, st->common);
    sub->add_option("--dets", st->dets, "Directory of Task1_<category>.txt files")->required();
    sub->add_option("--gts", st->gts, "Annotation file or directory")->required();
    sub->add_option("--json", st->json_out, "Write the machine-readable report here");
    sub->add_option("--report", st->report_out, "Also write the text table here");
    sub->add_flag("--skip-unknown", st->common.skip_unknown, "Ignore unknown categories");
    st->ov.add<double>(sub, "--iou", "Match IoU threshold", [](auto& c, const double& v) { c.eval_iou = v; });
    st->ov.add<std::string>(sub, "--ap-mode", "all_point or eleven_point",
                            [](auto& c, const std::string& v) { c.ap_mode = parse_ap_mode(v); });
    st->ov.add<bool>(sub, "--ignore-difficult", "Drop difficult objects from scoring (true/false)",
                     [](auto& c, const bool& v) { c.ignore_difficult = v; });
    actions_.push_back({sub, [this, st] { run_eval(*st); }});
  }

  void run_eval(const EvalArgs& a) {
    const auto cfg = load_config(a.common, a.ov);
    const auto table = load_table(a.common);
    const auto gts = io::load_annotations(a.gts, table, {a.common.skip_unknown});
    const auto dets = io::parse_detections(a.dets, table, {a.common.skip_unknown});
    const EvalReport report =
        evaluate(dets, gts, table.names(), {cfg.eval_iou, cfg.ap_mode, cfg.ignore_difficult, a.common.threads});
    const std::string text = io::format_report(report, table);
    if (!a.json_out.empty()) io::write_text_atomic(a.json_out, io::to_json(report, table).dump(2) + "\n");
    if (!a.report_out.empty()) io::write_text_atomic(a.report_out, text);
    out_ << text;
  }

  // ------------------------------------------------------------------------
  // assign-stats

  struct AssignArgs {
    CommonOptions common;
    Overrides ov;
    std::string ann;
    std::vector<double> pos;
    std::vector<double> neg;
  };

  void add_assign_stats() {
    auto* sub = app_.add_subcommand("assign-stats", "Compare anchor assignment under several IoU thresholds");
    auto st = std::make_shared<AssignArgs>();
    add_common(sub, st->common);
    sub->add_option("--ann", st->ann, "Annotation file of one scene")->required();
    sub->add_option("--pos", st->pos, "Positive IoU thresholds, comma separated")->delimiter(',')->required();
    sub->add_option("--neg", st->neg, "Negative IoU thresholds, comma separated")->delimiter(',')->required();
    sub->add_flag("--skip-unknown", st->common.skip_unknown, "Drop objects of unknown categories");
    st->ov.add<double>(sub, "--stride", "Anchor stride", [](auto& c, const double& v) { c.anchor_stride = v; });
    st->ov.add<double>(sub, "--base-size", "Anchor side", [](auto& c, const double& v) { c.anchor_base_size = v; });
    st->ov.add<double>(sub, "--theta", "Anchor angle (radians)", [](auto& c, const double& v) { c.anchor_theta = v; });
    st->ov.add<bool>(sub, "--low-quality", "Force each object's best anchor positive (true/false)",
                     [](auto& c, const bool& v) { c.low_quality_match = v; });
    actions_.push_back({sub, [this, st] { run_assign_stats(*st); }});
  }

  void run_assign_stats(const AssignArgs& a) {
    const auto cfg = load_config(a.common, a.ov);
    if (a.pos.size() != a.neg.size()) throw InvalidArgument("--pos and --neg need the same number of values");
    for (std::size_t i = 0; i < a.pos.size(); ++i) {
      if (!(a.neg[i] > 0.0 && a.neg[i] <= a.pos[i] && a.pos[i] <= 1.0)) {
        throw InvalidArgument("thresholds must satisfy 0 < neg <= pos <= 1");
      }
    }
    const auto table = load_table(a.common);
    const auto set = io::parse_annotations(a.ann, table, {a.common.skip_unknown});
    AnchorGrid grid{cfg.anchor_stride, cfg.anchor_base_size,
                    static_cast<std::size_t>(std::max(1.0, std::ceil(set.image_w / cfg.anchor_stride))),
                    static_cast<std::size_t>(std::max(1.0, std::ceil(set.image_h / cfg.anchor_stride))),
                    cfg.anchor_theta};
    const auto anchors = generate_anchors(grid);
    const auto gts = set.boxes();
    const IouMatrix ious = pairwise_iou(anchors, gts, a.common.threads);
    out_ << "# scene " << set.image_id << " anchors " << anchors.size() << " objects " << gts.size() << " stride "
         << io::format_shortest(cfg.anchor_stride) << " base " << io::format_shortest(cfg.anchor_base_size)
         << " low_quality " << (cfg.low_quality_match ? "on" : "off") << "\n";
    out_ << "pos_thr  neg_thr  positives  negatives  ignored  gt_recall  mean_pos_iou\n";
    for (std::size_t i = 0; i < a.pos.size(); ++i) {
      const auto r = assign_from_iou(ious, {a.pos[i], a.neg[i], cfg.low_quality_match, 1});
      const auto s = assignment_stats(r, gts.size());
      char line[160];
      std::snprintf(line, sizeof line, "%-8s %-8s %9zu  %9zu  %7zu  %9s  %12s\n", io::format_fixed(a.pos[i], 2).c_str(),
                    io::format_fixed(a.neg[i], 2).c_str(), s.positives, s.negatives, s.ignored,
                    io::format_fixed(s.gt_recall, 4).c_str(), io::format_fixed(s.mean_pos_iou, 4).c_str());
      out_ << line;
    }
  }

  // ------------------------------------------------------------------------
  // balance-plan

  struct BalanceArgs {
    CommonOptions common;
    Overrides ov;
    std::string anns;
    std::string out;
  };

  void add_balance_plan() {
    auto* sub = app_.add_subcommand("balance-plan", "Class-balanced repeat factors for a training set");
    auto st = std::make_shared<BalanceArgs>();
    add_common(sub, st->common);
    sub->add_option("--anns", st->anns, "Annotation directory (or single file)")->required();
    sub->add_option("--out", st->out, "Repeat-factor file (image_id factor per line)")->required();
    sub->add_flag("--skip-unknown", st->common.skip_unknown, "Drop objects of unknown categories");
    st->ov.add<double>(sub, "--target", "Target ratio in (0, 1]", [](auto& c, const double& v) { c.balance_target = v; });
    actions_.push_back({sub, [this, st] { run_balance(*st); }});
  }

  void run_balance(const BalanceArgs& a) {
    const auto cfg = load_config(a.common, a.ov);
    const auto table = load_table(a.common);
    const auto sets_by_id = io::load_annotations(a.anns, table, {a.common.skip_unknown});
    std::vector<AnnotationSet> sets;
    for (const auto& [id, s] : sets_by_id) sets.push_back(s);
    const BalancePlan plan = balance_plan(sets, cfg.balance_target, table.size());

    std::string factors = "# class-table " + table.version() + "\n# target " +
                          io::format_shortest(plan.target_ratio) + "\n";
    for (std::size_t i = 0; i < plan.image_ids.size(); ++i) {
      factors += plan.image_ids[i] + " " + std::to_string(plan.repeat_factors[i]) + "\n";
    }
    io::write_text_atomic(a.out, factors);

    std::size_t width = 5;
    for (const auto& n : table.names()) width = std::max(width, n.size());
    out_ << "# class-table " << table.version() << "\n";
    out_ << "class" << std::string(width - 3, ' ') << "before  repeat   after\n";
    for (const auto& [cls, before] : plan.counts_before) {
      const std::string& name = table.name(cls);
      char cols[64];
      std::snprintf(cols, sizeof cols, "%6zu  %6d  %6zu", before, plan.class_repeat.at(cls), plan.counts_after.at(cls));
      out_ << name << std::string(width - name.size() + 2, ' ') << cols << "\n";
    }
    for (int c : plan.excluded_classes) out_ << "# warning: class " << table.name(c) << " has no instances; excluded\n";
    out_ << "min/max ratio " << io::format_fixed(plan.min_max_before, 4) << " -> " << io::format_fixed(plan.min_max_after, 4)
         << "\n";
    out_ << "images " << plan.image_ids.size() << " inflation " << io::format_fixed(plan.image_inflation, 4)
         << " (instances x" << io::format_fixed(plan.instance_inflation, 4) << ")"
         << (plan.fell_back ? " fallback: plan reset to 1" : "") << "\n";
  }

  // ------------------------------------------------------------------------
  // align-grid

  struct AlignArgs {
    CommonOptions common;
    std::vector<double> box;
    int k = 3;
    double stride = 8.0;
    std::vector<std::size_t> cell;
    std::string out;
  };

  void add_align_grid() {
    auto* sub = app_.add_subcommand("align-grid", "Dump the aligned-convolution sampling grid of a box as CSV");
    auto st = std::make_shared<AlignArgs>();
    sub->add_option("--box", st->box, "cx,cy,w,h,theta")->delimiter(',')->expected(5)->required();
    sub->add_option("--k", st->k, "Kernel side (odd)");
    sub->add_option("--stride", st->stride, "Feature stride in pixels");
    sub->add_option("--cell", st->cell, "Feature cell i,j")->delimiter(',')->expected(2)->required();
    sub->add_option("--out", st->out, "CSV file (default: stdout)");
    actions_.push_back({sub, [this, st] { run_align(*st); }});
  }

  void run_align(const AlignArgs& a) {
    if (a.k < 1 || a.k % 2 == 0) throw InvalidArgument("--k must be odd and >= 1");
    if (!(a.stride > 0.0)) throw InvalidArgument("--stride must be positive");
    const RotatedBox box = normalize(a.box[0], a.box[1], a.box[2], a.box[3], a.box[4]);
    const SamplingGrid g = align_sampling_grid(box, a.k, a.stride, {a.cell[0], a.cell[1]});
    std::string csv = "u,v,x,y,offset_x,offset_y\n";
    const int r = g.radius();
    for (int v = -r; v <= r; ++v) {
      for (int u = -r; u <= r; ++u) {
        const std::size_t i = g.index(u, v);
        csv += std::to_string(u) + "," + std::to_string(v) + "," + io::format_fixed(g.points[i].x) + "," +
               io::format_fixed(g.points[i].y) + "," + io::format_fixed(g.offsets[i].x) + "," +
               io::format_fixed(g.offsets[i].y) + "\n";
      }
    }
    if (a.out.empty()) {
      out_ << csv;
    } else {
      io::write_text_atomic(a.out, csv);
    }
  }

  // ------------------------------------------------------------------------
  // viz

  struct VizArgs {
    CommonOptions common;
    std::string ann;
    std::string dets;
    std::string out;
    double min_score = 0.0;
  };

  void add_viz() {
    auto* sub = app_.add_subcommand("viz", "Draw annotations and detections of one image as SVG");
    auto st = std::make_shared<VizArgs>();
    add_common(sub, st->common);
    sub->add_option("--ann", st->ann, "Annotation file")->required();
    sub->add_option("--dets", st->dets, "Detection directory (optional)");
    sub->add_option("--min-score", st->min_score, "Only draw detections with at least this score");
    sub->add_option("--out", st->out, "SVG file")->required();
    sub->add_flag("--skip-unknown", st->common.skip_unknown, "Drop objects of unknown categories");
    actions_.push_back({sub, [this, st] { run_viz(*st); }});
  }

  static std::string svg_polygon(const RotatedBox& b, const char* color, const std::string& label) {
    std::string pts;
    for (const Point& p : detail::box_corners(b)) pts += io::format_fixed(p.x, 2) + "," + io::format_fixed(p.y, 2) + " ";
    pts.pop_back();
    std::string s = "  <polygon points=\"" + pts + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
    if (!label.empty()) {
      s += "  <text x=\"" + io::format_fixed(b.cx, 2) + "\" y=\"" + io::format_fixed(b.cy, 2) +
           "\" font-size=\"10\" fill=\"" + color + "\" text-anchor=\"middle\">" + label + "</text>\n";
    }
    return s;
  }

  void run_viz(const VizArgs& a) {
    if (!(a.min_score >= 0.0 && a.min_score <= 1.0)) throw InvalidArgument("--min-score must be in [0, 1]");
    const auto table = load_table(a.common);
    const auto set = io::parse_annotations(a.ann, table, {a.common.skip_unknown});
    std::vector<Detection> dets;
    if (!a.dets.empty()) {
      const auto all = io::parse_detections(a.dets, table, {a.common.skip_unknown});
      if (auto it = all.find(set.image_id); it != all.end()) dets = score_filter(it->second, a.min_score);
    }
    const std::string w = io::format_shortest(set.image_w), h = io::format_shortest(set.image_h);
    std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + w + "\" height=\"" + h +
                      "\" viewBox=\"0 0 " + w + " " + h + "\">\n";
    svg += "  <rect x=\"0\" y=\"0\" width=\"" + w + "\" height=\"" + h + "\" fill=\"#f4f4f4\" stroke=\"#999\"/>\n";
    for (const Annotation& o : set.objects) {
      svg += svg_polygon(o.box, o.difficult ? "#d08800" : "#1a8f2e", table.name(o.class_id));
    }
    for (const Detection& d : dets) {
      svg += svg_polygon(d.box, "#c0262d", table.name(d.class_id) + " " + io::format_fixed(d.score, 2));
    }
    svg += "</svg>\n";
    io::write_text_atomic(a.out, svg);
    out_ << "wrote " << a.out << " (" << set.objects.size() << " objects, " << dets.size() << " detections)\n";
  }

  // ------------------------------------------------------------------------
  // config

  void add_config() {
    auto* sub = app_.add_subcommand("config", "Print the effective pipeline config in canonical form");
    auto st = std::make_shared<CommonOptions>();
    sub->add_option("--config", st->config_path, "Pipeline config (JSON)");
    actions_.push_back({sub, [this, st] { out_ << io::serialize(load_config(*st, Overrides{})); }});
  }

  void build() {
    app_.description("Oriented object detection toolkit: tiling, NMS, assignment, evaluation");
    app_.require_subcommand(0, 1);
    app_.set_help_all_flag("--help-all", "Help for every subcommand");
    add_tile();
    add_merge();
    add_nms();
    add_eval();
    add_assign_stats();
    add_balance_plan();
    add_align_grid();
    add_viz();
    add_config();
  }

  std::ostream& out_;
  std::ostream& err_;
  CLI::App app_{"rotdet"};
  std::vector<std::pair<CLI::App*, std::function<void()>>> actions_;
};

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  App app(out, err);
  return app.run(args);
}

}  // namespace rotdet::cli
