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

// Text interchange formats.
//
// Annotation file, one object per line:
//
//   x1 y1 x2 y2 x3 y3 x4 y4 <category> <difficulty>
//
// difficulty is 0 (normal), 1 (difficult) or 2 (truncated by tiling). Blank
// lines and lines starting with '#' are skipped, except "# size <w> <h>"
// which records the image size. Single-token "key:value" header lines
// (imagesource:, gsd:) are skipped as well.
//
// Detection files, one per class, named Task1_<category>.txt:
//
//   <image_id> <score> x1 y1 x2 y2 x3 y3 x4 y4
//
// Coordinates and scores are written with 6 decimals.

#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rotdet/annotation.hpp"
#include "rotdet/codec.hpp"
#include "rotdet/errors.hpp"
#include "rotdet/eval.hpp"
#include "rotdet/geometry.hpp"
#include "rotdet/nms.hpp"
#include "rotdet/tiling.hpp"

namespace rotdet::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Number formatting

inline std::string format_fixed(double v, int decimals = 6) {
  std::array<char, 64> buf;
  auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, decimals);
  std::string s(buf.data(), r.ptr);
  if (s.starts_with('-') && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

inline std::string format_shortest(double v) {
  std::array<char, 64> buf;
  auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), r.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc{} || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t j = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > j) out.push_back(line.substr(j, i - j));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Atomic output

// Collects output in a temporary sibling file and renames it over the target
// on commit(). Destroying an uncommitted file removes the temporary, so a
// failed or interrupted run never leaves a partial target behind.
class AtomicFile {
 public:
  explicit AtomicFile(fs::path target) : target_(std::move(target)) {
    static std::atomic<std::uint64_t> counter{0};
    std::random_device rd;
    tmp_ = target_;
    tmp_ += ".tmp-" + std::to_string(rd()) + "-" + std::to_string(counter++);
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw IoError("cannot open '" + tmp_.string() + "' for writing");
  }
  AtomicFile(const AtomicFile&) = delete;
  AtomicFile& operator=(const AtomicFile&) = delete;
  ~AtomicFile() {
    if (committed_) return;
    out_.close();
    std::error_code ec;
    fs::remove(tmp_, ec);
  }

  std::ostream& stream() { return out_; }

  void commit() {
    out_.flush();
    if (!out_) throw IoError("write to '" + tmp_.string() + "' failed");
    out_.close();
    std::error_code ec;
    fs::rename(tmp_, target_, ec);
    if (ec) throw IoError("cannot rename '" + tmp_.string() + "' to '" + target_.string() + "': " + ec.message());
    committed_ = true;
  }

 private:
  fs::path target_;
  fs::path tmp_;
  std::ofstream out_;
  bool committed_ = false;
};

inline void write_text_atomic(const fs::path& path, std::string_view text) {
  AtomicFile f(path);
  f.stream() << text;
  f.commit();
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Class table

// Ordered category names. Indices are stable; the version string changes
// whenever the names or their order change.
class ClassTable {
 public:
  ClassTable(std::string label, std::vector<std::string> names) : label_(std::move(label)), names_(std::move(names)) {
    if (names_.empty()) throw ClassTableError("class table '" + label_ + "' is empty");
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const std::string& n = names_[i];
      if (n.empty() || std::any_of(n.begin(), n.end(), [](unsigned char c) { return std::isspace(c); })) {
        throw ClassTableError("class name '" + n + "' must be a single non-empty token");
      }
      if (!index_.emplace(n, static_cast<int>(i)).second) throw ClassTableError("duplicate class name '" + n + "'");
    }
  }

  // The 37 fine-grained categories, in the order they are usually listed.
  static ClassTable fair1m() {
    return ClassTable("fair1m", {"Boeing737",       "Boeing777",       "Boeing747",      "Boeing787",
                                 "A320",            "A220",            "A330",           "A350",
                                 "C919",            "ARJ21",           "other-airplane", "Passenger_Ship",
                                 "Motorboat",       "Fishing_Boat",    "Tugboat",        "Engineering_Ship",
                                 "Liquid_Cargo_Ship", "Dry_Cargo_Ship", "Warship",       "other-ship",
                                 "Small_Car",       "Bus",             "Cargo_Truck",    "Dump_Truck",
                                 "Van",             "Trailer",         "Tractor",        "Truck_Tractor",
                                 "Excavator",       "other-vehicle",   "Baseball_Field", "Basketball_Court",
                                 "Football_Field",  "Tennis_Court",    "Roundabout",     "Intersection",
                                 "Bridge"});
  }

  // One name per line; '#' comments and blank lines ignored.
  static ClassTable parse(std::string_view text, std::string label) {
    std::vector<std::string> names;
    std::size_t line_no = 0;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
      ++line_no;
      const auto tok = split_ws(line);
      if (tok.empty() || tok[0].starts_with('#')) continue;
      if (tok.size() != 1) throw ParseError(label, line_no, "class names must be single tokens");
      names.emplace_back(tok[0]);
    }
    return ClassTable(std::move(label), std::move(names));
  }

  static ClassTable load(const fs::path& path) { return parse(read_text(path), path.stem().string()); }

  std::optional<int> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int size() const { return static_cast<int>(names_.size()); }
  const std::string& name(int id) const {
    if (id < 0 || id >= size()) throw ClassTableError("class id " + std::to_string(id) + " not in table");
    return names_[static_cast<std::size_t>(id)];
  }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& label() const { return label_; }

  // "<label>/<count>/<fnv1a-64 of the newline-joined names>"
  std::string version() const {
    std::uint64_t h = 1469598103934665603ull;
    for (const std::string& n : names_) {
      for (unsigned char c : n) h = (h ^ c) * 1099511628211ull;
      h = (h ^ '\n') * 1099511628211ull;
    }
    std::array<char, 17> hex{};
    auto r = std::to_chars(hex.data(), hex.data() + 16, h, 16);
    std::string hs(hex.data(), r.ptr);
    return label_ + "/" + std::to_string(names_.size()) + "/" + std::string(16 - hs.size(), '0') + hs;
  }

 private:
  std::string label_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

// ---------------------------------------------------------------------------
// Pipeline configuration

struct PipelineConfig {
  int patch = kDefaultPatch;
  int gap = kDefaultGap;
  double keep_visibility = kDefaultKeepVisibility;
  CascadeConfig cascade;
  double anchor_stride = 8.0;
  double anchor_base_size = 32.0;
  double anchor_theta = 0.0;
  bool low_quality_match = true;
  double conf_thr = 0.05;
  double nms_thr = 0.1;
  NmsMode nms_mode = NmsMode::class_aware;
  double eval_iou = 0.5;
  ApMode ap_mode = ApMode::all_point;
  bool ignore_difficult = true;
  std::vector<double> scales{1.0};
  double balance_target = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (gap < 0 || patch <= gap) throw InvalidArgument("config: patch > gap >= 0 required");
    if (!(keep_visibility > 0.0 && keep_visibility <= 1.0)) throw InvalidArgument("config: keep_visibility in (0, 1]");
    cascade.validate();
    if (!(anchor_stride > 0.0) || !(anchor_base_size > 0.0)) throw InvalidArgument("config: anchor sizes must be positive");
    if (!std::isfinite(anchor_theta)) throw InvalidArgument("config: anchor_theta must be finite");
    if (!(conf_thr >= 0.0 && conf_thr <= 1.0)) throw InvalidArgument("config: conf_thr in [0, 1]");
    if (!(nms_thr >= 0.0 && nms_thr <= 1.0)) throw InvalidArgument("config: nms_thr in [0, 1]");
    if (!(eval_iou > 0.0 && eval_iou <= 1.0)) throw InvalidArgument("config: eval_iou in (0, 1]");
    if (scales.empty()) throw InvalidArgument("config: scales must not be empty");
    for (double s : scales) {
      if (!(s > 0.0) || !std::isfinite(s)) throw InvalidArgument("config: scales must be positive");
    }
    if (!(balance_target > 0.0 && balance_target <= 1.0)) throw InvalidArgument("config: balance_target in (0, 1]");
  }

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.cascade.stages) stages.push_back({{"pos_iou", s.pos_iou}, {"neg_iou", s.neg_iou}});
  return {
      {"patch", c.patch},
      {"gap", c.gap},
      {"keep_visibility", c.keep_visibility},
      {"cascade", stages},
      {"anchor_stride", c.anchor_stride},
      {"anchor_base_size", c.anchor_base_size},
      {"anchor_theta", c.anchor_theta},
      {"low_quality_match", c.low_quality_match},
      {"conf_thr", c.conf_thr},
      {"nms_thr", c.nms_thr},
      {"nms_mode", std::string(to_string(c.nms_mode))},
      {"eval_iou", c.eval_iou},
      {"ap_mode", std::string(to_string(c.ap_mode))},
      {"ignore_difficult", c.ignore_difficult},
      {"scales", c.scales},
      {"balance_target", c.balance_target},
      {"seed", c.seed},
  };
}

// Canonical text: sorted keys, two-space indent, shortest round-trip
// numbers, trailing newline.
inline std::string serialize(const PipelineConfig& c) { return to_json(c).dump(2) + "\n"; }

// Missing keys keep their defaults; unknown keys are rejected.
inline PipelineConfig parse_config(std::string_view text, const std::string& source = "config") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 0, e.what());
  }
  if (!j.is_object()) throw ParseError(source, 0, "config must be a JSON object");
  PipelineConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "patch") c.patch = v.get<int>();
      else if (key == "gap") c.gap = v.get<int>();
      else if (key == "keep_visibility") c.keep_visibility = v.get<double>();
      else if (key == "cascade") {
        c.cascade.stages.clear();
        for (const auto& s : v) {
          for (const auto& [sk, sv] : s.items()) {
            if (sk != "pos_iou" && sk != "neg_iou") throw ParseError(source, 0, "unknown cascade key '" + sk + "'");
          }
          c.cascade.stages.push_back({s.at("pos_iou").get<double>(), s.at("neg_iou").get<double>()});
        }
      } else if (key == "anchor_stride") c.anchor_stride = v.get<double>();
      else if (key == "anchor_base_size") c.anchor_base_size = v.get<double>();
      else if (key == "anchor_theta") c.anchor_theta = v.get<double>();
      else if (key == "low_quality_match") c.low_quality_match = v.get<bool>();
      else if (key == "conf_thr") c.conf_thr = v.get<double>();
      else if (key == "nms_thr") c.nms_thr = v.get<double>();
      else if (key == "nms_mode") c.nms_mode = parse_nms_mode(v.get<std::string>());
      else if (key == "eval_iou") c.eval_iou = v.get<double>();
      else if (key == "ap_mode") c.ap_mode = parse_ap_mode(v.get<std::string>());
      else if (key == "ignore_difficult") c.ignore_difficult = v.get<bool>();
      else if (key == "scales") c.scales = v.get<std::vector<double>>();
      else if (key == "balance_target") c.balance_target = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw ParseError(source, 0, "unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(source, 0, e.what());
  }
  c.validate();
  return c;
}

inline PipelineConfig load_config(const fs::path& path) { return parse_config(read_text(path), path.string()); }

// ---------------------------------------------------------------------------
// Annotations

struct ParseOptions {
  // Drop objects of unknown categories instead of rejecting the file.
  bool skip_unknown = false;
};

inline std::array<Point, 4> parse_quad(const std::vector<std::string_view>& tok, std::size_t first,
                                       const std::string& source, std::size_t line_no) {
  std::array<Point, 4> q;
  for (std::size_t k = 0; k < 8; ++k) {
    const auto v = parse_double(tok[first + k]);
    if (!v) throw ParseError(source, line_no, "bad coordinate '" + std::string(tok[first + k]) + "'");
    (k % 2 == 0 ? q[k / 2].x : q[k / 2].y) = *v;
  }
  return q;
}

// Least-squares rectangle through four corners in boundary order, if every
// corner lies within `tol` of it. Rounded rectangles decode without the
// slight growth an enclosing refit would add.
inline std::optional<RotatedBox> fit_rectangle(const Quad& quad, double tol) {
  const auto& p = quad.vertices();
  const Point c{(p[0].x + p[1].x + p[2].x + p[3].x) / 4, (p[0].y + p[1].y + p[2].y + p[3].y) / 4};
  const Point a = (p[1] - p[0]) + (p[2] - p[3]);
  const Point b = (p[3] - p[0]) + (p[2] - p[1]);
  Point dir = a + Point{b.y, -b.x};
  const double len = std::hypot(dir.x, dir.y);
  if (!(len > 0.0)) return std::nullopt;
  const Point u{dir.x / len, dir.y / len};
  const Point v{-u.y, u.x};
  double w = 0.0, h = 0.0;
  std::array<double, 4> du, dv;
  for (std::size_t i = 0; i < 4; ++i) {
    du[i] = dot(p[i] - c, u);
    dv[i] = dot(p[i] - c, v);
    w += std::abs(du[i]);
    h += std::abs(dv[i]);
  }
  w /= 2;
  h /= 2;
  if (!(w > 2 * tol) || !(h > 2 * tol)) return std::nullopt;
  unsigned seen = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (std::abs(std::abs(du[i]) - w / 2) > tol || std::abs(std::abs(dv[i]) - h / 2) > tol) return std::nullopt;
    seen |= 1u << ((du[i] > 0 ? 1 : 0) + (dv[i] > 0 ? 2 : 0));
  }
  if (seen != 0xF) return std::nullopt;
  return normalize(c.x, c.y, w, h, std::atan2(u.y, u.x));
}

// Six-decimal rectangles decode by least squares; anything else is refit to
// its minimum-area rectangle.
inline RotatedBox decode_quad(const std::array<Point, 4>& pts) {
  const Quad quad(pts);
  if (auto r = fit_rectangle(quad, 4e-6)) return *r;
  return quad_to_obb(quad);
}

// Without a "# size" line the image size is the ceiling of the largest corner
// coordinate.
inline AnnotationSet parse_annotations_text(std::string_view text, const std::string& source, std::string image_id,
                                            const ClassTable& table, const ParseOptions& opt = {}) {
  AnnotationSet set{std::move(image_id), 0.0, 0.0, {}};
  std::optional<std::pair<double, double>> size;
  double max_x = 0.0, max_y = 0.0;
  std::vector<std::string> unknown;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty()) continue;
    if (tok[0].starts_with('#')) {
      if (tok.size() == 4 && tok[0] == "#" && tok[1] == "size") {
        const auto w = parse_double(tok[2]);
        const auto h = parse_double(tok[3]);
        if (!w || !h || *w <= 0 || *h <= 0) throw ParseError(source, line_no, "bad size header");
        size = {*w, *h};
      }
      continue;
    }
    if (tok.size() == 1 && tok[0].find(':') != std::string_view::npos) continue;
    if (tok.size() != 10) {
      throw ParseError(source, line_no, "expected 8 coordinates, a category and a difficulty, got " +
                                            std::to_string(tok.size()) + " fields");
    }
    const auto quad = parse_quad(tok, 0, source, line_no);
    const auto diff = parse_int(tok[9]);
    if (!diff || *diff < 0 || *diff > 2) {
      throw ParseError(source, line_no, "difficulty must be 0, 1 or 2, got '" + std::string(tok[9]) + "'");
    }
    const auto cls = table.find(tok[8]);
    if (!cls) {
      unknown.push_back(std::string(tok[8]) + "@" + std::to_string(line_no));
      continue;
    }
    RotatedBox box;
    try {
      box = decode_quad(quad);
    } catch (const GeometryError& e) {
      throw ParseError(source, line_no, e.what());
    }
    for (const Point& p : quad) {
      max_x = std::max(max_x, p.x);
      max_y = std::max(max_y, p.y);
    }
    set.objects.push_back({box, *cls, *diff == 1, *diff == 2});
  }
  if (!unknown.empty() && !opt.skip_unknown) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ",") + u;
    throw ClassTableError(source + ": unknown categories " + list);
  }
  if (size) {
    set.image_w = size->first;
    set.image_h = size->second;
  } else {
    set.image_w = std::max(1.0, std::ceil(max_x));
    set.image_h = std::max(1.0, std::ceil(max_y));
  }
  return set;
}

inline AnnotationSet parse_annotations(const fs::path& path, const ClassTable& table, const ParseOptions& opt = {}) {
  return parse_annotations_text(read_text(path), path.string(), path.stem().string(), table, opt);
}

inline void append_quad(std::string& out, const RotatedBox& box) {
  const auto q = detail::box_corners(box);
  for (const Point& p : q) {
    out += ' ';
    out += format_fixed(p.x);
    out += ' ';
    out += format_fixed(p.y);
  }
}

inline std::string format_annotations(const AnnotationSet& set, const ClassTable& table) {
  std::string out = "# size " + format_shortest(set.image_w) + " " + format_shortest(set.image_h) + "\n";
  out += "# class-table " + table.version() + "\n";
  for (const Annotation& o : set.objects) {
    std::string line;
    append_quad(line, o.box);
    out += line.substr(1);
    out += ' ' + table.name(o.class_id) + ' ' + (o.difficult ? "1" : o.truncated ? "2" : "0") + "\n";
  }
  return out;
}

inline void write_annotations(const AnnotationSet& set, const fs::path& path, const ClassTable& table) {
  write_text_atomic(path, format_annotations(set, table));
}

// A single file, or every *.txt file of a directory (sorted by name).
inline std::vector<fs::path> list_inputs(const fs::path& path, std::string_view ext = ".txt") {
  if (!fs::exists(path)) throw IoError("input '" + path.string() + "' does not exist");
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.is_regular_file() && e.path().extension() == ext) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline std::map<std::string, AnnotationSet> load_annotations(const fs::path& path, const ClassTable& table,
                                                             const ParseOptions& opt = {}) {
  std::map<std::string, AnnotationSet> out;
  for (const fs::path& p : list_inputs(path)) {
    AnnotationSet s = parse_annotations(p, table, opt);
    const std::string id = s.image_id;
    if (!out.emplace(id, std::move(s)).second) throw IoError("duplicate image id '" + id + "'");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Detections

using DetectionsByImage = std::map<std::string, std::vector<Detection>>;

inline std::string detection_file_name(const ClassTable& table, int class_id) {
  return "Task1_" + table.name(class_id) + ".txt";
}

inline std::string format_detection_file(const DetectionsByImage& dets, int class_id) {
  std::string out;
  for (const auto& [image, list] : dets) {
    for (const Detection& d : list) {
      if (d.class_id != class_id) continue;
      out += image;
      out += ' ';
      out += format_fixed(d.score);
      append_quad(out, d.box);
      out += '\n';
    }
  }
  return out;
}

// Writes one file per class of the table, empty ones included.
inline void write_detections(const DetectionsByImage& dets, const fs::path& dir, const ClassTable& table) {
  for (const auto& [image, list] : dets) {
    if (image.empty() || std::any_of(image.begin(), image.end(), [](unsigned char c) { return std::isspace(c); })) {
      throw InvalidArgument("image id '" + image + "' must be a single non-empty token");
    }
    for (const Detection& d : list) {
      if (d.class_id < 0 || d.class_id >= table.size()) {
        throw ClassTableError("detection class id " + std::to_string(d.class_id) + " not in table");
      }
      if (!(d.score >= 0.0 && d.score <= 1.0)) throw InvalidArgument("detection score outside [0, 1]");
    }
  }
  fs::create_directories(dir);
  for (int c = 0; c < table.size(); ++c) {
    write_text_atomic(dir / detection_file_name(table, c), format_detection_file(dets, c));
  }
}

inline void parse_detection_text(std::string_view text, const std::string& source, int class_id,
                                 DetectionsByImage& out) {
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].starts_with('#')) continue;
    if (tok.size() != 10) {
      throw ParseError(source, line_no, "expected image id, score and 8 coordinates, got " +
                                            std::to_string(tok.size()) + " fields");
    }
    const auto score = parse_double(tok[1]);
    if (!score) throw ParseError(source, line_no, "bad score '" + std::string(tok[1]) + "'");
    if (*score < 0.0 || *score > 1.0) {
      throw ParseError(source, line_no, "score " + std::string(tok[1]) + " outside [0, 1]");
    }
    const auto quad = parse_quad(tok, 2, source, line_no);
    RotatedBox box;
    try {
      box = decode_quad(quad);
    } catch (const GeometryError& e) {
      throw ParseError(source, line_no, e.what());
    }
    out[std::string(tok[0])].push_back({box, class_id, *score});
  }
}

// Reads every Task1_<category>.txt in `dir`, in class-table order. Within an
// image, detections come grouped by class in file order.
inline DetectionsByImage parse_detections(const fs::path& dir, const ClassTable& table,
                                          const ParseOptions& opt = {}) {
  if (!fs::is_directory(dir)) throw IoError("detection directory '" + dir.string() + "' does not exist");
  std::map<int, fs::path> files;
  std::vector<std::string> unknown;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_regular_file() || !name.starts_with("Task1_") || e.path().extension() != ".txt") continue;
    const std::string cat = name.substr(6, name.size() - 6 - 4);
    if (const auto cls = table.find(cat)) {
      files[*cls] = e.path();
    } else {
      unknown.push_back(cat);
    }
  }
  if (!unknown.empty() && !opt.skip_unknown) {
    std::sort(unknown.begin(), unknown.end());
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ",") + u;
    throw ClassTableError(dir.string() + ": detection files for unknown categories " + list);
  }
  DetectionsByImage out;
  for (const auto& [cls, path] : files) parse_detection_text(read_text(path), path.string(), cls, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation report

inline nlohmann::json to_json(const EvalReport& r, const ClassTable& table) {
  nlohmann::json classes = nlohmann::json::array();
  for (const ClassReport& c : r.classes) {
    nlohmann::json curve = nlohmann::json::array();
    for (const PrPoint& p : c.curve) curve.push_back({p.recall, p.precision});
    classes.push_back({{"class", c.name},
                       {"ap", c.ap},
                       {"gt_count", c.gt_count},
                       {"det_count", c.det_count},
                       {"no_ground_truth", c.no_ground_truth},
                       {"pr_curve", curve}});
  }
  return {{"class_table", table.version()},
          {"mode", std::string(to_string(r.mode))},
          {"iou_thr", r.iou_thr},
          {"map", r.map},
          {"classes_in_map", r.classes_in_map},
          {"classes", classes}};
}

// Two-column table in percent, one row per class, then the mean.
inline std::string format_report(const EvalReport& r, const ClassTable& table) {
  std::string out = "# class-table " + table.version() + "\n";
  out += "# mode " + std::string(to_string(r.mode)) + " iou " + format_fixed(r.iou_thr, 2) + "\n";
  std::size_t width = 5;
  for (const ClassReport& c : r.classes) width = std::max(width, c.name.size());
  auto row = [&](const std::string& name, const std::string& value, const std::string& note) {
    out += name + std::string(width - name.size() + 2, ' ') + value + note + "\n";
  };
  for (const ClassReport& c : r.classes) {
    std::string note;
    if (c.gt_count == 0) note = c.no_ground_truth ? "  (no ground truth; excluded)" : "  (empty; excluded)";
    row(c.name, format_fixed(100.0 * c.ap, 4), note);
  }
  row("mAP", format_fixed(100.0 * r.map, 4), "");
  out += "mAP " + format_fixed(100.0 * r.map, 2) + " (" + std::string(to_string(r.mode)) + " @ IoU " +
         format_fixed(r.iou_thr, 2) + ", " + std::to_string(r.classes_in_map) + " classes)\n";
  return out;
}

}  // namespace rotdet::io
