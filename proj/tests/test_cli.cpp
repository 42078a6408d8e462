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

#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rotdet/cli/app.hpp"
#include "tempdir.hpp"

namespace rotdet {
namespace {

namespace fs = std::filesystem;
using testing::slurp;
using testing::TempDir;
using testing::write_file;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

void expect_single_error_line(const Result& r) {
  EXPECT_NE(r.code, 0);
  EXPECT_TRUE(r.err.starts_with("rotdet: error: ")) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1) << r.err;
}

const io::ClassTable kTable = io::ClassTable::fair1m();

// Three objects on an 800 x 800 image, coordinates on the 6-decimal grid.
const char* kScene =
    "# size 800 800\n"
    "100 100 140 100 140 120 100 120 Boeing737 0\n"
    "400 380 430 410 410 430 380 400 Small_Car 1\n"
    "700 650 760 650 760 680 700 680 Bus 0\n";

TEST(Cli, TileOnPatchSizedImageIsIdentity) {
  TempDir dir;
  write_file(dir / "ann/scene.txt", kScene);
  const Result r = run({"tile", "--ann", (dir / "ann").string(), "--out", (dir / "tiles").string(), "--patch", "800",
                        "--gap", "150"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "tiles")) files.push_back(e.path());
  ASSERT_EQ(files.size(), 1u);
  EXPECT_EQ(files[0].filename(), "scene__0__0.txt");
  const AnnotationSet before = io::parse_annotations_text(kScene, "scene", "scene", kTable);
  const AnnotationSet after = io::parse_annotations(files[0], kTable);
  ASSERT_EQ(after.objects.size(), before.objects.size());
  for (std::size_t i = 0; i < before.objects.size(); ++i) {
    EXPECT_EQ(after.objects[i].box, before.objects[i].box);
    EXPECT_EQ(after.objects[i].class_id, before.objects[i].class_id);
    EXPECT_EQ(after.objects[i].difficult, before.objects[i].difficult);
    EXPECT_FALSE(after.objects[i].truncated);
  }
  EXPECT_NE(r.out.find("scene__0__0 objects 3 truncated 0"), std::string::npos);
}

TEST(Cli, TileLargeImage) {
  TempDir dir;
  write_file(dir / "big.txt", "# size 2100 1000\n1290 500 1320 500 1320 520 1290 520 Bus 0\n");
  const Result r = run({"tile", "--ann", (dir / "big.txt").string(), "--out", (dir / "tiles").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir / "tiles")) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  EXPECT_EQ(names, (std::vector<std::string>{"big__0__0.txt", "big__0__200.txt", "big__1300__0.txt",
                                             "big__1300__200.txt", "big__650__0.txt", "big__650__200.txt"}));
  // Whole inside the 650 column; the 1300 column sees 2/3 of it, below 0.7.
  EXPECT_EQ(io::parse_annotations(dir / "tiles/big__650__0.txt", kTable).objects.size(), 1u);
  EXPECT_TRUE(io::parse_annotations(dir / "tiles/big__1300__0.txt", kTable).objects.empty());
  const auto cut = io::parse_annotations(dir / "tiles/big__650__200.txt", kTable);
  ASSERT_EQ(cut.objects.size(), 1u);
  EXPECT_EQ(cut.objects[0].box, (RotatedBox{655, 310, 30, 20, 0}));
}

TEST(Cli, TileOutputIndependentOfThreads) {
  TempDir dir;
  std::string text = "# size 3000 2000\n";
  for (int i = 0; i < 60; ++i) {
    const int x = 37 * i % 2900, y = 53 * i % 1900;
    text += std::to_string(x) + " " + std::to_string(y) + " " + std::to_string(x + 60) + " " + std::to_string(y) +
            " " + std::to_string(x + 60) + " " + std::to_string(y + 25) + " " + std::to_string(x) + " " +
            std::to_string(y + 25) + " Van 0\n";
  }
  write_file(dir / "a.txt", text);
  std::vector<std::vector<std::pair<std::string, std::string>>> snaps;
  for (const char* t : {"1", "3", "8"}) {
    const fs::path out = dir / (std::string("t") + t);
    ASSERT_EQ(run({"tile", "--ann", (dir / "a.txt").string(), "--out", out.string(), "--threads", t}).code, 0);
    snaps.push_back(testing::snapshot(out));
  }
  EXPECT_EQ(snaps[0], snaps[1]);
  EXPECT_EQ(snaps[0], snaps[2]);
}

TEST(Cli, EvalOfGroundTruthAsDetections) {
  TempDir dir;
  write_file(dir / "gts/scene.txt", kScene);
  write_file(dir / "gts/other.txt", "# size 500 500\n10 10 50 10 50 30 10 30 Tugboat 0\n");
  io::DetectionsByImage dets;
  for (const auto& [id, s] : io::load_annotations(dir / "gts", kTable)) {
    for (const Annotation& a : s.objects) dets[id].push_back({a.box, a.class_id, 0.9});
  }
  io::write_detections(dets, dir / "dets", kTable);
  const Result r = run({"eval", "--dets", (dir / "dets").string(), "--gts", (dir / "gts").string(), "--json",
                        (dir / "report.json").string(), "--ignore-difficult", "false"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mAP 100.00"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_EQ(j["map"], 1.0);
  EXPECT_EQ(j["classes_in_map"], 4);
  EXPECT_EQ(j["class_table"], kTable.version());
}

TEST(Cli, AssignStatsRecallMonotone) {
  TempDir dir;
  write_file(dir / "scene.txt", kScene);
  const Result r = run({"assign-stats", "--ann", (dir / "scene.txt").string(), "--pos", "0.4,0.5", "--neg", "0.4,0.4",
                        "--low-quality", "false"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::vector<double> recall;
  std::vector<std::size_t> positives;
  for (std::string line; std::getline(in, line);) {
    if (line.starts_with('#') || line.starts_with("pos_thr")) continue;
    std::istringstream ls(line);
    double pos, neg, rec, mean;
    std::size_t p, n, ign;
    ASSERT_TRUE(ls >> pos >> neg >> p >> n >> ign >> rec >> mean) << line;
    recall.push_back(rec);
    positives.push_back(p);
  }
  ASSERT_EQ(recall.size(), 2u);
  EXPECT_GE(recall[0], recall[1]);
  EXPECT_GE(positives[0], positives[1]);
}

TEST(Cli, NmsAndMerge) {
  TempDir dir;
  const RotatedBox b{60, 60, 40, 20, 0.3};
  io::DetectionsByImage tiles;
  tiles["img__650__0"] = {{b, 0, 0.9}, {b, 0, 0.7}, {{300, 300, 30, 10, 0}, 0, 0.01}};
  tiles["img__0__0"] = {{{b.cx + 650, b.cy, b.w, b.h, b.theta}, 0, 0.8}};
  io::write_detections(tiles, dir / "raw", kTable);

  const Result m = run({"merge", "--dets", (dir / "raw").string(), "--out", (dir / "merged").string(), "--iou", "0.5"});
  ASSERT_EQ(m.code, 0) << m.err;
  const auto merged = io::parse_detections(dir / "merged", kTable);
  ASSERT_EQ(merged.size(), 1u);
  const auto& list = merged.at("img");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_NEAR(list[0].score, 0.9, 1e-12);
  EXPECT_NEAR(list[0].box.cx, 710, 1e-6);
  EXPECT_NEAR(list[0].box.cy, 60, 1e-6);

  const Result n = run({"nms", "--dets", (dir / "merged").string(), "--out", (dir / "final").string(), "--conf", "0.05"});
  ASSERT_EQ(n.code, 0) << n.err;
  EXPECT_EQ(io::parse_detections(dir / "final", kTable).at("img").size(), 1u);
  EXPECT_NE(n.out.find("kept 1 of 2"), std::string::npos) << n.out;
  EXPECT_FALSE(testing::has_temp_leftovers(dir.path()));
}

TEST(Cli, BalancePlan) {
  TempDir dir;
  std::string many;
  for (int i = 0; i < 9; ++i) many += "0 0 4 0 4 2 0 2 Bus 0\n";
  for (int i = 0; i < 9; ++i) write_file(dir / ("anns/b" + std::to_string(i) + ".txt"), "# size 10 10\n" + many);
  std::string tug;
  for (int i = 0; i < 9; ++i) tug += "0 0 4 0 4 2 0 2 Tugboat 0\n";
  write_file(dir / "anns/rare.txt", "# size 10 10\n" + tug);
  const Result r = run({"balance-plan", "--anns", (dir / "anns").string(), "--out", (dir / "plan.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string plan = slurp(dir / "plan.txt");
  EXPECT_NE(plan.find("\nb0 1\n"), std::string::npos) << plan;
  EXPECT_NE(plan.find("\nrare 3\n"), std::string::npos) << plan;
  EXPECT_NE(r.out.find("min/max ratio 0.1111 -> 0.3333"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("no instances; excluded"), std::string::npos);
}

TEST(Cli, AlignGridCsv) {
  const Result r = run({"align-grid", "--box", "20,28,24,24,0", "--k", "3", "--stride", "8", "--cell", "2,3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "u,v,x,y,offset_x,offset_y");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_TRUE(line.ends_with(",0.000000,0.000000")) << line;
  }
  EXPECT_EQ(rows, 9);
  expect_single_error_line(run({"align-grid", "--box", "0,0,4,4,0", "--k", "4", "--cell", "0,0"}));
  expect_single_error_line(run({"align-grid", "--box", "0,0,4,4", "--cell", "0,0"}));
}

TEST(Cli, VizWritesSvg) {
  TempDir dir;
  write_file(dir / "scene.txt", kScene);
  io::DetectionsByImage dets{{"scene", {{{120, 110, 40, 20, 0}, 0, 0.8}, {{700, 700, 10, 10, 0}, 21, 0.1}}}};
  io::write_detections(dets, dir / "dets", kTable);
  const Result r = run({"viz", "--ann", (dir / "scene.txt").string(), "--dets", (dir / "dets").string(), "--min-score",
                        "0.5", "--out", (dir / "scene.svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string svg = slurp(dir / "scene.svg");
  EXPECT_TRUE(svg.starts_with("<svg "));
  EXPECT_TRUE(svg.ends_with("</svg>\n"));
  std::size_t polys = 0;
  for (std::size_t p = svg.find("<polygon"); p != std::string::npos; p = svg.find("<polygon", p + 1)) ++polys;
  EXPECT_EQ(polys, 4u);
  EXPECT_NE(r.out.find("3 objects, 1 detections"), std::string::npos);
}

TEST(Cli, ConfigIsCanonical) {
  TempDir dir;
  const Result d = run({"config"});
  ASSERT_EQ(d.code, 0);
  EXPECT_EQ(d.out, io::serialize(io::PipelineConfig{}));
  write_file(dir / "c.json", R"({"nms_thr": 0.3, "patch": 1024, "gap": 200})");
  const Result c = run({"config", "--config", (dir / "c.json").string()});
  ASSERT_EQ(c.code, 0) << c.err;
  write_file(dir / "canon.json", c.out);
  EXPECT_EQ(run({"config", "--config", (dir / "canon.json").string()}).out, c.out);
  EXPECT_NE(c.out.find("\"patch\": 1024"), std::string::npos);
}

TEST(Cli, FlagsOverrideConfig) {
  TempDir dir;
  write_file(dir / "scene.txt", kScene);
  write_file(dir / "c.json", R"({"patch": 400, "gap": 100})");
  const Result r = run({"tile", "--ann", (dir / "scene.txt").string(), "--out", (dir / "t").string(), "--config",
                        (dir / "c.json").string(), "--patch", "800"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("# patch 800 gap 100"), std::string::npos) << r.out;
}

TEST(Cli, UsageErrors) {
  const Result none = run({});
  EXPECT_EQ(none.code, 2);
  expect_single_error_line(none);
  const Result unknown = run({"tile", "--ann", "x", "--out", "y", "--bogus"});
  EXPECT_EQ(unknown.code, 2);
  expect_single_error_line(unknown);
  expect_single_error_line(run({"frobnicate"}));
  const Result missing = run({"eval", "--dets", "x"});
  EXPECT_EQ(missing.code, 2);
  expect_single_error_line(missing);
  EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, ConfigValidatedBeforeAnyIo) {
  TempDir dir;
  write_file(dir / "scene.txt", kScene);
  const Result r = run({"tile", "--ann", (dir / "scene.txt").string(), "--out", (dir / "tiles").string(), "--patch",
                        "100", "--gap", "150"});
  EXPECT_EQ(r.code, 2);
  expect_single_error_line(r);
  EXPECT_FALSE(fs::exists(dir / "tiles"));
  const Result bad_mode =
      run({"nms", "--dets", (dir / "nope").string(), "--out", (dir / "o").string(), "--mode", "soft"});
  EXPECT_EQ(bad_mode.code, 2);
  EXPECT_FALSE(fs::exists(dir / "o"));
}

TEST(Cli, InputErrorsAreSingleLineAndLeaveNoPartialOutput) {
  TempDir dir;
  const Result missing = run({"eval", "--dets", (dir / "nope").string(), "--gts", (dir / "nope").string()});
  EXPECT_EQ(missing.code, 1);
  expect_single_error_line(missing);
  EXPECT_NE(missing.err.find("io:"), std::string::npos) << missing.err;

  write_file(dir / "bad/a.txt", "# size 10 10\n0 0 4 0 4 2 0 2 Bus 0\n");
  write_file(dir / "bad/b.txt", "0 0 4 0 4 2 0 Bus 0\n");
  const Result parse = run({"tile", "--ann", (dir / "bad").string(), "--out", (dir / "tiles").string()});
  EXPECT_EQ(parse.code, 1);
  expect_single_error_line(parse);
  EXPECT_NE(parse.err.find("b.txt:1"), std::string::npos) << parse.err;
  EXPECT_TRUE(!fs::exists(dir / "tiles") || fs::is_empty(dir / "tiles"));

  write_file(dir / "unk.txt", "0 0 4 0 4 2 0 2 Zeppelin 0\n");
  const Result unk = run({"viz", "--ann", (dir / "unk.txt").string(), "--out", (dir / "u.svg").string()});
  EXPECT_EQ(unk.code, 1);
  expect_single_error_line(unk);
  EXPECT_FALSE(fs::exists(dir / "u.svg"));
  EXPECT_EQ(run({"viz", "--ann", (dir / "unk.txt").string(), "--out", (dir / "u.svg").string(), "--skip-unknown"}).code,
            0);
  EXPECT_FALSE(testing::has_temp_leftovers(dir.path()));
}

TEST(Cli, CustomClassTable) {
  TempDir dir;
  write_file(dir / "classes.txt", "ferry\ntug\n");
  write_file(dir / "gts/s.txt", "# size 100 100\n0 0 40 0 40 20 0 20 tug 0\n");
  io::write_detections({{"s", {{{20, 10, 40, 20, 0}, 1, 0.5}}}}, dir / "dets",
                       io::ClassTable::load(dir / "classes.txt"));
  const Result r = run({"eval", "--dets", (dir / "dets").string(), "--gts", (dir / "gts").string(), "--class-table",
                        (dir / "classes.txt").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("mAP 100.00 (all_point @ IoU 0.50, 1 classes)"), std::string::npos) << r.out;
}

}  // namespace
}  // namespace rotdet
