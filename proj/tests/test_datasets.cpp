// Copyright (c) 2026 The UBBR Authors. All Rights Reserved.
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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "ubbr/datasets.hpp"
#include "ubbr/errors.hpp"
#include "ubbr/log.hpp"

using namespace ubbr;

namespace {

std::vector<Scene> parse(const std::string& text, const AnnotationOptions& opts = {}) {
  std::istringstream is(text);
  return parse_annotations(is, opts);
}

struct CaptureWarnings {
  std::vector<std::string> seen;
  WarningSink previous;
  CaptureWarnings() {
    previous = set_warning_sink([this](const std::string& m) { seen.push_back(m); });
  }
  ~CaptureWarnings() { set_warning_sink(previous); }
};

}  // namespace

TEST_CASE("annotation bbox becomes a center-form ground truth") {
  const auto scenes = parse(R"({"images":[{"id":3,"width":100,"height":80}],
    "annotations":[{"id":1,"image_id":3,"bbox":[10,20,30,40],"category_id":7}],
    "categories":[{"id":7,"name":"thing"}]})");
  REQUIRE(scenes.size() == 1);
  const Scene& s = scenes[0];
  CHECK(s.id == 3);
  REQUIRE(s.gts.size() == 1);
  CHECK(s.gts[0] == Box{25, 40, 30, 40});
  CHECK(s.categories == std::vector<std::int64_t>{7});
  CHECK(s.has_features());
  CHECK(s.features.channels() == 3);
}

TEST_CASE("images without annotations are not usable for training") {
  const auto scenes = parse(R"({"images":[{"id":1,"width":10,"height":10}],"annotations":[]})");
  REQUIRE(scenes.size() == 1);
  CHECK_FALSE(scenes[0].usable_for_training());
}

TEST_CASE("malformed input fails closed") {
  CHECK_THROWS_AS(parse(R"({"images":[{"id":1,"width":10,)"), DataError);
  try {
    parse("{\n\"images\": [\n  oops\n]}");
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse(R"([1,2,3])"), DataError);
  CHECK_THROWS_AS(parse(R"({"images":[{"id":1,"width":0,"height":10}]})"), DataError);
  CHECK_THROWS_AS(load_annotations("/nonexistent/file.json"), DataError);
}

TEST_CASE("bad annotations are skipped with a warning") {
  CaptureWarnings w;
  const auto scenes = parse(R"({"images":[{"id":1,"width":100,"height":100}],
    "annotations":[{"image_id":9,"bbox":[0,0,5,5]},
                   {"image_id":1,"bbox":[0,0,0,5]},
                   {"image_id":1,"bbox":[400,0,5,5]},
                   {"image_id":1,"bbox":[1,1,5,5]}]})");
  CHECK(scenes[0].gts.size() == 1);
  CHECK(w.seen.size() == 3);
}

TEST_CASE("short-side rescaling") {
  AnnotationOptions opts;
  opts.short_side = 600;
  const auto scenes = parse(R"({"images":[{"id":1,"width":300,"height":200}],
    "annotations":[{"image_id":1,"bbox":[10,20,30,40]}]})", opts);
  CHECK(scenes[0].width == doctest::Approx(900));
  CHECK(scenes[0].height == doctest::Approx(600));
  CHECK(scenes[0].gts[0].x == doctest::Approx(75));
  CHECK(scenes[0].gts[0].h == doctest::Approx(120));
}

TEST_CASE("annotation round trip") {
  SynthConfig cfg;
  cfg.seed = 3;
  const auto scenes = synth_scenes(cfg, 5);
  std::stringstream ss;
  write_annotations(ss, scenes);
  const auto back = parse_annotations(ss);
  REQUIRE(back.size() == scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    CHECK(back[i].id == scenes[i].id);
    CHECK(back[i].width == scenes[i].width);
    REQUIRE(back[i].gts.size() == scenes[i].gts.size());
    for (std::size_t k = 0; k < scenes[i].gts.size(); ++k) {
      CHECK(back[i].gts[k].x == doctest::Approx(scenes[i].gts[k].x).epsilon(1e-12));
      CHECK(back[i].gts[k].w == doctest::Approx(scenes[i].gts[k].w).epsilon(1e-12));
    }
    // Features derive from the ground truths alone when noise is off.
    CHECK((back[i].features.data() - scenes[i].features.data()).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("filter_categories removes whole images") {
  std::vector<Scene> scenes(3);
  for (std::size_t i = 0; i < 3; ++i) {
    scenes[i].id = std::int64_t(i);
    scenes[i].gts = {Box{5, 5, 2, 2}, Box{8, 8, 2, 2}};
  }
  scenes[0].categories = {1, 2};
  scenes[1].categories = {2, 2};
  scenes[2].categories = {3, 1};
  CHECK(filter_categories(scenes, {}).size() == 3);
  const auto kept = filter_categories(scenes, {1});
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].id == 1);
  CHECK(kept[0].gts == scenes[1].gts);
  CHECK(filter_categories(scenes, {1, 2}).empty());
}

TEST_CASE("feature channels") {
  Rng rng(1);
  const std::vector<Box> one{{50, 30, 20, 16}};
  const FeatureMap fm = compute_feature_map(100, 60, one, FeatureParams{}, rng);
  CHECK(fm.channels() == 3);
  CHECK(fm.width() == 25);
  CHECK(fm.height() == 15);
  double occupied = 0;
  for (std::size_t y = 0; y < fm.height(); ++y)
    for (std::size_t x = 0; x < fm.width(); ++x) {
      const double px = (x + 0.5) * 4, py = (y + 0.5) * 4;
      const bool inside = px >= 40 && px < 60 && py >= 22 && py < 38;
      CHECK(fm.at(0, y, x) == (inside ? 1.0 : 0.0));
      occupied += fm.at(0, y, x);
      CHECK(fm.at(1, y, x) == doctest::Approx(std::clamp((px - 50) / 20, -2.0, 2.0)));
      CHECK(fm.at(2, y, x) == doctest::Approx(std::clamp((py - 30) / 16, -2.0, 2.0)));
      CHECK(std::abs(fm.at(1, y, x)) <= 2.0);
    }
  // Occupancy integrates to the box area within a row of cells.
  CHECK(std::abs(occupied * 16 - 20 * 16) <= 4 * 20 + 4 * 16);

  // Distance channels vanish at the cell holding the object's center.
  const std::vector<Box> centered{{42, 26, 12, 12}};
  const FeatureMap c = compute_feature_map(100, 60, centered, FeatureParams{}, rng);
  CHECK(c.at(1, 6, 10) == 0.0);
  CHECK(c.at(2, 6, 10) == 0.0);

  const FeatureMap empty = compute_feature_map(100, 60, {}, FeatureParams{}, rng);
  CHECK(empty.data().isZero());
}

TEST_CASE("synthetic scenes") {
  SynthConfig cfg;
  cfg.seed = 9;
  const auto a = synth_scenes(cfg, 20);
  const auto b = synth_scenes(cfg, 20);
  const auto prefix = synth_scenes(cfg, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gts == b[i].gts);
    CHECK(a[i].features.data() == b[i].features.data());
    CHECK(a[i].gts.size() >= cfg.min_objects);
    CHECK(a[i].gts.size() <= cfg.max_objects);
    for (std::size_t j = 0; j < a[i].gts.size(); ++j)
      for (std::size_t k = j + 1; k < a[i].gts.size(); ++k)
        CHECK(iou(a[i].gts[j], a[i].gts[k]) < cfg.max_pair_iou);
    if (i < prefix.size()) CHECK(prefix[i].gts == a[i].gts);
  }

  cfg.adjacent_pair = true;
  for (const Scene& s : synth_scenes(cfg, 10)) {
    REQUIRE(s.gts.size() == 2);
    CHECK(s.gts[0].xmax() == doctest::Approx(s.gts[1].xmin()));
  }

  cfg = {};
  cfg.features.noise_std = 0.1;
  const auto noisy = synth_scenes(cfg, 1);
  const FeatureMap clean = [&] {
    Rng rng(0);
    return compute_feature_map(cfg.image_width, cfg.image_height, noisy[0].gts, FeatureParams{}, rng);
  }();
  const double rms = std::sqrt((noisy[0].features.data() - clean.data()).squaredNorm() /
                               double(clean.data().size()));
  CHECK(rms == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("crowded settings fall back to fewer objects with a warning") {
  CaptureWarnings w;
  SynthConfig cfg;
  cfg.min_objects = 4;
  cfg.max_objects = 4;
  cfg.min_size = 0.6;
  cfg.max_size = 0.7;
  cfg.max_placement_attempts = 5;
  const auto scenes = synth_scenes(cfg, 3);
  for (const Scene& s : scenes) CHECK(s.gts.size() < 4);
  CHECK_FALSE(w.seen.empty());
}

TEST_CASE("scene cache round trip") {
  SynthConfig cfg;
  cfg.seed = 4;
  auto scenes = synth_scenes(cfg, 3);
  scenes[1].categories = std::vector<std::int64_t>(scenes[1].gts.size(), 5);
  const auto path = std::filesystem::temp_directory_path() / "ubbr_scene_cache_test.bin";
  save_scene_cache(path, scenes);
  const auto back = load_scene_cache(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].id == scenes[i].id);
    CHECK(back[i].gts == scenes[i].gts);
    CHECK(back[i].features.data() == scenes[i].features.data());
  }
  CHECK(back[1].categories == scenes[1].categories);

  std::istringstream bad("UBBRSCN9");
  CHECK_THROWS_AS(read_scene_cache(bad), DataError);
}
