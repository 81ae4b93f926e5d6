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

#pragma once

// Scenes: ground-truth boxes of one image plus the feature raster the
// regressor pools from. Scenes come from COCO-style annotation files or
// from the synthetic generator.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <vector>

#include "ubbr/box.hpp"
#include "ubbr/feature_map.hpp"
#include "ubbr/sampler.hpp"

namespace ubbr {

struct Scene {
  std::int64_t id = 0;
  double width = 0.0;
  double height = 0.0;
  std::vector<Box> gts;
  // Parallel to gts; empty when the source carries no labels. Training never
  // reads these.
  std::vector<std::int64_t> categories;
  FeatureMap features;  // empty until computed

  bool usable_for_training() const { return !gts.empty(); }
  bool has_features() const { return !features.empty(); }
};

/// How the stand-in feature raster is derived from ground truths.
struct FeatureParams {
  double stride = 4.0;       // image pixels per feature cell
  double noise_std = 0.0;    // additive zero-mean Gaussian noise
  double distance_clamp = 2.0;
};

/// Three channels: occupancy (1 where the cell center lies inside some
/// ground truth), then the x and y offsets from the nearest ground-truth
/// center to the cell center, divided by that object's width / height and
/// clamped to +-distance_clamp. Scenes without ground truths get all zeros.
FeatureMap compute_feature_map(double width, double height, std::span<const Box> gts,
                               const FeatureParams& params, Rng& rng);

/// Fills scene.features from its ground truths.
void attach_features(Scene& scene, const FeatureParams& params, Rng& rng);

struct SynthConfig {
  double image_width = 256.0;
  double image_height = 256.0;
  std::size_t min_objects = 1;
  std::size_t max_objects = 4;
  double min_size = 0.15;  // object side, fraction of the image side
  double max_size = 0.45;
  double max_pair_iou = 0.3;  // ground truths must overlap less than this
  // Two objects sharing a vertical edge, nothing else.
  bool adjacent_pair = false;
  std::size_t max_placement_attempts = 200;
  FeatureParams features;
  std::uint64_t seed = 0;

  void validate() const;
};

/// `count` scenes with ids 0..count-1. Scene i is drawn from its own stream
/// derived from (cfg.seed, i), so any prefix of the output is stable.
std::vector<Scene> synth_scenes(const SynthConfig& cfg, std::size_t count);

struct AnnotationOptions {
  // Rescale each image so its shorter side has this length; 0 keeps the
  // original coordinates.
  double short_side = 0.0;
  FeatureParams features;
  std::uint64_t seed = 0;  // feature noise stream
};

/// Reads a COCO-style annotation file (images / annotations / categories,
/// bbox = [x_top_left, y_top_left, width, height]). Scenes appear in the
/// order of the images array. Throws DataError on malformed input.
std::vector<Scene> load_annotations(const std::filesystem::path& path,
                                    const AnnotationOptions& opts = {});
std::vector<Scene> parse_annotations(std::istream& is, const AnnotationOptions& opts = {});

/// Writes scenes back out in the same COCO-style structure.
void write_annotations(std::ostream& os, std::span<const Scene> scenes);
void save_annotations(const std::filesystem::path& path, std::span<const Scene> scenes);

/// Drops every scene containing at least one annotation whose category is
/// in `excluded`; surviving scenes are returned unchanged.
std::vector<Scene> filter_categories(std::span<const Scene> scenes,
                                     const std::set<std::int64_t>& excluded);

// Scene cache: "UBBRSCN1", u64 scene count, then per scene: i64 id,
// f64 width, f64 height, u64 box count, per box f64 x, y, w, h and i64
// category (-1 when unlabeled), then u64 channels, height, width, f64
// stride and channel-major f64 feature values (channels = 0 when absent).
// All integers and floats are little-endian.
void write_scene_cache(std::ostream& os, std::span<const Scene> scenes);
std::vector<Scene> read_scene_cache(std::istream& is);
void save_scene_cache(const std::filesystem::path& path, std::span<const Scene> scenes);
std::vector<Scene> load_scene_cache(const std::filesystem::path& path);

}  // namespace ubbr
