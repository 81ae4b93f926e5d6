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

#include "ubbr/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <string>

#include <json.hpp>

#include "ubbr/errors.hpp"
#include "ubbr/io.hpp"
#include "ubbr/log.hpp"

namespace ubbr {
namespace {

constexpr const char* kSceneMagic = "UBBRSCN1";

Rng stream_for(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

double uniform(double lo, double hi, Rng& rng) {
  if (!(hi > lo)) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

FeatureMap compute_feature_map(double width, double height, std::span<const Box> gts,
                               const FeatureParams& params, Rng& rng) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw PreconditionError("compute_feature_map: image dimensions must be positive");
  }
  const auto cols = static_cast<std::size_t>(std::max(1.0, std::ceil(width / params.stride)));
  const auto rows = static_cast<std::size_t>(std::max(1.0, std::ceil(height / params.stride)));
  FeatureMap fm(3, rows, cols, params.stride);
  const double clamp = params.distance_clamp;

  for (std::size_t y = 0; y < rows; ++y) {
    const double py = (double(y) + 0.5) * params.stride;
    for (std::size_t x = 0; x < cols; ++x) {
      const double px = (double(x) + 0.5) * params.stride;
      if (gts.empty()) continue;
      bool inside = false;
      std::size_t nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < gts.size(); ++k) {
        const Box& g = gts[k];
        inside = inside || (px >= g.xmin() && px < g.xmax() && py >= g.ymin() && py < g.ymax());
        const double d2 = (px - g.x) * (px - g.x) + (py - g.y) * (py - g.y);
        if (d2 < best) {
          best = d2;
          nearest = k;
        }
      }
      const Box& g = gts[nearest];
      fm.at(0, y, x) = inside ? 1.0 : 0.0;
      fm.at(1, y, x) = std::clamp((px - g.x) / g.w, -clamp, clamp);
      fm.at(2, y, x) = std::clamp((py - g.y) / g.h, -clamp, clamp);
    }
  }
  if (params.noise_std > 0.0) {
    std::normal_distribution<double> noise(0.0, params.noise_std);
    for (Eigen::Index i = 0; i < fm.data().size(); ++i) fm.data()[i] += noise(rng);
  }
  return fm;
}

void attach_features(Scene& scene, const FeatureParams& params, Rng& rng) {
  scene.features = compute_feature_map(scene.width, scene.height, scene.gts, params, rng);
}

void SynthConfig::validate() const {
  if (!(image_width > 0.0) || !(image_height > 0.0)) {
    throw PreconditionError("SynthConfig: image size must be positive");
  }
  if (min_objects < 1 || max_objects < min_objects) {
    throw PreconditionError("SynthConfig: need 1 <= min_objects <= max_objects");
  }
  if (!(min_size > 0.0) || !(max_size >= min_size) || max_size > 1.0) {
    throw PreconditionError("SynthConfig: need 0 < min_size <= max_size <= 1");
  }
  if (!(max_pair_iou > 0.0)) throw PreconditionError("SynthConfig: max_pair_iou must be > 0");
  if (max_placement_attempts < 1) {
    throw PreconditionError("SynthConfig: max_placement_attempts must be >= 1");
  }
  if (!(features.stride > 0.0) || !(features.noise_std >= 0.0)) {
    throw PreconditionError("SynthConfig: bad feature parameters");
  }
}

namespace {

std::vector<Box> place_objects(const SynthConfig& cfg, std::size_t count, Rng& rng,
                               bool& ok) {
  const double W = cfg.image_width;
  const double H = cfg.image_height;
  std::vector<Box> placed;
  for (std::size_t k = 0; k < count; ++k) {
    bool done = false;
    for (std::size_t attempt = 0; attempt < cfg.max_placement_attempts && !done; ++attempt) {
      const double w = uniform(cfg.min_size, cfg.max_size, rng) * W;
      const double h = uniform(cfg.min_size, cfg.max_size, rng) * H;
      const Box b{uniform(0.5 * w, W - 0.5 * w, rng), uniform(0.5 * h, H - 0.5 * h, rng), w, h};
      const bool separated = std::all_of(placed.begin(), placed.end(), [&](const Box& p) {
        return iou(p, b) < cfg.max_pair_iou;
      });
      if (separated) {
        placed.push_back(b);
        done = true;
      }
    }
    if (!done) {
      ok = false;
      return placed;
    }
  }
  ok = true;
  return placed;
}

std::vector<Box> place_adjacent_pair(const SynthConfig& cfg, Rng& rng) {
  const double W = cfg.image_width;
  const double H = cfg.image_height;
  const double max_w = std::min(cfg.max_size, 0.5) * W;
  const double w1 = uniform(cfg.min_size * W, max_w, rng);
  const double w2 = uniform(cfg.min_size * W, max_w, rng);
  const double h1 = uniform(cfg.min_size, cfg.max_size, rng) * H;
  const double h2 = uniform(cfg.min_size, cfg.max_size, rng) * H;
  const double left = uniform(0.0, W - w1 - w2, rng);
  const double cy = uniform(0.5 * std::max(h1, h2), H - 0.5 * std::max(h1, h2), rng);
  return {Box{left + 0.5 * w1, cy, w1, h1}, Box{left + w1 + 0.5 * w2, cy, w2, h2}};
}

}  // namespace

std::vector<Scene> synth_scenes(const SynthConfig& cfg, std::size_t count) {
  cfg.validate();
  std::vector<Scene> scenes;
  scenes.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = stream_for(cfg.seed, i);
    Scene scene;
    scene.id = static_cast<std::int64_t>(i);
    scene.width = cfg.image_width;
    scene.height = cfg.image_height;
    if (cfg.adjacent_pair) {
      scene.gts = place_adjacent_pair(cfg, rng);
    } else {
      std::size_t n = std::uniform_int_distribution<std::size_t>(cfg.min_objects,
                                                                 cfg.max_objects)(rng);
      bool ok = false;
      scene.gts = place_objects(cfg, n, rng, ok);
      while (!ok && n > 1) {
        warn("synth_scenes: could not place " + std::to_string(n) + " objects in scene " +
             std::to_string(i) + "; retrying with " + std::to_string(n - 1));
        --n;
        scene.gts = place_objects(cfg, n, rng, ok);
      }
      if (!ok) {
        throw PreconditionError("synth_scenes: cannot place a single object; check sizes");
      }
    }
    attach_features(scene, cfg.features, rng);
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

// ---------------------------------------------------------------------------
// COCO-style annotations

namespace {

using nlohmann::json;

std::vector<Scene> scenes_from_json(const json& doc, const AnnotationOptions& opts) {
  if (!doc.is_object()) throw DataError("annotation file: top level must be an object");
  if (!doc.contains("images") || !doc.at("images").is_array()) {
    throw DataError("annotation file: missing 'images' array");
  }
  std::vector<Scene> scenes;
  std::map<std::int64_t, std::size_t> by_id;
  for (const json& img : doc.at("images")) {
    Scene s;
    s.id = img.at("id").get<std::int64_t>();
    s.width = img.at("width").get<double>();
    s.height = img.at("height").get<double>();
    if (!(s.width > 0.0) || !(s.height > 0.0)) {
      throw DataError("annotation file: image " + std::to_string(s.id) +
                      " has non-positive size");
    }
    if (!by_id.emplace(s.id, scenes.size()).second) {
      throw DataError("annotation file: duplicate image id " + std::to_string(s.id));
    }
    scenes.push_back(std::move(s));
  }

  if (doc.contains("annotations")) {
    const json& anns = doc.at("annotations");
    if (!anns.is_array()) throw DataError("annotation file: 'annotations' must be an array");
    for (std::size_t k = 0; k < anns.size(); ++k) {
      const json& a = anns[k];
      const auto image_id = a.at("image_id").get<std::int64_t>();
      const auto it = by_id.find(image_id);
      if (it == by_id.end()) {
        warn("annotation " + std::to_string(k) + " references unknown image " +
             std::to_string(image_id) + "; skipped");
        continue;
      }
      const json& bb = a.at("bbox");
      if (!bb.is_array() || bb.size() != 4) {
        throw DataError("annotation " + std::to_string(k) + ": bbox must have 4 numbers");
      }
      const double x = bb[0].get<double>();
      const double y = bb[1].get<double>();
      const double w = bb[2].get<double>();
      const double h = bb[3].get<double>();
      if (!(w > 0.0) || !(h > 0.0) || !std::isfinite(x) || !std::isfinite(y)) {
        warn("annotation " + std::to_string(k) + " has a non-positive box size; skipped");
        continue;
      }
      Scene& s = scenes[it->second];
      const Box b{x + 0.5 * w, y + 0.5 * h, w, h};
      const bool within_slack = b.xmin() >= -0.5 * s.width && b.xmax() <= 1.5 * s.width &&
                                b.ymin() >= -0.5 * s.height && b.ymax() <= 1.5 * s.height;
      if (!within_slack) {
        warn("annotation " + std::to_string(k) + " lies far outside its image; skipped");
        continue;
      }
      s.gts.push_back(b);
      s.categories.push_back(a.contains("category_id") ? a.at("category_id").get<std::int64_t>()
                                                       : -1);
    }
  }

  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Scene& s = scenes[i];
    if (opts.short_side > 0.0) {
      const double scale = opts.short_side / std::min(s.width, s.height);
      s.width *= scale;
      s.height *= scale;
      for (Box& b : s.gts) b = Box{b.x * scale, b.y * scale, b.w * scale, b.h * scale};
    }
    Rng rng = stream_for(opts.seed, i);
    attach_features(s, opts.features, rng);
  }
  return scenes;
}

}  // namespace

std::vector<Scene> parse_annotations(std::istream& is, const AnnotationOptions& opts) {
  json doc;
  try {
    doc = json::parse(is);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("annotation file: ") + e.what());
  }
  try {
    return scenes_from_json(doc, opts);
  } catch (const json::exception& e) {
    throw DataError(std::string("annotation file: ") + e.what());
  }
}

std::vector<Scene> load_annotations(const std::filesystem::path& path,
                                    const AnnotationOptions& opts) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open annotation file " + path.string());
  return parse_annotations(is, opts);
}

void write_annotations(std::ostream& os, std::span<const Scene> scenes) {
  json images = json::array();
  json anns = json::array();
  std::set<std::int64_t> cats;
  std::int64_t ann_id = 1;
  for (const Scene& s : scenes) {
    images.push_back({{"id", s.id}, {"width", s.width}, {"height", s.height}});
    for (std::size_t k = 0; k < s.gts.size(); ++k) {
      const Box& b = s.gts[k];
      const std::int64_t cat = k < s.categories.size() ? s.categories[k] : -1;
      json a = {{"id", ann_id++},
                {"image_id", s.id},
                {"bbox", {b.xmin(), b.ymin(), b.w, b.h}},
                {"area", b.area()}};
      if (cat >= 0) {
        a["category_id"] = cat;
        cats.insert(cat);
      }
      anns.push_back(std::move(a));
    }
  }
  json categories = json::array();
  for (std::int64_t c : cats) categories.push_back({{"id", c}, {"name", std::to_string(c)}});
  const json doc = {{"images", images}, {"annotations", anns}, {"categories", categories}};
  os << doc.dump(1) << '\n';
}

void save_annotations(const std::filesystem::path& path, std::span<const Scene> scenes) {
  io::write_atomic(path, [&](std::ostream& os) { write_annotations(os, scenes); });
}

std::vector<Scene> filter_categories(std::span<const Scene> scenes,
                                     const std::set<std::int64_t>& excluded) {
  std::vector<Scene> kept;
  for (const Scene& s : scenes) {
    const bool hit = std::any_of(s.categories.begin(), s.categories.end(),
                                 [&](std::int64_t c) { return excluded.count(c) > 0; });
    if (!hit) kept.push_back(s);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Scene cache

void write_scene_cache(std::ostream& os, std::span<const Scene> scenes) {
  io::write_magic(os, kSceneMagic);
  io::write_u64_le(os, scenes.size());
  for (const Scene& s : scenes) {
    io::write_u64_le(os, static_cast<std::uint64_t>(s.id));
    io::write_f64_le(os, s.width);
    io::write_f64_le(os, s.height);
    io::write_u64_le(os, s.gts.size());
    for (std::size_t k = 0; k < s.gts.size(); ++k) {
      const Box& b = s.gts[k];
      io::write_f64_le(os, b.x);
      io::write_f64_le(os, b.y);
      io::write_f64_le(os, b.w);
      io::write_f64_le(os, b.h);
      const std::int64_t cat = k < s.categories.size() ? s.categories[k] : -1;
      io::write_u64_le(os, static_cast<std::uint64_t>(cat));
    }
    const FeatureMap& fm = s.features;
    io::write_u64_le(os, fm.empty() ? 0 : fm.channels());
    io::write_u64_le(os, fm.empty() ? 0 : fm.height());
    io::write_u64_le(os, fm.empty() ? 0 : fm.width());
    io::write_f64_le(os, fm.stride());
    for (Eigen::Index i = 0; i < fm.data().size(); ++i) io::write_f64_le(os, fm.data()[i]);
  }
}

std::vector<Scene> read_scene_cache(std::istream& is) {
  io::expect_magic(is, kSceneMagic);
  constexpr std::uint64_t kLimit = 1ULL << 32;
  const std::uint64_t n = io::read_u64_le(is);
  if (n > kLimit) throw DataError("scene cache: implausible scene count");
  std::vector<Scene> scenes;
  for (std::uint64_t i = 0; i < n; ++i) {
    Scene s;
    s.id = static_cast<std::int64_t>(io::read_u64_le(is));
    s.width = io::read_f64_le(is);
    s.height = io::read_f64_le(is);
    const std::uint64_t boxes = io::read_u64_le(is);
    if (boxes > kLimit) throw DataError("scene cache: implausible box count");
    bool labeled = false;
    for (std::uint64_t k = 0; k < boxes; ++k) {
      Box b;
      b.x = io::read_f64_le(is);
      b.y = io::read_f64_le(is);
      b.w = io::read_f64_le(is);
      b.h = io::read_f64_le(is);
      if (!is_valid(b)) throw DataError("scene cache: invalid ground-truth box");
      const auto cat = static_cast<std::int64_t>(io::read_u64_le(is));
      labeled = labeled || cat >= 0;
      s.gts.push_back(b);
      s.categories.push_back(cat);
    }
    if (!labeled) s.categories.clear();
    const std::uint64_t c = io::read_u64_le(is);
    const std::uint64_t h = io::read_u64_le(is);
    const std::uint64_t w = io::read_u64_le(is);
    const double stride = io::read_f64_le(is);
    if (c > 0) {
      if (h == 0 || w == 0 || c > 1024 || h > kLimit / c || w > kLimit / (c * h)) {
        throw DataError("scene cache: implausible feature dimensions");
      }
      s.features = FeatureMap(c, h, w, stride);
      for (Eigen::Index k = 0; k < s.features.data().size(); ++k) {
        s.features.data()[k] = io::read_f64_le(is);
      }
    }
    scenes.push_back(std::move(s));
  }
  return scenes;
}

void save_scene_cache(const std::filesystem::path& path, std::span<const Scene> scenes) {
  io::write_atomic(path, [&](std::ostream& os) { write_scene_cache(os, scenes); }, true);
}

std::vector<Scene> load_scene_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open scene cache " + path.string());
  return read_scene_cache(is);
}

}  // namespace ubbr
