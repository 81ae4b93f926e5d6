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

// Object proposals from a trained head: a uniform seed grid is refined
// toward nearby objects, each refined box is scored by how many others
// landed on top of it, and a score-decaying NMS produces the ranking.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ubbr/box.hpp"
#include "ubbr/datasets.hpp"
#include "ubbr/regressor.hpp"

namespace ubbr {

struct Proposal {
  Box box;
  double score = 0.0;

  friend bool operator==(const Proposal&, const Proposal&) = default;
};

struct SeedGridConfig {
  // Box sides and stride are fractions of the image's shorter side.
  std::vector<double> scales{0.125, 0.25, 0.5, 0.75};
  std::vector<double> aspect_ratios{0.5, 1.0, 2.0};  // width / height
  double stride = 0.0625;

  void validate() const;
};

struct NmsConfig {
  double iou_thresh = 0.6;
  double decay = 10.0;
};

struct ProposalConfig {
  SeedGridConfig grid;
  NmsConfig nms;
  std::size_t iterations = 1;
  double neighbor_iou = 0.7;  // overlap that counts a neighbor when scoring
};

/// Lattice positions along one axis of length `extent` for step `step`:
/// centered, spaced `step` apart, covering [0, extent].
std::vector<double> lattice_positions(double extent, double step);

/// Seeds ordered by scale, then aspect ratio, then row, then column; each
/// clipped to the image with a minimum side of 1.
std::vector<Box> seed_grid(double image_w, double image_h, const SeedGridConfig& cfg);

/// Score of box n = number of other boxes with IoU > neighbor_iou against it.
std::vector<double> score_proposals(std::span<const Box> boxes, double neighbor_iou = 0.7,
                                    std::size_t workers = 1);

/// Repeatedly emits the highest-scoring remaining proposal (lowest input
/// index on ties) and divides the scores of remaining proposals that overlap
/// it by more than cfg.iou_thresh by cfg.decay. Every input is emitted once;
/// each carries its score at emission time.
std::vector<Proposal> decay_nms(std::span<const Proposal> proposals, const NmsConfig& cfg = {});

/// Classical NMS: greedy selection dropping overlaps above iou_thresh.
std::vector<Proposal> hard_nms(std::span<const Proposal> proposals, double iou_thresh);

/// seed_grid -> refine -> score -> decay_nms, clipped to the image.
std::vector<Proposal> generate_proposals(const RegressorModel& model, const Scene& scene,
                                         const ProposalConfig& cfg = {},
                                         std::size_t workers = 1);

/// Seeds ranked without a model: grid order, all scores zero.
std::vector<Proposal> seed_proposals(const Scene& scene, const SeedGridConfig& cfg = {});

struct ProposalRecord {
  std::int64_t image_id = 0;
  Proposal proposal;
  friend bool operator==(const ProposalRecord&, const ProposalRecord&) = default;
};

// Proposal text export, one record per line:
//   image_id,xmin,ymin,xmax,ymax,score
// Lines starting with '#' are comments. Records keep their rank order.
void write_proposals(std::ostream& os, std::span<const ProposalRecord> records);
void save_proposals(const std::filesystem::path& path, std::span<const ProposalRecord> records);
/// Throws DataError naming the offending line.
std::vector<ProposalRecord> read_proposals(std::istream& is);
std::vector<ProposalRecord> load_proposals(const std::filesystem::path& path);

}  // namespace ubbr
