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

// Localization metrics: proposal recall at an IoU threshold, CorLoc, and
// mean IoU over refinement iterations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ubbr/box.hpp"
#include "ubbr/proposals.hpp"

namespace ubbr {

struct EvalRecord {
  std::int64_t image_id = 0;
  std::vector<Proposal> proposals;  // ranked, best first
  std::vector<Box> gts;
};

/// Fraction of all ground truths covered (IoU > iou_thresh) by at least one
/// of their image's top-k proposals. Images without ground truths add
/// nothing; returns 0 when there are no ground truths at all.
double recall_at(std::span<const EvalRecord> records, double iou_thresh, std::size_t k);

struct RecallPoint {
  std::size_t k = 0;
  double recall = 0.0;
};

std::vector<RecallPoint> recall_curve(std::span<const EvalRecord> records, double iou_thresh,
                                      std::span<const std::size_t> ks);

/// 1, 2, 5, 10, 20, 50, ... up to and including `max_k`.
std::vector<std::size_t> log_k_grid(std::size_t max_k);

/// Percentage of images whose top-1 proposal has IoU > 0.5 with some ground
/// truth. Images without proposals count as misses.
double corloc(std::span<const EvalRecord> records);

/// Mean over boxes of IoU with the best-matching ground truth.
double mean_best_iou(std::span<const Box> boxes, std::span<const Box> gts);

/// Entry 0 is the input mean, entry k the mean after k refinement passes.
std::vector<double> mean_iou_trajectory(std::span<const Box> before,
                                        std::span<const std::vector<Box>> trajectory,
                                        std::span<const Box> gts);

/// Groups proposal-file records by image and attaches ground truths.
/// Images present in `gts_by_image` but absent from the proposals get an
/// empty proposal list.
std::vector<EvalRecord> make_records(
    std::span<const ProposalRecord> proposals,
    std::span<const std::pair<std::int64_t, std::vector<Box>>> gts_by_image);

struct CurveSeries {
  std::string label;
  std::vector<RecallPoint> points;
};

/// Standalone SVG plot of recall against a log-scaled proposal count.
void write_recall_svg(std::ostream& os, const std::string& title,
                      std::span<const CurveSeries> series);
void save_recall_svg(const std::filesystem::path& path, const std::string& title,
                     std::span<const CurveSeries> series);

}  // namespace ubbr
