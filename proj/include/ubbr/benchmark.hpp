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

// The desk-scale synthetic benchmark: a fixed train / held-out split of
// generated scenes and the refinement measurements taken on it.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "ubbr/box.hpp"
#include "ubbr/datasets.hpp"
#include "ubbr/regressor.hpp"
#include "ubbr/train.hpp"

namespace ubbr {

struct SyntheticSplit {
  std::vector<Scene> train;
  std::vector<Scene> test;
};

/// Training scenes come from cfg.seed, held-out scenes from a stream
/// derived from it, so the two never share a scene.
SyntheticSplit synthetic_split(const SynthConfig& cfg, std::size_t n_train, std::size_t n_test);

/// Seed of the held-out scene stream for a given base seed.
std::uint64_t heldout_seed(std::uint64_t seed);

/// Training recipe used by the command-line tool and the benchmark: the
/// library defaults except for a wider weight initialization, without which
/// the head stays near zero output on the stand-in features.
TrainConfig benchmark_train_config();

struct RefinementReport {
  // Pooled over all boxes: entry 0 is the input mean IoU, entry k the mean
  // after k passes.
  std::vector<double> mean_iou;
  // Same trajectory per scene; scenes without boxes or ground truths are
  // left out.
  std::vector<std::vector<double>> per_scene;
  std::size_t boxes = 0;

  /// Scenes whose mean IoU never drops from pass 1 to the last pass.
  std::size_t monotone_scenes() const;
};

/// Refines `inputs[i]` within `scenes[i]` for `iterations` passes and
/// records mean IoU against each scene's ground truths.
RefinementReport evaluate_refinement(const RegressorModel& model, std::span<const Scene> scenes,
                                     std::span<const std::vector<Box>> inputs,
                                     std::size_t iterations);

}  // namespace ubbr
