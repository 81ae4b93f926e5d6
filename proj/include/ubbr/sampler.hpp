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

// Random training boxes: perturb a ground truth with offsets drawn from
// independent uniforms and keep only perturbations that still overlap it.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "ubbr/box.hpp"

namespace ubbr {

/// The random source used everywhere in the library.
using Rng = std::mt19937_64;

struct SamplerConfig {
  double alpha = 0.35;  // tx, ty ~ U(-alpha, alpha)
  double beta = 0.5;    // tw, th ~ U(ln(1 - beta), ln(1 + beta))
  double t = 0.3;       // minimum IoU with the source ground truth
  std::size_t boxes_per_gt = 50;
  std::size_t max_attempts_per_box = 1000;

  void validate() const;
};

Offsets sample_offsets(const SamplerConfig& cfg, Rng& rng);

struct SampledBoxes {
  std::vector<Box> boxes;
  std::size_t attempts = 0;
  bool underfilled = false;
};

/// Draws up to cfg.boxes_per_gt boxes around `g`, each with IoU >= cfg.t.
/// If a single box needs more than cfg.max_attempts_per_box draws, sampling
/// stops, `underfilled` is set and a warning is emitted.
SampledBoxes generate_training_boxes(const Box& g, const SamplerConfig& cfg, Rng& rng);

/// Seed for worker `index` derived from a base seed.
inline std::uint64_t worker_seed(std::uint64_t base, std::uint64_t index) {
  return base ^ index;
}

}  // namespace ubbr
