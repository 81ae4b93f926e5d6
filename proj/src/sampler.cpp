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

#include "ubbr/sampler.hpp"

#include <cmath>
#include <string>

#include "ubbr/errors.hpp"
#include "ubbr/log.hpp"

namespace ubbr {

void SamplerConfig::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw PreconditionError("SamplerConfig: alpha must be finite and >= 0");
  }
  if (!(beta >= 0.0 && beta < 1.0)) {
    throw PreconditionError("SamplerConfig: beta must lie in [0, 1)");
  }
  if (!(t >= 0.0 && t < 1.0)) {
    throw PreconditionError("SamplerConfig: t must lie in [0, 1)");
  }
  if (boxes_per_gt < 1) throw PreconditionError("SamplerConfig: boxes_per_gt must be >= 1");
  if (max_attempts_per_box < 1) {
    throw PreconditionError("SamplerConfig: max_attempts_per_box must be >= 1");
  }
}

namespace {

// std::uniform_real_distribution rejects a == b; a degenerate range is a
// constant.
double draw_uniform(double lo, double hi, Rng& rng) {
  if (!(hi > lo)) {
    rng.discard(1);
    return lo;
  }
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

}  // namespace

Offsets sample_offsets(const SamplerConfig& cfg, Rng& rng) {
  const double lo = std::log1p(-cfg.beta);
  const double hi = std::log1p(cfg.beta);
  Offsets d;
  d.tx = draw_uniform(-cfg.alpha, cfg.alpha, rng);
  d.ty = draw_uniform(-cfg.alpha, cfg.alpha, rng);
  d.tw = draw_uniform(lo, hi, rng);
  d.th = draw_uniform(lo, hi, rng);
  return d;
}

SampledBoxes generate_training_boxes(const Box& g, const SamplerConfig& cfg, Rng& rng) {
  cfg.validate();
  SampledBoxes out;
  out.boxes.reserve(cfg.boxes_per_gt);
  while (out.boxes.size() < cfg.boxes_per_gt) {
    bool accepted = false;
    for (std::size_t attempt = 0; attempt < cfg.max_attempts_per_box; ++attempt) {
      ++out.attempts;
      const Box b = apply_offsets(g, sample_offsets(cfg, rng));
      if (iou(b, g) >= cfg.t) {
        out.boxes.push_back(b);
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      out.underfilled = true;
      warn("generate_training_boxes: only " + std::to_string(out.boxes.size()) + " of " +
           std::to_string(cfg.boxes_per_gt) + " boxes reached IoU >= " +
           std::to_string(cfg.t) + " within " + std::to_string(cfg.max_attempts_per_box) +
           " attempts");
      break;
    }
  }
  return out;
}

}  // namespace ubbr
