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

#include "ubbr/benchmark.hpp"

#include "ubbr/errors.hpp"
#include "ubbr/evalkit.hpp"
#include "ubbr/sampler.hpp"

namespace ubbr {

std::uint64_t heldout_seed(std::uint64_t seed) { return worker_seed(seed, 0x7e57ULL << 32); }

SyntheticSplit synthetic_split(const SynthConfig& cfg, std::size_t n_train, std::size_t n_test) {
  SyntheticSplit split;
  split.train = synth_scenes(cfg, n_train);
  SynthConfig held = cfg;
  held.seed = heldout_seed(cfg.seed);
  split.test = synth_scenes(held, n_test);
  return split;
}

TrainConfig benchmark_train_config() {
  TrainConfig cfg;
  cfg.init_std = 0.05;
  return cfg;
}

std::size_t RefinementReport::monotone_scenes() const {
  std::size_t n = 0;
  for (const auto& t : per_scene) {
    bool ok = true;
    for (std::size_t k = 2; k < t.size(); ++k) ok = ok && t[k] >= t[k - 1];
    n += ok ? 1 : 0;
  }
  return n;
}

RefinementReport evaluate_refinement(const RegressorModel& model, std::span<const Scene> scenes,
                                     std::span<const std::vector<Box>> inputs,
                                     std::size_t iterations) {
  if (scenes.size() != inputs.size())
    throw PreconditionError("evaluate_refinement: one box list per scene required");
  if (iterations == 0) throw PreconditionError("evaluate_refinement: iterations must be >= 1");

  RefinementReport rep;
  std::vector<double> sums(iterations + 1, 0.0);
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto& boxes = inputs[i];
    if (boxes.empty() || scenes[i].gts.empty()) continue;
    const auto traj = refine(model, scenes[i], boxes, iterations);
    auto m = mean_iou_trajectory(boxes, traj, scenes[i].gts);
    for (std::size_t k = 0; k <= iterations; ++k) sums[k] += m[k] * double(boxes.size());
    rep.boxes += boxes.size();
    rep.per_scene.push_back(std::move(m));
  }
  rep.mean_iou.resize(iterations + 1, 0.0);
  if (rep.boxes > 0)
    for (std::size_t k = 0; k <= iterations; ++k) rep.mean_iou[k] = sums[k] / double(rep.boxes);
  return rep;
}

}  // namespace ubbr
