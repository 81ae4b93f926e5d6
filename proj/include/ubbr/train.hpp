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

// SGD training of the regression head on randomly perturbed ground truths,
// and iterative refinement with a trained head.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ubbr/box.hpp"
#include "ubbr/datasets.hpp"
#include "ubbr/loss.hpp"
#include "ubbr/regressor.hpp"
#include "ubbr/sampler.hpp"

namespace ubbr {

enum class LossKind { Iou, SmoothL1 };

struct TrainConfig {
  double momentum = 0.9;
  double weight_decay = 0.0005;
  double initial_lr = 1e-3;
  double lr_decay_factor = 10.0;
  std::size_t plateau_patience = 3;
  // Relative validation-loss improvement below this counts as a plateau.
  double plateau_threshold = 1e-3;
  double stop_lr = 1e-6;
  std::size_t max_epochs = 100;
  std::size_t minibatch_size = 128;
  double init_std = 0.001;
  // Fraction of scenes held out for the learning-rate schedule.
  double validation_fraction = 0.04;
  HeadShape head;
  LossKind loss = LossKind::Iou;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_input_iou = 0.0;    // mean IoU of unrefined validation boxes
  double val_refined_iou = 0.0;  // after one refinement pass
  std::size_t samples = 0;
  std::size_t fallbacks = 0;  // IoU-loss samples that used the smooth-L1 gradient
};

struct TrainResult {
  RegressorModel model;  // best validation checkpoint
  std::vector<EpochStats> log;
  std::size_t best_epoch = 0;
  bool diverged = false;
  std::string diagnostic;
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains a head from scratch. Every scene needs at least one ground truth
/// and attached features. Bitwise deterministic for a fixed config.
TrainResult train(std::span<const Scene> scenes, const TrainConfig& cfg,
                  const SamplerConfig& sampler_cfg, const LossConfig& loss_cfg,
                  const EpochCallback& on_epoch = {});

/// Pooled features for many boxes of one scene, one column per box.
Eigen::MatrixXd pool_features(const FeatureMap& fm, std::span<const Box> boxes,
                              std::size_t pool_size);

/// Predicted offsets for each box.
std::vector<Offsets> predict(const RegressorModel& model, const FeatureMap& fm,
                             std::span<const Box> boxes);

/// Feeds boxes through the head `iterations` times, reusing the scene's
/// feature map. Element k of the result holds the boxes after k + 1 passes.
std::vector<std::vector<Box>> refine(const RegressorModel& model, const Scene& scene,
                                     std::span<const Box> boxes, std::size_t iterations);

/// Boxes sampled around every ground truth of every scene with one seeded
/// stream per scene; used for evaluation splits.
std::vector<std::vector<Box>> perturbed_inputs(std::span<const Scene> scenes,
                                               const SamplerConfig& cfg, std::uint64_t seed);

}  // namespace ubbr
