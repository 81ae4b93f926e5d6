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

#include "ubbr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "ubbr/errors.hpp"

namespace ubbr {

void TrainConfig::validate() const {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw PreconditionError("TrainConfig: momentum must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw PreconditionError("TrainConfig: weight_decay must be >= 0");
  if (!positive(initial_lr) || !positive(stop_lr) || !(stop_lr < initial_lr)) {
    throw PreconditionError("TrainConfig: need 0 < stop_lr < initial_lr");
  }
  if (!(lr_decay_factor > 1.0)) throw PreconditionError("TrainConfig: lr_decay_factor must be > 1");
  if (plateau_patience < 1 || max_epochs < 1 || minibatch_size < 1) {
    throw PreconditionError("TrainConfig: patience, epochs and batch size must be >= 1");
  }
  if (!(init_std >= 0.0)) throw PreconditionError("TrainConfig: init_std must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw PreconditionError("TrainConfig: validation_fraction must lie in [0, 1)");
  }
}

Eigen::MatrixXd pool_features(const FeatureMap& fm, std::span<const Box> boxes,
                              std::size_t pool_size) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(fm.channels() * pool_size * pool_size),
                      static_cast<Eigen::Index>(boxes.size()));
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    roi_align_into(fm, boxes[i], pool_size, out.col(static_cast<Eigen::Index>(i)));
  }
  return out;
}

std::vector<Offsets> predict(const RegressorModel& model, const FeatureMap& fm,
                             std::span<const Box> boxes) {
  if (fm.channels() != model.shape.channels) {
    throw PreconditionError("predict: feature map has " + std::to_string(fm.channels()) +
                            " channels, model expects " + std::to_string(model.shape.channels));
  }
  const Eigen::MatrixXd out = forward_batch(model, pool_features(fm, boxes, model.shape.pool_size));
  std::vector<Offsets> preds(boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    preds[i] = Offsets::from_vector(out.col(static_cast<Eigen::Index>(i)));
  }
  return preds;
}

std::vector<std::vector<Box>> refine(const RegressorModel& model, const Scene& scene,
                                     std::span<const Box> boxes, std::size_t iterations) {
  if (iterations < 1) throw PreconditionError("refine: iterations must be >= 1");
  if (!scene.has_features()) throw PreconditionError("refine: scene has no feature map");
  std::vector<std::vector<Box>> trajectory;
  trajectory.reserve(iterations);
  std::vector<Box> current(boxes.begin(), boxes.end());
  for (std::size_t k = 0; k < iterations; ++k) {
    const std::vector<Offsets> preds = predict(model, scene.features, current);
    for (std::size_t i = 0; i < current.size(); ++i) current[i] = apply_offsets(current[i], preds[i]);
    trajectory.push_back(current);
  }
  return trajectory;
}

std::vector<std::vector<Box>> perturbed_inputs(std::span<const Scene> scenes,
                                               const SamplerConfig& cfg, std::uint64_t seed) {
  std::vector<std::vector<Box>> out;
  out.reserve(scenes.size());
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    Rng rng(worker_seed(seed, i));
    std::vector<Box> boxes;
    for (const Box& g : scenes[i].gts) {
      const auto sampled = generate_training_boxes(g, cfg, rng);
      boxes.insert(boxes.end(), sampled.boxes.begin(), sampled.boxes.end());
    }
    out.push_back(std::move(boxes));
  }
  return out;
}

namespace {

struct Sample {
  std::uint32_t scene = 0;
  Box box;
  Box gt;  // best-overlapping ground truth of the scene
};

std::vector<Sample> draw_samples(std::span<const Scene> scenes,
                                 std::span<const std::size_t> which,
                                 const SamplerConfig& cfg, Rng& rng) {
  std::vector<Sample> samples;
  for (std::size_t s : which) {
    const Scene& scene = scenes[s];
    for (const Box& g : scene.gts) {
      for (const Box& b : generate_training_boxes(g, cfg, rng).boxes) {
        const Box& matched = scene.gts[match_nearest_gt(b, scene.gts)];
        samples.push_back({static_cast<std::uint32_t>(s), b, matched});
      }
    }
  }
  return samples;
}

Eigen::MatrixXd sample_features(std::span<const Scene> scenes, std::span<const Sample> batch,
                                std::size_t pool_size) {
  const Scene& first = scenes[batch.front().scene];
  Eigen::MatrixXd out(static_cast<Eigen::Index>(first.features.channels() * pool_size * pool_size),
                      static_cast<Eigen::Index>(batch.size()));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    roi_align_into(scenes[batch[i].scene].features, batch[i].box, pool_size,
                   out.col(static_cast<Eigen::Index>(i)));
  }
  return out;
}

struct BatchLoss {
  double loss = 0.0;
  std::size_t fallbacks = 0;
};

// Loss per sample and dL/d(offsets) per column (not yet averaged).
BatchLoss sample_losses(const Eigen::MatrixXd& out, std::span<const Sample> batch,
                        LossKind kind, const LossConfig& loss_cfg, Eigen::MatrixXd* d_out) {
  BatchLoss result;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const Offsets pred = Offsets::from_vector(out.col(col));
    if (kind == LossKind::Iou) {
      const auto lg = iou_loss_grad(pred, batch[i].box, batch[i].gt, loss_cfg);
      result.loss += lg.loss;
      result.fallbacks += lg.fallback ? 1 : 0;
      if (d_out) d_out->col(col) = lg.grad;
    } else {
      const Offsets target = encode_offsets(batch[i].box, batch[i].gt);
      result.loss += smooth_l1_loss(pred, target, loss_cfg);
      if (d_out) d_out->col(col) = smooth_l1_grad(pred, target, loss_cfg);
    }
  }
  return result;
}

struct Validation {
  double loss = 0.0;
  double input_iou = 0.0;
  double refined_iou = 0.0;
};

Validation validate_model(const RegressorModel& model, std::span<const Scene> scenes,
                          std::span<const Sample> samples, LossKind kind,
                          const LossConfig& loss_cfg, std::size_t chunk) {
  Validation v;
  if (samples.empty()) return v;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const auto batch = samples.subspan(start, std::min(chunk, samples.size() - start));
    const Eigen::MatrixXd out =
        forward_batch(model, sample_features(scenes, batch, model.shape.pool_size));
    v.loss += sample_losses(out, batch, kind, loss_cfg, nullptr).loss;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const Offsets pred = Offsets::from_vector(out.col(static_cast<Eigen::Index>(i)));
      v.input_iou += iou(batch[i].box, batch[i].gt);
      v.refined_iou += iou(apply_offsets(batch[i].box, pred), batch[i].gt);
    }
  }
  const auto n = static_cast<double>(samples.size());
  v.loss /= n;
  v.input_iou /= n;
  v.refined_iou /= n;
  return v;
}

void sgd_step(RegressorModel& m, HeadGradient& velocity, const HeadGradient& g, double lr,
              double momentum, double decay) {
  // Caffe-style: v = mu v + lr (g + decay w), w -= v. Biases are not decayed.
  velocity.w1 = momentum * velocity.w1 + lr * (g.w1 + decay * m.w1);
  velocity.w2 = momentum * velocity.w2 + lr * (g.w2 + decay * m.w2);
  velocity.w3 = momentum * velocity.w3 + lr * (g.w3 + decay * m.w3);
  velocity.b1 = momentum * velocity.b1 + lr * g.b1;
  velocity.b2 = momentum * velocity.b2 + lr * g.b2;
  velocity.b3 = momentum * velocity.b3 + lr * g.b3;
  m.w1 -= velocity.w1;
  m.w2 -= velocity.w2;
  m.w3 -= velocity.w3;
  m.b1 -= velocity.b1;
  m.b2 -= velocity.b2;
  m.b3 -= velocity.b3;
}

}  // namespace

TrainResult train(std::span<const Scene> scenes, const TrainConfig& cfg,
                  const SamplerConfig& sampler_cfg, const LossConfig& loss_cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  sampler_cfg.validate();
  loss_cfg.validate();
  if (scenes.empty()) throw PreconditionError("train: no scenes");
  for (const Scene& s : scenes) {
    if (!s.usable_for_training()) {
      throw PreconditionError("train: scene " + std::to_string(s.id) + " has no ground truths");
    }
    if (!s.has_features() || s.features.channels() != cfg.head.channels) {
      throw PreconditionError("train: scene " + std::to_string(s.id) +
                              " lacks a feature map with " + std::to_string(cfg.head.channels) +
                              " channels");
    }
  }

  // The last scenes form the validation split; a single scene validates on
  // itself.
  std::size_t n_val = 0;
  if (scenes.size() > 1 && cfg.validation_fraction > 0.0) {
    n_val = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(cfg.validation_fraction * double(scenes.size()))));
    n_val = std::min(n_val, scenes.size() - 1);
  }
  std::vector<std::size_t> train_idx(scenes.size() - n_val);
  std::iota(train_idx.begin(), train_idx.end(), 0);
  std::vector<std::size_t> val_idx;
  for (std::size_t i = scenes.size() - n_val; i < scenes.size(); ++i) val_idx.push_back(i);
  if (val_idx.empty()) val_idx = train_idx;

  Rng init_rng(worker_seed(cfg.seed, 0x1001));
  Rng val_rng(worker_seed(cfg.seed, 0x2002));
  Rng epoch_rng(worker_seed(cfg.seed, 0x3003));

  TrainResult result;
  RegressorModel model = RegressorModel::gaussian(cfg.head, cfg.init_std, init_rng);
  HeadGradient velocity = HeadGradient::zeros_like(model);
  HeadGradient grad = HeadGradient::zeros_like(model);
  ForwardCache cache;

  const std::vector<Sample> val_samples = draw_samples(scenes, val_idx, sampler_cfg, val_rng);
  const std::size_t chunk = std::max<std::size_t>(cfg.minibatch_size, 256);

  const Validation initial =
      validate_model(model, scenes, val_samples, cfg.loss, loss_cfg, chunk);
  double best_val = initial.loss;
  double plateau_ref = initial.loss;
  result.model = model;
  std::size_t stale = 0;
  double lr = cfg.initial_lr;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::vector<Sample> samples = draw_samples(scenes, train_idx, sampler_cfg, epoch_rng);
    std::shuffle(samples.begin(), samples.end(), epoch_rng);

    EpochStats stats;
    stats.epoch = epoch;
    stats.lr = lr;
    stats.samples = samples.size();
    double loss_sum = 0.0;
    bool finite = true;
    const std::span<const Sample> all(samples);
    for (std::size_t start = 0; start < samples.size() && finite; start += cfg.minibatch_size) {
      const auto batch = all.subspan(start, std::min(cfg.minibatch_size, samples.size() - start));
      forward_batch(model, sample_features(scenes, batch, cfg.head.pool_size), cache);
      Eigen::MatrixXd d_out(4, static_cast<Eigen::Index>(batch.size()));
      BatchLoss bl;
      try {
        bl = sample_losses(cache.out, batch, cfg.loss, loss_cfg, &d_out);
      } catch (const NumericError&) {
        finite = false;
        break;
      }
      loss_sum += bl.loss;
      stats.fallbacks += bl.fallbacks;
      d_out /= static_cast<double>(batch.size());
      grad.set_zero();
      backward_batch(model, cache, d_out, grad);
      sgd_step(model, velocity, grad, lr, cfg.momentum, cfg.weight_decay);
      finite = std::isfinite(bl.loss) && model.all_finite();
    }

    Validation val;
    if (finite) {
      try {
        val = validate_model(model, scenes, val_samples, cfg.loss, loss_cfg, chunk);
      } catch (const NumericError&) {
        finite = false;
      }
      finite = finite && std::isfinite(val.loss);
    }
    if (!finite) {
      std::ostringstream msg;
      msg << "training diverged in epoch " << epoch << " at learning rate " << lr
          << "; returning the checkpoint from epoch " << result.best_epoch;
      result.diverged = true;
      result.diagnostic = msg.str();
      return result;
    }

    stats.train_loss = samples.empty() ? 0.0 : loss_sum / double(samples.size());
    stats.val_loss = val.loss;
    stats.val_input_iou = val.input_iou;
    stats.val_refined_iou = val.refined_iou;
    result.log.push_back(stats);
    if (on_epoch) on_epoch(stats);

    if (val.loss < best_val) {
      best_val = val.loss;
      result.model = model;
      result.best_epoch = epoch;
    }
    if (val.loss < plateau_ref - cfg.plateau_threshold * std::abs(plateau_ref)) {
      plateau_ref = val.loss;
      stale = 0;
    } else if (++stale >= cfg.plateau_patience) {
      lr /= cfg.lr_decay_factor;
      stale = 0;
      // Training ends once the rate has come down to stop_lr; the relative
      // slack absorbs rounding in repeated division.
      if (lr <= cfg.stop_lr * (1.0 + 1e-9)) break;
    }
  }
  return result;
}

}  // namespace ubbr
