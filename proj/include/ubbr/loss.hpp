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

// Regression losses over boxes: the IoU loss -ln(IoU + eps) with its exact
// gradient through the offset transform, the batch average over matched
// ground truths, and the smooth-L1 baseline on offsets.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>

#include "ubbr/box.hpp"
#include "ubbr/errors.hpp"

namespace ubbr {

struct LossConfig {
  double epsilon = 1e-6;
  double smooth_l1_delta = 1.0;
  // Scale of the smooth-L1 gradient used when the refined box no longer
  // intersects its ground truth.
  double fallback_weight = 1.0;

  void validate() const {
    if (!(epsilon > 0.0)) throw PreconditionError("LossConfig: epsilon must be > 0");
    if (!(smooth_l1_delta > 0.0)) {
      throw PreconditionError("LossConfig: smooth_l1_delta must be > 0");
    }
    if (!(fallback_weight >= 0.0)) {
      throw PreconditionError("LossConfig: fallback_weight must be >= 0");
    }
  }
};

template <typename Scalar>
Scalar iou_loss(const BasicBox<Scalar>& u, const BasicBox<Scalar>& v,
                const LossConfig& cfg) {
  using std::log;
  return -log(iou(u, v) + Scalar(cfg.epsilon));
}

template <typename Scalar>
Scalar smooth_l1_loss(const BasicOffsets<Scalar>& pred,
                      const BasicOffsets<Scalar>& target,
                      const LossConfig& cfg) {
  const Scalar delta(cfg.smooth_l1_delta);
  const Eigen::Matrix<Scalar, 4, 1> d = pred.vector() - target.vector();
  Scalar total(0);
  for (int i = 0; i < 4; ++i) {
    const Scalar a = std::abs(d(i));
    total += a < delta ? Scalar(0.5) * d(i) * d(i) / delta : a - Scalar(0.5) * delta;
  }
  return total;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 4, 1> smooth_l1_grad(const BasicOffsets<Scalar>& pred,
                                           const BasicOffsets<Scalar>& target,
                                           const LossConfig& cfg) {
  const Scalar delta(cfg.smooth_l1_delta);
  const Eigen::Matrix<Scalar, 4, 1> d = pred.vector() - target.vector();
  Eigen::Matrix<Scalar, 4, 1> g;
  for (int i = 0; i < 4; ++i) {
    g(i) = std::abs(d(i)) < delta ? d(i) / delta
                                  : (d(i) > Scalar(0) ? Scalar(1) : Scalar(-1));
  }
  return g;
}

template <typename Scalar>
struct IouLossGrad {
  Scalar loss{0};
  Eigen::Matrix<Scalar, 4, 1> grad = Eigen::Matrix<Scalar, 4, 1>::Zero();
  // Set when the refined box misses the ground truth and `grad` is the
  // scaled smooth-L1 gradient toward encode_offsets(input_box, gt).
  bool fallback = false;
};

namespace detail {

// Partial derivatives of one clamped intersection extent
//   I = min(a_hi, b_hi) - max(a_lo, b_lo)
// with respect to the center and size of box a. At a tie between the two
// arguments of min or max the midpoint of the one-sided derivatives is used,
// which makes the gradient vanish at a perfect match.
template <typename Scalar>
std::pair<Scalar, Scalar> extent_partials(Scalar a_lo, Scalar a_hi, Scalar b_lo,
                                          Scalar b_hi) {
  const Scalar hi_active =
      a_hi < b_hi ? Scalar(1) : (a_hi == b_hi ? Scalar(0.5) : Scalar(0));
  const Scalar lo_active =
      a_lo > b_lo ? Scalar(1) : (a_lo == b_lo ? Scalar(0.5) : Scalar(0));
  // a_hi = c + s/2, a_lo = c - s/2
  const Scalar d_center = hi_active - lo_active;
  const Scalar d_size = Scalar(0.5) * (hi_active + lo_active);
  return {d_center, d_size};
}

}  // namespace detail

/// Loss and gradient of iou_loss(apply_offsets(input_box, pred), gt) with
/// respect to `pred`.
template <typename Scalar>
IouLossGrad<Scalar> iou_loss_grad(const BasicOffsets<Scalar>& pred,
                                  const BasicBox<Scalar>& input_box,
                                  const BasicBox<Scalar>& gt,
                                  const LossConfig& cfg) {
  const BasicBox<Scalar> r = apply_offsets(input_box, pred);
  IouLossGrad<Scalar> out;

  const Scalar iw = std::min(r.xmax(), gt.xmax()) - std::max(r.xmin(), gt.xmin());
  const Scalar ih = std::min(r.ymax(), gt.ymax()) - std::max(r.ymin(), gt.ymin());
  if (!(iw > Scalar(0)) || !(ih > Scalar(0))) {
    out.loss = -std::log(Scalar(cfg.epsilon));
    out.fallback = true;
    out.grad = Scalar(cfg.fallback_weight) *
               smooth_l1_grad(pred, encode_offsets(input_box, gt), cfg);
    return out;
  }

  const Scalar inter = iw * ih;
  const Scalar uni = r.area() + gt.area() - inter;
  const Scalar value = inter / uni;
  out.loss = -std::log(value + Scalar(cfg.epsilon));

  const auto [dwx, dww] = detail::extent_partials(r.xmin(), r.xmax(), gt.xmin(), gt.xmax());
  const auto [dhy, dhh] = detail::extent_partials(r.ymin(), r.ymax(), gt.ymin(), gt.ymax());

  // d(I/U) = dI (U + I) / U^2 - I / U^2 d(w h)
  const Scalar inv_u2 = Scalar(1) / (uni * uni);
  const Scalar d_inter = (uni + inter) * inv_u2;
  const Scalar d_area = -inter * inv_u2;

  const Scalar div_x = d_inter * dwx * ih;
  const Scalar div_y = d_inter * dhy * iw;
  const Scalar div_w = d_inter * dww * ih + d_area * r.h;
  const Scalar div_h = d_inter * dhh * iw + d_area * r.w;

  const Scalar dl_diou = Scalar(-1) / (value + Scalar(cfg.epsilon));
  // x = bx + tx bw, y = by + ty bh, w = bw e^tw, h = bh e^th
  out.grad << dl_diou * div_x * input_box.w, dl_diou * div_y * input_box.h,
      dl_diou * div_w * r.w, dl_diou * div_h * r.h;
  return out;
}

/// One regression sample: an input box and the offsets predicted for it.
struct RegressionInput {
  Box box;
  Offsets pred;
};

/// Mean IoU loss of refined inputs against their best-overlapping ground
/// truth (matched on the unrefined input box).
inline double batch_iou_loss(std::span<const RegressionInput> inputs,
                             std::span<const Box> gts, const LossConfig& cfg) {
  if (inputs.empty()) throw PreconditionError("batch_iou_loss: no inputs");
  if (gts.empty()) throw PreconditionError("batch_iou_loss: no ground truths");
  double total = 0.0;
  for (const auto& in : inputs) {
    const Box& g = gts[match_nearest_gt(in.box, gts)];
    total += iou_loss(apply_offsets(in.box, in.pred), g, cfg);
  }
  return total / static_cast<double>(inputs.size());
}

}  // namespace ubbr
