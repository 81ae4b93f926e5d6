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

// Gradient check of the composed objective
//   features -> head -> offsets -> refined box -> IoU loss
// with respect to every head parameter.

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "oracles.hpp"
#include "ubbr/loss.hpp"
#include "ubbr/regressor.hpp"

namespace headcheck {

struct Sample {
  ubbr::RegressorModel model;
  Eigen::VectorXd features;
  ubbr::Box input;
  ubbr::Box gt;
};

inline double objective(const ubbr::RegressorModel& m, const Sample& s,
                        const ubbr::LossConfig& cfg) {
  const ubbr::Offsets d = ubbr::forward(m, s.features);
  return ubbr::iou_loss(ubbr::apply_offsets(s.input, d), s.gt, cfg);
}

inline Eigen::VectorXd analytic(const Sample& s, const ubbr::LossConfig& cfg) {
  ubbr::ForwardCache cache;
  Eigen::MatrixXd x = s.features;
  ubbr::forward_batch(s.model, std::move(x), cache);
  const ubbr::Offsets d = ubbr::Offsets::from_vector(cache.out.col(0));
  Eigen::MatrixXd d_out = ubbr::iou_loss_grad(d, s.input, s.gt, cfg).grad;
  auto grad = ubbr::HeadGradient::zeros_like(s.model);
  ubbr::backward_batch(s.model, cache, d_out, grad);
  const auto flat = ubbr::flatten_gradient(grad);
  return Eigen::Map<const Eigen::VectorXd>(flat.data(), Eigen::Index(flat.size()));
}

inline Eigen::VectorXd numeric(const Sample& s, const ubbr::LossConfig& cfg, double h) {
  const auto flat = ubbr::flatten_parameters(s.model);
  const Eigen::VectorXd p0 = Eigen::Map<const Eigen::VectorXd>(flat.data(), Eigen::Index(flat.size()));
  ubbr::RegressorModel work = s.model;
  const auto f = [&](const Eigen::VectorXd& p) {
    ubbr::assign_parameters(work, std::span<const double>(p.data(), std::size_t(p.size())));
    return objective(work, s, cfg);
  };
  return oracle::central_diff(f, p0, h);
}

/// Parameter `k` in the flat row-major order of flatten_parameters.
inline double& parameter(ubbr::RegressorModel& m, std::size_t k) {
  for (Eigen::MatrixXd* w : {&m.w1, &m.w2, &m.w3}) {
    const std::size_t n = std::size_t(w->size());
    if (k < n) return (*w)(Eigen::Index(k / std::size_t(w->cols())), Eigen::Index(k % std::size_t(w->cols())));
    k -= n;
    Eigen::VectorXd& b = w == &m.w1 ? m.b1 : w == &m.w2 ? m.b2 : m.b3;
    if (k < std::size_t(b.size())) return b[Eigen::Index(k)];
    k -= std::size_t(b.size());
  }
  throw std::out_of_range("parameter index");
}

/// Central differences along the listed parameter indices only; large heads
/// have too many parameters to difference them all.
inline Eigen::VectorXd numeric_at(const Sample& s, const ubbr::LossConfig& cfg, double h,
                                  const std::vector<std::size_t>& indices) {
  ubbr::RegressorModel work = s.model;
  Eigen::VectorXd g(Eigen::Index(indices.size()));
  for (std::size_t k = 0; k < indices.size(); ++k) {
    double& v = parameter(work, indices[k]);
    const double orig = v;
    v = orig + h;
    const double fp = objective(work, s, cfg);
    v = orig - h;
    const double fm = objective(work, s, cfg);
    v = orig;
    g[Eigen::Index(k)] = (fp - fm) / (2 * h);
  }
  return g;
}

/// Smallest distance of any quantity whose sign flips a branch (rectifier
/// inputs, edge orderings) from its switch point; samples too close to a
/// kink are not in the smooth region.
inline double kink_margin(const Sample& s) {
  const auto& m = s.model;
  const Eigen::VectorXd z1 = m.w1 * s.features + m.b1;
  const Eigen::VectorXd a1 = z1.cwiseMax(0.0);
  const Eigen::VectorXd z2 = m.w2 * a1 + m.b2;
  double margin = std::min(z1.cwiseAbs().minCoeff(), z2.cwiseAbs().minCoeff());
  const ubbr::Box r = ubbr::apply_offsets(s.input, ubbr::forward(m, s.features));
  const ubbr::Box& g = s.gt;
  const double scale = std::max({r.w, r.h, g.w, g.h});
  for (double d : {r.xmin() - g.xmin(), r.xmax() - g.xmax(), r.ymin() - g.ymin(),
                   r.ymax() - g.ymax(), r.xmin() - g.xmax(), r.xmax() - g.xmin(),
                   r.ymin() - g.ymax(), r.ymax() - g.ymin()})
    margin = std::min(margin, std::abs(d) / scale);
  return margin;
}

}  // namespace headcheck
