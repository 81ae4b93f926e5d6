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

// Reference implementations used only by tests. They are written from the
// definitions, without calling the library code they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

namespace oracle {

struct Rect {
  double xmin, ymin, xmax, ymax;
};

inline Rect rect(double cx, double cy, double w, double h) {
  return {cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

/// IoU by counting cell centers of an n x n raster laid over the union's
/// bounding rectangle.
inline double raster_iou(const Rect& a, const Rect& b, int n = 1000) {
  const double x0 = std::min(a.xmin, b.xmin), x1 = std::max(a.xmax, b.xmax);
  const double y0 = std::min(a.ymin, b.ymin), y1 = std::max(a.ymax, b.ymax);
  const double dx = (x1 - x0) / n, dy = (y1 - y0) / n;
  // Per-column and per-row membership, then count products: the raster is
  // separable for rectangles.
  std::vector<char> ax(n), bx(n), ay(n), by(n);
  for (int i = 0; i < n; ++i) {
    const double px = x0 + (i + 0.5) * dx, py = y0 + (i + 0.5) * dy;
    ax[i] = px >= a.xmin && px < a.xmax;
    bx[i] = px >= b.xmin && px < b.xmax;
    ay[i] = py >= a.ymin && py < a.ymax;
    by[i] = py >= b.ymin && py < b.ymax;
  }
  long long inter = 0, uni = 0;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const bool in_a = ax[i] && ay[j], in_b = bx[i] && by[j];
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni == 0 ? 0.0 : double(inter) / double(uni);
}

/// Closed-form IoU written out independently of the library.
inline double plain_iou(const Rect& a, const Rect& b) {
  const double iw = std::min(a.xmax, b.xmax) - std::max(a.xmin, b.xmin);
  const double ih = std::min(a.ymax, b.ymax) - std::max(a.ymin, b.ymin);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double area_a = (a.xmax - a.xmin) * (a.ymax - a.ymin);
  const double area_b = (b.xmax - b.xmin) * (b.ymax - b.ymin);
  return inter / (area_a + area_b - inter);
}

/// Central differences of f at x with step h.
inline Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x, double h = 1e-5) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                             double floor = 1e-8) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

struct Image {
  std::vector<Rect> predictions;  // ranked
  std::vector<Rect> gts;
};

/// CorLoc in percent: an image counts when its first prediction overlaps
/// some ground truth by strictly more than one half.
inline double corloc(const std::vector<Image>& images) {
  if (images.empty()) return 0.0;
  int hits = 0;
  for (const Image& im : images) {
    if (im.predictions.empty()) continue;
    bool hit = false;
    for (const Rect& g : im.gts) hit = hit || plain_iou(im.predictions.front(), g) > 0.5;
    hits += hit;
  }
  return 100.0 * hits / double(images.size());
}

/// Covered-or-not recall over the first k predictions of each image.
inline double recall(const std::vector<Image>& images, double thresh, std::size_t k) {
  int covered = 0, total = 0;
  for (const Image& im : images)
    for (const Rect& g : im.gts) {
      ++total;
      bool hit = false;
      for (std::size_t i = 0; i < std::min(k, im.predictions.size()); ++i)
        hit = hit || plain_iou(im.predictions[i], g) > thresh;
      covered += hit;
    }
  return total == 0 ? 0.0 : double(covered) / total;
}

/// Bilinear read of a row-major h x w grid at fractional (fy, fx), with
/// zeros outside.
inline double bilinear(const std::vector<double>& grid, int h, int w, double fy, double fx) {
  const auto at = [&](int y, int x) {
    return (y < 0 || x < 0 || y >= h || x >= w) ? 0.0 : grid[std::size_t(y * w + x)];
  };
  const int y0 = int(std::floor(fy)), x0 = int(std::floor(fx));
  const double ty = fy - y0, tx = fx - x0;
  return (1 - ty) * ((1 - tx) * at(y0, x0) + tx * at(y0, x0 + 1)) +
         ty * ((1 - tx) * at(y0 + 1, x0) + tx * at(y0 + 1, x0 + 1));
}

}  // namespace oracle
