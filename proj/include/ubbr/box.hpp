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

// Axis-aligned box algebra in center parameterization.
//
// A box is (x, y, w, h): center abscissa, center ordinate, width, height,
// all in raster units. Offsets (tx, ty, tw, th) relate two boxes:
//
//   x' = x + tx * w      w' = w * exp(tw)
//   y' = y + ty * h      h' = h * exp(th)
//
// Everything here is templated on the scalar type; the rest of the library
// instantiates it with double through the Box / Offsets aliases.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <type_traits>
#include <utility>

#include "ubbr/errors.hpp"

namespace ubbr {

template <typename Scalar>
struct BasicBox {
  Scalar x{0};
  Scalar y{0};
  Scalar w{1};
  Scalar h{1};

  Scalar area() const { return w * h; }
  Scalar xmin() const { return x - Scalar(0.5) * w; }
  Scalar xmax() const { return x + Scalar(0.5) * w; }
  Scalar ymin() const { return y - Scalar(0.5) * h; }
  Scalar ymax() const { return y + Scalar(0.5) * h; }

  friend bool operator==(const BasicBox&, const BasicBox&) = default;
};

template <typename Scalar>
struct BasicOffsets {
  Scalar tx{0};
  Scalar ty{0};
  Scalar tw{0};
  Scalar th{0};

  Eigen::Matrix<Scalar, 4, 1> vector() const { return {tx, ty, tw, th}; }

  static BasicOffsets from_vector(const Eigen::Matrix<Scalar, 4, 1>& v) {
    return {v(0), v(1), v(2), v(3)};
  }

  friend bool operator==(const BasicOffsets&, const BasicOffsets&) = default;
};

template <typename Scalar>
struct BasicCorners {
  Scalar xmin{0};
  Scalar ymin{0};
  Scalar xmax{1};
  Scalar ymax{1};

  friend bool operator==(const BasicCorners&, const BasicCorners&) = default;
};

using Box = BasicBox<double>;
using Offsets = BasicOffsets<double>;
using Corners = BasicCorners<double>;

template <typename Scalar>
bool is_valid(const BasicBox<Scalar>& b) {
  using std::isfinite;
  return isfinite(b.x) && isfinite(b.y) && isfinite(b.w) && isfinite(b.h) &&
         b.w > Scalar(0) && b.h > Scalar(0);
}

template <typename Scalar>
bool is_valid(const BasicOffsets<Scalar>& d) {
  using std::isfinite;
  return isfinite(d.tx) && isfinite(d.ty) && isfinite(d.tw) && isfinite(d.th);
}

/// Intersection extents along x and y, clamped at zero. Boxes that only share
/// an edge have a zero extent.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> intersection_extent(const BasicBox<Scalar>& u,
                                                const BasicBox<Scalar>& v) {
  using std::max;
  using std::min;
  Scalar iw = min(u.xmax(), v.xmax()) - max(u.xmin(), v.xmin());
  Scalar ih = min(u.ymax(), v.ymax()) - max(u.ymin(), v.ymin());
  return {max(iw, Scalar(0)), max(ih, Scalar(0))};
}

template <typename Scalar>
Scalar iou(const BasicBox<Scalar>& u, const BasicBox<Scalar>& v) {
  const auto ext = intersection_extent(u, v);
  const Scalar inter = ext(0) * ext(1);
  if (inter <= Scalar(0)) return Scalar(0);
  const Scalar uni = u.area() + v.area() - inter;
  return inter / uni;
}

template <typename Scalar>
BasicBox<Scalar> apply_offsets(const BasicBox<Scalar>& b,
                               const BasicOffsets<Scalar>& d) {
  using std::exp;
  BasicBox<Scalar> out{b.x + d.tx * b.w, b.y + d.ty * b.h, b.w * exp(d.tw),
                       b.h * exp(d.th)};
  if (!is_valid(out)) {
    throw NumericError("apply_offsets: refined box is not finite (tw=" +
                       std::to_string(double(d.tw)) +
                       ", th=" + std::to_string(double(d.th)) + ")");
  }
  return out;
}

template <typename Scalar>
BasicOffsets<Scalar> encode_offsets(const BasicBox<Scalar>& b,
                                    const BasicBox<Scalar>& g) {
  using std::log;
  return {(g.x - b.x) / b.w, (g.y - b.y) / b.h, log(g.w / b.w), log(g.h / b.h)};
}

/// Index of the ground truth with the largest IoU against `b`. Ties go to
/// the lowest index, so a box overlapping nothing matches index 0.
template <typename Scalar>
std::size_t match_nearest_gt(
    const BasicBox<Scalar>& b,
    std::type_identity_t<std::span<const BasicBox<Scalar>>> gts) {
  if (gts.empty()) {
    throw PreconditionError("match_nearest_gt: ground-truth list is empty");
  }
  std::size_t best = 0;
  Scalar best_iou = iou(b, gts[0]);
  for (std::size_t i = 1; i < gts.size(); ++i) {
    const Scalar v = iou(b, gts[i]);
    if (v > best_iou) {
      best_iou = v;
      best = i;
    }
  }
  return best;
}

template <typename Scalar>
BasicCorners<Scalar> corner_from_center(const BasicBox<Scalar>& b) {
  return {b.xmin(), b.ymin(), b.xmax(), b.ymax()};
}

template <typename Scalar>
BasicBox<Scalar> center_from_corner(const BasicCorners<Scalar>& c) {
  if (!(c.xmax > c.xmin) || !(c.ymax > c.ymin)) {
    throw PreconditionError("center_from_corner: degenerate corner box");
  }
  return {Scalar(0.5) * (c.xmin + c.xmax), Scalar(0.5) * (c.ymin + c.ymax),
          c.xmax - c.xmin, c.ymax - c.ymin};
}

/// Clips a box to [0, width] x [0, height], keeping each side at least
/// `min_side` long.
template <typename Scalar>
BasicBox<Scalar> clip_to_image(const BasicBox<Scalar>& b, Scalar width,
                               Scalar height, Scalar min_side = Scalar(1)) {
  using std::clamp;
  using std::max;
  using std::min;
  auto clip_axis = [&](Scalar lo, Scalar hi, Scalar extent) {
    const Scalar side = min(min_side, extent);
    lo = clamp(lo, Scalar(0), extent);
    hi = clamp(hi, Scalar(0), extent);
    if (hi - lo < side) {
      const Scalar mid = clamp(Scalar(0.5) * (lo + hi), side / 2, extent - side / 2);
      lo = mid - side / 2;
      hi = mid + side / 2;
    }
    return std::pair<Scalar, Scalar>{lo, hi};
  };
  const auto [x0, x1] = clip_axis(b.xmin(), b.xmax(), width);
  const auto [y0, y1] = clip_axis(b.ymin(), b.ymax(), height);
  return {Scalar(0.5) * (x0 + x1), Scalar(0.5) * (y0 + y1), x1 - x0, y1 - y0};
}

}  // namespace ubbr
