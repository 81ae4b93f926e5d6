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

#include "ubbr/feature_map.hpp"

#include <cmath>

#include "ubbr/errors.hpp"

namespace ubbr {

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width,
                       double stride)
    : channels_(channels), height_(height), width_(width), stride_(stride) {
  if (channels == 0 || height == 0 || width == 0) {
    throw PreconditionError("FeatureMap: dimensions must be >= 1");
  }
  if (!(stride > 0.0)) throw PreconditionError("FeatureMap: stride must be > 0");
  data_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(channels * height * width));
}

double FeatureMap::sample(std::size_t c, double fy, double fx) const {
  const double y0f = std::floor(fy);
  const double x0f = std::floor(fx);
  const double ly = fy - y0f;
  const double lx = fx - x0f;
  const auto h = static_cast<long>(height_);
  const auto w = static_cast<long>(width_);
  if (y0f < -1.0 || x0f < -1.0 || y0f >= double(h) || x0f >= double(w)) return 0.0;
  const auto y0 = static_cast<long>(y0f);
  const auto x0 = static_cast<long>(x0f);

  auto read = [&](long y, long x) -> double {
    if (y < 0 || x < 0 || y >= h || x >= w) return 0.0;
    return at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  return (1.0 - ly) * ((1.0 - lx) * read(y0, x0) + lx * read(y0, x0 + 1)) +
         ly * ((1.0 - lx) * read(y0 + 1, x0) + lx * read(y0 + 1, x0 + 1));
}

void roi_align_into(const FeatureMap& fm, const Box& b, std::size_t pool_size,
                    Eigen::Ref<Eigen::VectorXd> out) {
  const std::size_t bins = pool_size * pool_size;
  if (static_cast<std::size_t>(out.size()) != fm.channels() * bins) {
    throw PreconditionError("roi_align: output has the wrong length");
  }
  const double inv_stride = 1.0 / fm.stride();
  const double bin_w = b.w / double(pool_size);
  const double bin_h = b.h / double(pool_size);
  const double x_start = b.xmin();
  const double y_start = b.ymin();
  for (std::size_t iy = 0; iy < pool_size; ++iy) {
    const double fy = (y_start + (double(iy) + 0.5) * bin_h) * inv_stride - 0.5;
    for (std::size_t ix = 0; ix < pool_size; ++ix) {
      const double fx = (x_start + (double(ix) + 0.5) * bin_w) * inv_stride - 0.5;
      for (std::size_t c = 0; c < fm.channels(); ++c) {
        out[static_cast<Eigen::Index>(c * bins + iy * pool_size + ix)] = fm.sample(c, fy, fx);
      }
    }
  }
}

Eigen::VectorXd roi_align(const FeatureMap& fm, const Box& b, std::size_t pool_size) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(fm.channels() * pool_size * pool_size));
  roi_align_into(fm, b, pool_size, out);
  return out;
}

}  // namespace ubbr
