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

// A dense multi-channel raster standing in for a convolutional feature map,
// and RoI-Align pooling over it.

#include <Eigen/Core>

#include <cstddef>

#include "ubbr/box.hpp"

namespace ubbr {

/// channels x height x width values, channel-major. Cell (y, x) covers image
/// pixels [x * stride, (x + 1) * stride) and its value sits at the cell
/// center.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double stride = 1.0);

  std::size_t channels() const { return channels_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  double stride() const { return stride_; }
  bool empty() const { return data_.size() == 0; }

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[static_cast<Eigen::Index>((c * height_ + y) * width_ + x)];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[static_cast<Eigen::Index>((c * height_ + y) * width_ + x)];
  }

  /// Bilinear read at fractional cell coordinates; cells outside the map
  /// read as zero.
  double sample(std::size_t c, double fy, double fx) const;

  const Eigen::VectorXd& data() const { return data_; }
  Eigen::VectorXd& data() { return data_; }

  bool all_finite() const { return data_.allFinite(); }

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  double stride_ = 1.0;
  Eigen::VectorXd data_;
};

/// Pools `b` (image coordinates) into a pool_size x pool_size grid per
/// channel, sampling each bin once at its center. The result has length
/// channels * pool_size^2, channel-major then row-major.
Eigen::VectorXd roi_align(const FeatureMap& fm, const Box& b, std::size_t pool_size);

/// Writes the pooled features into `out`, which must already have the
/// right length.
void roi_align_into(const FeatureMap& fm, const Box& b, std::size_t pool_size,
                    Eigen::Ref<Eigen::VectorXd> out);

}  // namespace ubbr
