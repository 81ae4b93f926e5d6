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

// The regression head: three affine layers with rectifiers in between,
// mapping RoI-pooled features to box offsets.

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ubbr/box.hpp"
#include "ubbr/feature_map.hpp"
#include "ubbr/sampler.hpp"

namespace ubbr {

struct HeadShape {
  std::size_t pool_size = 7;
  std::size_t channels = 3;
  std::size_t hidden1 = 256;
  std::size_t hidden2 = 256;

  std::size_t input_width() const { return channels * pool_size * pool_size; }
  friend bool operator==(const HeadShape&, const HeadShape&) = default;
};

struct RegressorModel {
  HeadShape shape;
  Eigen::MatrixXd w1, w2, w3;  // (out x in)
  Eigen::VectorXd b1, b2, b3;

  /// All parameters zero: forward() returns zero offsets for any input.
  static RegressorModel zeros(const HeadShape& shape);
  /// Weights ~ N(0, std^2), biases 0.
  static RegressorModel gaussian(const HeadShape& shape, double std, Rng& rng);

  std::size_t input_width() const { return shape.input_width(); }
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Throws PreconditionError when matrix sizes disagree with `shape`.
  void check_dimensions() const;

  friend bool operator==(const RegressorModel&, const RegressorModel&) = default;
};

/// Parameter-shaped gradient buffer (also used for momentum).
struct HeadGradient {
  Eigen::MatrixXd w1, w2, w3;
  Eigen::VectorXd b1, b2, b3;

  static HeadGradient zeros_like(const RegressorModel& m);
  void set_zero();
};

/// Activations kept from a batched forward pass for backpropagation.
struct ForwardCache {
  Eigen::MatrixXd input;  // in x N
  Eigen::MatrixXd a1;     // relu(w1 x + b1), h1 x N
  Eigen::MatrixXd a2;     // relu(w2 a1 + b2), h2 x N
  Eigen::MatrixXd out;    // w3 a2 + b3, 4 x N
};

Offsets forward(const RegressorModel& model, const Eigen::VectorXd& features);

/// Column-wise forward pass over a feature matrix (in x N); returns 4 x N.
Eigen::MatrixXd forward_batch(const RegressorModel& model, const Eigen::MatrixXd& features);

/// Forward pass that also records activations; `features` is moved in.
const ForwardCache& forward_batch(const RegressorModel& model, Eigen::MatrixXd features,
                                  ForwardCache& cache);

/// Accumulates the parameter gradient given dL/d(out) (4 x N) into `grad`.
void backward_batch(const RegressorModel& model, const ForwardCache& cache,
                    const Eigen::MatrixXd& d_out, HeadGradient& grad);

/// Flat parameter view helpers, in serialization order
/// (w1 row-major, b1, w2, b2, w3, b3).
std::vector<double> flatten_parameters(const RegressorModel& model);
void assign_parameters(RegressorModel& model, std::span<const double> values);
std::vector<double> flatten_gradient(const HeadGradient& grad);

// Binary model container: "UBBR1", then four little-endian uint64 values
// (pool_size, channels, hidden1, hidden2), then every parameter as a
// little-endian IEEE-754 double in flatten_parameters order.
void write_model(std::ostream& os, const RegressorModel& model);
RegressorModel read_model(std::istream& is);
void save_model(const std::filesystem::path& path, const RegressorModel& model);
RegressorModel load_model(const std::filesystem::path& path);

}  // namespace ubbr
