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

#include "ubbr/regressor.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <string>

#include "ubbr/errors.hpp"
#include "ubbr/io.hpp"

namespace ubbr {
namespace {

constexpr const char* kModelMagic = "UBBR1";

Eigen::Index idx(std::size_t n) { return static_cast<Eigen::Index>(n); }

template <typename Fn>
void for_each_block(const RegressorModel& m, Fn&& fn) {
  fn(m.w1);
  fn(m.b1);
  fn(m.w2);
  fn(m.b2);
  fn(m.w3);
  fn(m.b3);
}

template <typename Fn>
void for_each_block(RegressorModel& m, Fn&& fn) {
  fn(m.w1);
  fn(m.b1);
  fn(m.w2);
  fn(m.b2);
  fn(m.w3);
  fn(m.b3);
}

// Row-major traversal so the flat order matches the file layout.
template <typename Derived, typename Fn>
void visit_row_major(const Eigen::MatrixBase<Derived>& x, Fn&& fn) {
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) fn(x(r, c));
  }
}

}  // namespace

RegressorModel RegressorModel::zeros(const HeadShape& shape) {
  if (shape.pool_size == 0 || shape.channels == 0 || shape.hidden1 == 0 || shape.hidden2 == 0) {
    throw PreconditionError("HeadShape: all sizes must be >= 1");
  }
  RegressorModel m;
  m.shape = shape;
  m.w1 = Eigen::MatrixXd::Zero(idx(shape.hidden1), idx(shape.input_width()));
  m.b1 = Eigen::VectorXd::Zero(idx(shape.hidden1));
  m.w2 = Eigen::MatrixXd::Zero(idx(shape.hidden2), idx(shape.hidden1));
  m.b2 = Eigen::VectorXd::Zero(idx(shape.hidden2));
  m.w3 = Eigen::MatrixXd::Zero(4, idx(shape.hidden2));
  m.b3 = Eigen::VectorXd::Zero(4);
  return m;
}

RegressorModel RegressorModel::gaussian(const HeadShape& shape, double std, Rng& rng) {
  if (!(std >= 0.0)) throw PreconditionError("init std must be >= 0");
  RegressorModel m = zeros(shape);
  std::normal_distribution<double> dist(0.0, std > 0.0 ? std : 1.0);
  auto fill = [&](Eigen::MatrixXd& w) {
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = std > 0.0 ? dist(rng) : 0.0;
    }
  };
  fill(m.w1);
  fill(m.w2);
  fill(m.w3);
  return m;
}

std::size_t RegressorModel::parameter_count() const {
  std::size_t n = 0;
  for_each_block(*this, [&](const auto& x) { n += static_cast<std::size_t>(x.size()); });
  return n;
}

bool RegressorModel::all_finite() const {
  bool ok = true;
  for_each_block(*this, [&](const auto& x) { ok = ok && x.allFinite(); });
  return ok;
}

void RegressorModel::check_dimensions() const {
  const bool ok = w1.rows() == idx(shape.hidden1) && w1.cols() == idx(shape.input_width()) &&
                  b1.size() == idx(shape.hidden1) && w2.rows() == idx(shape.hidden2) &&
                  w2.cols() == idx(shape.hidden1) && b2.size() == idx(shape.hidden2) &&
                  w3.rows() == 4 && w3.cols() == idx(shape.hidden2) && b3.size() == 4;
  if (!ok) throw PreconditionError("RegressorModel: parameter sizes disagree with head shape");
}

HeadGradient HeadGradient::zeros_like(const RegressorModel& m) {
  HeadGradient g;
  g.w1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
  g.b1 = Eigen::VectorXd::Zero(m.b1.size());
  g.w2 = Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols());
  g.b2 = Eigen::VectorXd::Zero(m.b2.size());
  g.w3 = Eigen::MatrixXd::Zero(m.w3.rows(), m.w3.cols());
  g.b3 = Eigen::VectorXd::Zero(m.b3.size());
  return g;
}

void HeadGradient::set_zero() {
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
  w3.setZero();
  b3.setZero();
}

Offsets forward(const RegressorModel& model, const Eigen::VectorXd& features) {
  if (static_cast<std::size_t>(features.size()) != model.input_width()) {
    throw PreconditionError("forward: feature length " + std::to_string(features.size()) +
                            " does not match model input width " +
                            std::to_string(model.input_width()));
  }
  const Eigen::VectorXd a1 = (model.w1 * features + model.b1).cwiseMax(0.0);
  const Eigen::VectorXd a2 = (model.w2 * a1 + model.b2).cwiseMax(0.0);
  const Eigen::Vector4d out = model.w3 * a2 + model.b3;
  return Offsets::from_vector(out);
}

Eigen::MatrixXd forward_batch(const RegressorModel& model, const Eigen::MatrixXd& features) {
  if (static_cast<std::size_t>(features.rows()) != model.input_width()) {
    throw PreconditionError("forward_batch: feature rows do not match model input width");
  }
  Eigen::MatrixXd a1 = ((model.w1 * features).colwise() + model.b1).cwiseMax(0.0);
  Eigen::MatrixXd a2 = ((model.w2 * a1).colwise() + model.b2).cwiseMax(0.0);
  return (model.w3 * a2).colwise() + model.b3;
}

const ForwardCache& forward_batch(const RegressorModel& model, Eigen::MatrixXd features,
                                  ForwardCache& cache) {
  if (static_cast<std::size_t>(features.rows()) != model.input_width()) {
    throw PreconditionError("forward_batch: feature rows do not match model input width");
  }
  cache.input = std::move(features);
  cache.a1.noalias() = model.w1 * cache.input;
  cache.a1 = (cache.a1.colwise() + model.b1).cwiseMax(0.0);
  cache.a2.noalias() = model.w2 * cache.a1;
  cache.a2 = (cache.a2.colwise() + model.b2).cwiseMax(0.0);
  cache.out.noalias() = model.w3 * cache.a2;
  cache.out.colwise() += model.b3;
  return cache;
}

void backward_batch(const RegressorModel& model, const ForwardCache& cache,
                    const Eigen::MatrixXd& d_out, HeadGradient& grad) {
  grad.w3.noalias() += d_out * cache.a2.transpose();
  grad.b3 += d_out.rowwise().sum();

  Eigen::MatrixXd d2 = model.w3.transpose() * d_out;
  d2 = d2.cwiseProduct((cache.a2.array() > 0.0).cast<double>().matrix());
  grad.w2.noalias() += d2 * cache.a1.transpose();
  grad.b2 += d2.rowwise().sum();

  Eigen::MatrixXd d1 = model.w2.transpose() * d2;
  d1 = d1.cwiseProduct((cache.a1.array() > 0.0).cast<double>().matrix());
  grad.w1.noalias() += d1 * cache.input.transpose();
  grad.b1 += d1.rowwise().sum();
}

std::vector<double> flatten_parameters(const RegressorModel& model) {
  std::vector<double> out;
  out.reserve(model.parameter_count());
  for_each_block(model, [&](const auto& x) { visit_row_major(x, [&](double v) { out.push_back(v); }); });
  return out;
}

std::vector<double> flatten_gradient(const HeadGradient& g) {
  std::vector<double> out;
  visit_row_major(g.w1, [&](double v) { out.push_back(v); });
  visit_row_major(g.b1, [&](double v) { out.push_back(v); });
  visit_row_major(g.w2, [&](double v) { out.push_back(v); });
  visit_row_major(g.b2, [&](double v) { out.push_back(v); });
  visit_row_major(g.w3, [&](double v) { out.push_back(v); });
  visit_row_major(g.b3, [&](double v) { out.push_back(v); });
  return out;
}

void assign_parameters(RegressorModel& model, std::span<const double> values) {
  if (values.size() != model.parameter_count()) {
    throw PreconditionError("assign_parameters: expected " +
                            std::to_string(model.parameter_count()) + " values, got " +
                            std::to_string(values.size()));
  }
  std::size_t k = 0;
  for_each_block(model, [&](auto& x) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = values[k++];
    }
  });
}

void write_model(std::ostream& os, const RegressorModel& model) {
  model.check_dimensions();
  io::write_magic(os, kModelMagic);
  io::write_u64_le(os, model.shape.pool_size);
  io::write_u64_le(os, model.shape.channels);
  io::write_u64_le(os, model.shape.hidden1);
  io::write_u64_le(os, model.shape.hidden2);
  for (double v : flatten_parameters(model)) io::write_f64_le(os, v);
}

RegressorModel read_model(std::istream& is) {
  io::expect_magic(is, kModelMagic);
  HeadShape shape;
  shape.pool_size = io::read_u64_le(is);
  shape.channels = io::read_u64_le(is);
  shape.hidden1 = io::read_u64_le(is);
  shape.hidden2 = io::read_u64_le(is);
  constexpr std::uint64_t kLimit = 1U << 16;
  if (shape.pool_size == 0 || shape.channels == 0 || shape.hidden1 == 0 || shape.hidden2 == 0 ||
      shape.pool_size > kLimit || shape.channels > kLimit || shape.hidden1 > kLimit ||
      shape.hidden2 > kLimit) {
    throw DataError("model container: implausible head dimensions");
  }
  RegressorModel model = RegressorModel::zeros(shape);
  std::vector<double> values(model.parameter_count());
  for (double& v : values) v = io::read_f64_le(is);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw DataError("model container: trailing bytes after parameters");
  }
  assign_parameters(model, values);
  if (!model.all_finite()) throw DataError("model container: non-finite parameter");
  return model;
}

void save_model(const std::filesystem::path& path, const RegressorModel& model) {
  io::write_atomic(path, [&](std::ostream& os) { write_model(os, model); }, true);
}

RegressorModel load_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open model file " + path.string());
  return read_model(is);
}

}  // namespace ubbr
