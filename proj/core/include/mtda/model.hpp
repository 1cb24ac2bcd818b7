/*
 * Copyright 2026 The MTDA Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mtda/checkpoint.hpp"
#include "mtda/graph.hpp"

namespace mtda {

/// Discriminator task.
///   kDann  : two-way source/target output, squared-L2 loss on softmax.
///   kMtdaC1: M-way domain classification, plain cross-entropy.
///   kMtdaC2: M-way domain classification, cross-entropy weighted by (u+1)/T.
///   kMtdaR : scalar regression of the domain index u, squared error.
enum class DiscriminatorMode { kDann = 0, kMtdaC1 = 1, kMtdaC2 = 2, kMtdaR = 3 };

const char* to_string(DiscriminatorMode mode);
DiscriminatorMode parse_mode(const std::string& name);
bool is_classification(DiscriminatorMode mode);
std::size_t discriminator_width(DiscriminatorMode mode, std::size_t num_domains);

/// Layer sizes. Feature: two conv3×3/ReLU/avg-pool blocks, global average
/// pool, dense to `feature_dim`. Classifier: dense to num_classes.
/// Discriminator: dense to `hidden`, ReLU, dense to the mode's width.
struct ModelShape {
  std::size_t num_classes = 10;
  std::size_t num_domains = 2;
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t feature_dim = 64;
  std::size_t hidden = 32;

  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

enum class Part { kFeature, kClassifier, kDiscriminator };
Part part_of(const std::string& param_name);

/// Per-sample supervision for one minibatch.
template <typename T>
struct Batch {
  Tensor<T> x;              // n × 1 × frames × bands
  std::vector<int> scene;   // class id, −1 for unlabeled rows
  std::vector<int> domain;  // domain index u (source = 0)
};

struct ForwardNodes {
  NodeId z;
  NodeId class_logits;
  NodeId y_pred;
  NodeId domain_out;  // logits (classification modes) or raw scalar (regression)
  NodeId d_pred;      // softmax(domain_out) or domain_out for regression
};

struct LossNodes {
  ForwardNodes out;
  NodeId scene;
  NodeId domain;
  NodeId total;
};

struct LossOptions {
  double lambda_d = 1.0;
  double temperature = 10.0;
  bool normalize_regression_target = false;
  bool include_domain = true;  // false: supervised-only graph without D
};

/// Feature, Classifier and Discriminator parameters for one mode. The
/// discriminator head width is derived from the mode, so a model with a
/// mismatched head cannot be constructed.
template <typename T>
class AdversarialModel {
 public:
  AdversarialModel(DiscriminatorMode mode, ModelShape shape, std::uint64_t seed);

  DiscriminatorMode mode() const { return mode_; }
  const ModelShape& shape() const { return shape_; }
  ParameterStore<T>& params() { return params_; }
  const ParameterStore<T>& params() const { return params_; }

  /// z = F(x), y_pred = softmax(C(z)), d_pred = D(GRL_λ(z)) (softmax-ed for
  /// classification modes).
  ForwardNodes forward(Graph<T>& g, const Tensor<T>& x, double lambda_d) const;

  /// Scene loss (mean CE over labeled rows) plus the mode's domain loss.
  LossNodes build_loss(Graph<T>& g, const Batch<T>& batch, const LossOptions& options) const;

  std::vector<NamedTensor> to_entries() const;
  static AdversarialModel from_entries(const std::vector<NamedTensor>& entries);
  void save(const std::filesystem::path& path) const { write_container(path, to_entries()); }
  static AdversarialModel load(const std::filesystem::path& path) {
    return from_entries(read_container(path));
  }

 private:
  AdversarialModel(DiscriminatorMode mode, ModelShape shape);
  void declare(std::uint64_t seed, bool init);

  DiscriminatorMode mode_;
  ModelShape shape_;
  ParameterStore<T> params_;
};

extern template class AdversarialModel<float>;
extern template class AdversarialModel<double>;

}  // namespace mtda
