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

#include <cstddef>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

// Value-level loss definitions on predicted probabilities. The training
// graph computes the same quantities from logits (see model.hpp); these are
// the reference forms used by evaluation, reports and tests.

/// Mean −log y_pred[i, label_i] over rows with mask[i] set.
/// Throws ContractError("batch has no source rows") for an empty mask.
double scene_loss(const Tensor<double>& y_pred, const Tensor<double>& y, const std::vector<bool>& mask);

/// Mean per-row squared L2 distance between d_pred and the two-column
/// source/target labels ([0,1] source, [1,0] target).
double dann_domain_loss(const Tensor<double>& d_pred, const Tensor<double>& d2);

/// Mean over rows of ((u_i + 1) / T) · (−log d_pred[i, domain_i]).
double weighted_domain_ce(const Tensor<double>& d_pred, const Tensor<double>& d,
                          std::span<const int> u, double temperature = 10.0);

/// Mean of (pred_i − u_i)².
double regression_domain_loss(std::span<const double> pred, std::span<const double> u);

/// L_y − λ_d · L_d.
double feature_objective(double scene, double domain, double lambda_d);

/// Two-column domain labels: [0,1] for the source (index 0), [1,0] otherwise.
Tensor<double> binary_domain_labels(std::span<const int> u);

/// One-hot rows over `width` columns.
Tensor<double> one_hot(std::span<const int> labels, std::size_t width);

/// Per discrete z value, the empirical mean of the domain-label vectors seen
/// with it: the minimizer of E‖D(z) − d‖² over constant-per-z predictors.
using DiscreteSample = std::pair<int, std::vector<double>>;
std::map<int, std::vector<double>> conditional_mean_oracle(std::span<const DiscreteSample> samples);

struct TableFit {
  std::map<int, std::vector<double>> table;
  int iterations = 0;
  double final_loss = 0.0;
};

/// Trains a per-z constant discriminator (one-hot(z)·W + b) by gradient
/// descent on the mean squared L2 loss, through the autodiff graph, until
/// the largest parameter step falls below `tolerance`.
TableFit fit_table_discriminator(std::span<const DiscreteSample> samples, double learning_rate = 0.5,
                                 int max_iterations = 20000, double tolerance = 1e-9);

}  // namespace mtda
