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

#include "mtda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "mtda/errors.hpp"
#include "mtda/graph.hpp"

namespace mtda {
namespace {

void require_rank2(const Tensor<double>& t, const char* what) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(what) + ": expected rank 2, got " + dims_to_string(t.dims()));
  }
}

std::size_t hot_column(const Tensor<double>& onehot, std::size_t row, const char* what) {
  std::size_t hot = onehot.dim(1);
  for (std::size_t j = 0; j < onehot.dim(1); ++j) {
    double v = onehot.at(row, j);
    if (v == 1.0 && hot == onehot.dim(1)) {
      hot = j;
    } else if (v != 0.0) {
      hot = onehot.dim(1) + 1;
      break;
    }
  }
  if (hot >= onehot.dim(1)) {
    throw ContractError(std::string(what) + ": row " + std::to_string(row) + " is not one-hot");
  }
  return hot;
}

double neg_log(double p) {
  if (!(p > 0.0)) return std::numeric_limits<double>::infinity();
  return -std::log(p);
}

}  // namespace

double scene_loss(const Tensor<double>& y_pred, const Tensor<double>& y, const std::vector<bool>& mask) {
  require_rank2(y_pred, "scene_loss");
  require_same_dims(y_pred.dims(), y.dims(), "scene_loss");
  if (mask.size() != y_pred.dim(0)) {
    throw ShapeError("scene_loss: mask has " + std::to_string(mask.size()) + " rows, predictions have " +
                     std::to_string(y_pred.dim(0)));
  }
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    total += neg_log(y_pred.at(i, hot_column(y, i, "scene_loss")));
    ++count;
  }
  if (count == 0) throw ContractError("batch has no source rows");
  return total / static_cast<double>(count);
}

double dann_domain_loss(const Tensor<double>& d_pred, const Tensor<double>& d2) {
  require_rank2(d_pred, "dann_domain_loss");
  if (d_pred.dim(1) != 2) {
    throw ShapeError("dann_domain_loss: expected width 2, got " + dims_to_string(d_pred.dims()));
  }
  require_same_dims(d_pred.dims(), d2.dims(), "dann_domain_loss");
  double total = 0.0;
  for (std::size_t i = 0; i < d_pred.size(); ++i) {
    double diff = d_pred[i] - d2[i];
    total += diff * diff;
  }
  return total / static_cast<double>(d_pred.dim(0));
}

double weighted_domain_ce(const Tensor<double>& d_pred, const Tensor<double>& d, std::span<const int> u,
                          double temperature) {
  require_rank2(d_pred, "weighted_domain_ce");
  require_same_dims(d_pred.dims(), d.dims(), "weighted_domain_ce");
  if (u.size() != d_pred.dim(0)) throw ShapeError("weighted_domain_ce: u length does not match batch");
  if (!(temperature > 0.0)) throw ContractError("weighted_domain_ce: temperature must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0) throw ContractError("weighted_domain_ce: negative domain index");
    double w = (u[i] + 1) / temperature;
    total += w * neg_log(d_pred.at(i, hot_column(d, i, "weighted_domain_ce")));
  }
  return total / static_cast<double>(u.size());
}

double regression_domain_loss(std::span<const double> pred, std::span<const double> u) {
  if (pred.size() != u.size()) throw ShapeError("regression_domain_loss: length mismatch");
  if (pred.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    double diff = pred[i] - u[i];
    total += diff * diff;
  }
  return total / static_cast<double>(pred.size());
}

double feature_objective(double scene, double domain, double lambda_d) {
  if (lambda_d < 0.0) throw ContractError("feature_objective: lambda_d must be >= 0");
  return scene - lambda_d * domain;
}

Tensor<double> binary_domain_labels(std::span<const int> u) {
  Tensor<double> out({u.size(), 2});
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (u[i] < 0) throw ContractError("binary_domain_labels: negative domain index");
    out.at(i, u[i] == 0 ? 1 : 0) = 1.0;
  }
  return out;
}

Tensor<double> one_hot(std::span<const int> labels, std::size_t width) {
  Tensor<double> out({labels.size(), width});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= width) {
      throw ContractError("one_hot: label " + std::to_string(labels[i]) + " outside [0, " +
                          std::to_string(width) + ")");
    }
    out.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return out;
}

std::map<int, std::vector<double>> conditional_mean_oracle(std::span<const DiscreteSample> samples) {
  std::map<int, std::vector<double>> sums;
  std::map<int, std::size_t> counts;
  for (const auto& [z, d] : samples) {
    auto& acc = sums[z];
    if (acc.empty()) {
      acc.assign(d.size(), 0.0);
    } else if (acc.size() != d.size()) {
      throw ShapeError("conditional_mean_oracle: inconsistent label width");
    }
    for (std::size_t j = 0; j < d.size(); ++j) acc[j] += d[j];
    ++counts[z];
  }
  for (auto& [z, acc] : sums) {
    for (double& v : acc) v /= static_cast<double>(counts[z]);
  }
  return sums;
}

TableFit fit_table_discriminator(std::span<const DiscreteSample> samples, double learning_rate,
                                 int max_iterations, double tolerance) {
  if (samples.empty()) throw ContractError("fit_table_discriminator: no samples");
  std::set<int> values;
  for (const auto& s : samples) values.insert(s.first);
  std::vector<int> keys(values.begin(), values.end());
  const std::size_t nz = keys.size();
  const std::size_t width = samples.front().second.size();

  Tensor<double> x({samples.size(), nz});
  Tensor<double> target({samples.size(), width});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto col = std::lower_bound(keys.begin(), keys.end(), samples[i].first) - keys.begin();
    x.at(i, static_cast<std::size_t>(col)) = 1.0;
    if (samples[i].second.size() != width) throw ShapeError("fit_table_discriminator: inconsistent label width");
    for (std::size_t j = 0; j < width; ++j) target.at(i, j) = samples[i].second[j];
  }

  ParameterStore<double> params;
  std::size_t w_slot = params.add("W", Tensor<double>({nz, width}));
  std::size_t b_slot = params.add("b", Tensor<double>({width}));

  TableFit fit;
  for (fit.iterations = 1; fit.iterations <= max_iterations; ++fit.iterations) {
    Graph<double> g(&params);
    NodeId out = g.dense(g.input(x), g.parameter(w_slot), g.parameter(b_slot));
    NodeId loss = g.mse_loss(out, target);
    fit.final_loss = g.value(loss)[0];
    Gradients<double> grads = g.backward(loss);
    double largest = 0.0;
    for (std::size_t s = 0; s < params.size(); ++s) {
      auto value = params.value(s).data();
      auto grad = grads[s].data();
      for (std::size_t k = 0; k < value.size(); ++k) {
        double step = learning_rate * grad[k];
        value[k] -= step;
        largest = std::max(largest, std::abs(step));
      }
    }
    if (largest < tolerance) break;
  }
  fit.iterations = std::min(fit.iterations, max_iterations);

  const Tensor<double>& w = params.value(w_slot);
  const Tensor<double>& b = params.value(b_slot);
  for (std::size_t k = 0; k < nz; ++k) {
    std::vector<double> row(width);
    for (std::size_t j = 0; j < width; ++j) row[j] = w.at(k, j) + b[j];
    fit.table[keys[k]] = std::move(row);
  }
  return fit;
}

}  // namespace mtda
