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

#include "mtda/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {

const char* to_string(DiscriminatorMode mode) {
  switch (mode) {
    case DiscriminatorMode::kDann:
      return "dann";
    case DiscriminatorMode::kMtdaC1:
      return "mtda-c1";
    case DiscriminatorMode::kMtdaC2:
      return "mtda-c2";
    case DiscriminatorMode::kMtdaR:
      return "mtda-r";
  }
  return "?";
}

DiscriminatorMode parse_mode(const std::string& name) {
  std::string lower;
  for (char c : name) lower += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (auto mode : {DiscriminatorMode::kDann, DiscriminatorMode::kMtdaC1, DiscriminatorMode::kMtdaC2,
                    DiscriminatorMode::kMtdaR}) {
    if (lower == to_string(mode)) return mode;
  }
  throw ContractError("unknown mode '" + name + "' (expected dann, mtda-c1, mtda-c2 or mtda-r)");
}

bool is_classification(DiscriminatorMode mode) { return mode != DiscriminatorMode::kMtdaR; }

std::size_t discriminator_width(DiscriminatorMode mode, std::size_t num_domains) {
  switch (mode) {
    case DiscriminatorMode::kDann:
      return 2;
    case DiscriminatorMode::kMtdaC1:
    case DiscriminatorMode::kMtdaC2:
      return num_domains;
    case DiscriminatorMode::kMtdaR:
      return 1;
  }
  return 0;
}

Part part_of(const std::string& param_name) {
  if (param_name.rfind("F.", 0) == 0) return Part::kFeature;
  if (param_name.rfind("C.", 0) == 0) return Part::kClassifier;
  if (param_name.rfind("D.", 0) == 0) return Part::kDiscriminator;
  throw ContractError("parameter '" + param_name + "' belongs to no model part");
}

template <typename T>
AdversarialModel<T>::AdversarialModel(DiscriminatorMode mode, ModelShape shape) : mode_(mode), shape_(shape) {
  if (shape_.num_classes < 2) throw ContractError("model needs at least 2 scene classes");
  if (shape_.num_domains < 2) throw ContractError("model needs at least 2 domains (source + target)");
  if (shape_.conv1 == 0 || shape_.conv2 == 0 || shape_.feature_dim == 0 || shape_.hidden == 0) {
    throw ContractError("model layer widths must be positive");
  }
}

template <typename T>
AdversarialModel<T>::AdversarialModel(DiscriminatorMode mode, ModelShape shape, std::uint64_t seed)
    : AdversarialModel(mode, shape) {
  declare(seed, true);
}

template <typename T>
void AdversarialModel<T>::declare(std::uint64_t seed, bool init) {
  const ModelShape& s = shape_;
  auto weight = [&](const std::string& name, Dims dims, std::size_t fan_in) {
    Tensor<T> w(dims);
    if (init) {
      Rng rng = derive_rng(seed, params_.size());
      std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
      for (auto& v : w.data()) v = static_cast<T>(normal(rng));
    }
    params_.add(name, std::move(w));
  };
  auto bias = [&](const std::string& name, std::size_t width) { params_.add(name, Tensor<T>({width})); };

  weight("F.conv1.weight", {s.conv1, 1, 3, 3}, 9);
  bias("F.conv1.bias", s.conv1);
  weight("F.conv2.weight", {s.conv2, s.conv1, 3, 3}, s.conv1 * 9);
  bias("F.conv2.bias", s.conv2);
  weight("F.dense.weight", {s.conv2, s.feature_dim}, s.conv2);
  bias("F.dense.bias", s.feature_dim);
  weight("C.dense.weight", {s.feature_dim, s.num_classes}, s.feature_dim);
  bias("C.dense.bias", s.num_classes);
  weight("D.hidden.weight", {s.feature_dim, s.hidden}, s.feature_dim);
  bias("D.hidden.bias", s.hidden);
  std::size_t out = discriminator_width(mode_, s.num_domains);
  weight("D.out.weight", {s.hidden, out}, s.hidden);
  bias("D.out.bias", out);
}

template <typename T>
ForwardNodes AdversarialModel<T>::forward(Graph<T>& g, const Tensor<T>& x, double lambda_d) const {
  if (x.rank() != 4 || x.dim(1) != 1) {
    throw ShapeError("model input must be n×1×frames×bands, got " + dims_to_string(x.dims()));
  }
  if (x.dim(2) < 4 || x.dim(3) < 4) {
    throw ShapeError("model input needs at least 4×4 frames×bands, got " + dims_to_string(x.dims()));
  }
  auto p = [&](const char* name) { return g.parameter(name); };
  ForwardNodes out{};
  NodeId h = g.input(x);
  h = g.avg_pool2(g.relu(g.conv2d(h, p("F.conv1.weight"), p("F.conv1.bias"))));
  h = g.avg_pool2(g.relu(g.conv2d(h, p("F.conv2.weight"), p("F.conv2.bias"))));
  h = g.global_avg_pool(h);
  out.z = g.dense(h, p("F.dense.weight"), p("F.dense.bias"));

  out.class_logits = g.dense(out.z, p("C.dense.weight"), p("C.dense.bias"));
  out.y_pred = g.softmax(out.class_logits);

  NodeId r = g.gradient_reversal(out.z, static_cast<T>(lambda_d));
  NodeId d = g.relu(g.dense(r, p("D.hidden.weight"), p("D.hidden.bias")));
  out.domain_out = g.dense(d, p("D.out.weight"), p("D.out.bias"));
  out.d_pred = is_classification(mode_) ? g.softmax(out.domain_out) : out.domain_out;
  return out;
}

template <typename T>
LossNodes AdversarialModel<T>::build_loss(Graph<T>& g, const Batch<T>& batch, const LossOptions& options) const {
  const std::size_t n = batch.x.rank() > 0 ? batch.x.dim(0) : 0;
  if (batch.scene.size() != n || batch.domain.size() != n) {
    throw ShapeError("batch labels do not match batch size " + std::to_string(n));
  }
  if (options.lambda_d < 0.0) throw ContractError("lambda_d must be >= 0");

  LossNodes nodes{};
  nodes.out = forward(g, batch.x, options.include_domain ? options.lambda_d : 0.0);

  std::size_t labeled = 0;
  for (int y : batch.scene) labeled += y >= 0 ? 1 : 0;
  if (labeled == 0) throw ContractError("batch has no source rows");

  Tensor<T> y_hot({n, shape_.num_classes});
  Tensor<T> y_weight({n});
  const T inv_labeled = T(1) / static_cast<T>(labeled);
  for (std::size_t i = 0; i < n; ++i) {
    int y = batch.scene[i];
    if (y >= static_cast<int>(shape_.num_classes)) {
      throw ContractError("scene label " + std::to_string(y) + " outside model classes");
    }
    // Unlabeled rows carry a placeholder one-hot with zero weight.
    y_hot.at(i, y >= 0 ? static_cast<std::size_t>(y) : 0) = T(1);
    y_weight[i] = y >= 0 ? inv_labeled : T(0);
  }
  nodes.scene = g.softmax_cross_entropy(nodes.out.class_logits, y_hot, y_weight);

  if (!options.include_domain) {
    nodes.domain = nodes.scene;
    nodes.total = nodes.scene;
    return nodes;
  }

  for (int u : batch.domain) {
    if (u < 0 || static_cast<std::size_t>(u) >= shape_.num_domains) {
      throw ContractError("domain index " + std::to_string(u) + " outside [0, " +
                          std::to_string(shape_.num_domains) + ")");
    }
  }
  const T inv_n = T(1) / static_cast<T>(n);
  switch (mode_) {
    case DiscriminatorMode::kDann: {
      Tensor<T> d2({n, 2});
      for (std::size_t i = 0; i < n; ++i) d2.at(i, batch.domain[i] == 0 ? 1 : 0) = T(1);
      nodes.domain = g.mse_loss(nodes.out.d_pred, d2);
      break;
    }
    case DiscriminatorMode::kMtdaC1:
    case DiscriminatorMode::kMtdaC2: {
      if (!(options.temperature > 0.0)) throw ContractError("temperature must be positive");
      Tensor<T> d_hot({n, shape_.num_domains});
      Tensor<T> weight({n});
      for (std::size_t i = 0; i < n; ++i) {
        auto u = static_cast<std::size_t>(batch.domain[i]);
        d_hot.at(i, u) = T(1);
        T w = mode_ == DiscriminatorMode::kMtdaC2
                  ? static_cast<T>(static_cast<double>(u + 1) / options.temperature)
                  : T(1);
        weight[i] = w * inv_n;
      }
      nodes.domain = g.softmax_cross_entropy(nodes.out.domain_out, d_hot, weight);
      break;
    }
    case DiscriminatorMode::kMtdaR: {
      Tensor<T> target({n, 1});
      const double denom =
          options.normalize_regression_target ? static_cast<double>(shape_.num_domains - 1) : 1.0;
      for (std::size_t i = 0; i < n; ++i) target[i] = static_cast<T>(batch.domain[i] / denom);
      nodes.domain = g.mse_loss(nodes.out.d_pred, target);
      break;
    }
  }
  nodes.total = g.add(nodes.scene, nodes.domain);
  return nodes;
}

template <typename T>
std::vector<NamedTensor> AdversarialModel<T>::to_entries() const {
  std::vector<NamedTensor> entries;
  entries.push_back({"meta.mode", Tensor<double>::scalar(static_cast<double>(mode_))});
  const ModelShape& s = shape_;
  entries.push_back({"meta.shape", Tensor<double>({6}, {static_cast<double>(s.num_classes),
                                                       static_cast<double>(s.num_domains),
                                                       static_cast<double>(s.conv1), static_cast<double>(s.conv2),
                                                       static_cast<double>(s.feature_dim),
                                                       static_cast<double>(s.hidden)})});
  for (std::size_t i = 0; i < params_.size(); ++i) entries.push_back({params_.name(i), params_.value(i)});
  return entries;
}

template <typename T>
AdversarialModel<T> AdversarialModel<T>::from_entries(const std::vector<NamedTensor>& entries) {
  Tensor<double> mode_t = find_entry(entries, "meta.mode").as<double>();
  Tensor<double> shape_t = find_entry(entries, "meta.shape").as<double>();
  if (mode_t.size() != 1 || shape_t.size() != 6) throw ContractError("checkpoint metadata is malformed");
  int mode_i = static_cast<int>(mode_t[0]);
  if (mode_i < 0 || mode_i > 3 || mode_t[0] != mode_i) throw ContractError("checkpoint has an unknown mode");
  for (double v : shape_t.values()) {
    if (!(v >= 1.0) || v != std::floor(v)) throw ContractError("checkpoint has an invalid model shape");
  }
  ModelShape shape{static_cast<std::size_t>(shape_t[0]), static_cast<std::size_t>(shape_t[1]),
                   static_cast<std::size_t>(shape_t[2]), static_cast<std::size_t>(shape_t[3]),
                   static_cast<std::size_t>(shape_t[4]), static_cast<std::size_t>(shape_t[5])};
  AdversarialModel model(static_cast<DiscriminatorMode>(mode_i), shape);
  model.declare(0, false);
  for (std::size_t i = 0; i < model.params_.size(); ++i) {
    const std::string& name = model.params_.name(i);
    Tensor<T> value = find_entry(entries, name).template as<T>();
    if (value.dims() != model.params_.value(i).dims()) {
      throw ShapeError("checkpoint entry '" + name + "' has dims " + dims_to_string(value.dims()) + ", expected " +
                       dims_to_string(model.params_.value(i).dims()));
    }
    value.require_finite(name);
    model.params_.value(i) = std::move(value);
  }
  return model;
}

template class AdversarialModel<float>;
template class AdversarialModel<double>;

}  // namespace mtda
