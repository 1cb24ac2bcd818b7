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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

using NodeId = std::size_t;

/// Named, ordered parameter tensors. Slot ids are stable for the store's
/// lifetime and index the gradient vectors returned by Graph::backward.
template <typename T>
class ParameterStore {
 public:
  std::size_t add(std::string name, Tensor<T> value);

  std::size_t slot(std::string_view name) const;
  std::optional<std::size_t> find(std::string_view name) const;

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t slot) const { return names_.at(slot); }
  Tensor<T>& value(std::size_t slot) { return values_.at(slot); }
  const Tensor<T>& value(std::size_t slot) const { return values_.at(slot); }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> values_;
};

/// One gradient tensor per ParameterStore slot, zero for slots the graph
/// never touched.
template <typename T>
using Gradients = std::vector<Tensor<T>>;

enum class OpKind {
  kInput,
  kParameter,
  kDense,
  kConv2d,
  kRelu,
  kAvgPool2,
  kGlobalAvgPool,
  kSoftmax,
  kGradientReversal,
  kSoftmaxCrossEntropy,
  kMseLoss,
  kSumSquares,
  kAdd,
  kScale,
};

const char* op_name(OpKind kind);

/// Tape for reverse-mode differentiation over a fixed op set.
///
/// Nodes are appended in evaluation order, so node ids are already a
/// topological order and backward() walks them in reverse. Values are
/// computed eagerly when a node is appended and checked for NaN/Inf.
/// A graph is single-writer; build one per forward pass.
template <typename T>
class Graph {
 public:
  explicit Graph(const ParameterStore<T>* params = nullptr) : params_(params) {}

  NodeId input(Tensor<T> value);
  NodeId parameter(std::size_t slot);
  NodeId parameter(std::string_view name);

  // x[n×a]·W[a×b] + b[b]
  NodeId dense(NodeId x, NodeId weight, NodeId bias);
  // 3×3 cross-correlation, stride 1, zero padding 1: x[n×c×h×w], K[f×c×3×3].
  NodeId conv2d(NodeId x, NodeId kernel);
  NodeId conv2d(NodeId x, NodeId kernel, NodeId bias);
  NodeId relu(NodeId x);
  // 2×2 mean over n×c×h×w; odd trailing rows/cols are dropped.
  NodeId avg_pool2(NodeId x);
  // n×c×h×w -> n×c
  NodeId global_avg_pool(NodeId x);
  // Row-wise softmax of a rank-2 tensor.
  NodeId softmax(NodeId x);
  // Identity forward; backward multiplies the adjoint by -lambda.
  NodeId gradient_reversal(NodeId x, T lambda);

  /// Σ_i weights[i]·(−log softmax(logits)[i, label_i]) where label_i is the
  /// hot column of onehot row i. Gradient flows to logits only.
  NodeId softmax_cross_entropy(NodeId logits, const Tensor<T>& onehot,
                               const Tensor<T>& weights);
  /// Sum of squared differences per sample. Rank ≥ 2 treats the leading
  /// axis as the batch and returns the mean over it.
  NodeId mse_loss(NodeId pred, const Tensor<T>& target);
  NodeId sum_squares(NodeId x);
  NodeId add(NodeId a, NodeId b);
  NodeId scale(NodeId x, T factor);

  /// Reverse sweep from a scalar node. Returns parameter gradients aligned
  /// with the bound ParameterStore; per-node adjoints stay readable via
  /// adjoint() until the next call.
  Gradients<T> backward(NodeId loss);

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id).value; }
  const Tensor<T>& adjoint(NodeId id) const;
  OpKind kind(NodeId id) const { return nodes_.at(id).kind; }
  std::string node_name(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    OpKind kind;
    std::vector<NodeId> inputs;
    std::size_t slot = 0;
    T scalar = T(0);
    Tensor<T> value;
    Tensor<T> aux;    // one-hot / regression target
    Tensor<T> aux2;   // per-row weights
    Tensor<T> cache;  // softmax probabilities for CE
  };

  NodeId push(Node node, const char* what);
  const Node& node(NodeId id) const;
  void backprop_node(NodeId id, std::vector<Tensor<T>>& adj, Gradients<T>& grads) const;

  const ParameterStore<T>* params_;
  std::vector<Node> nodes_;
  std::vector<Tensor<T>> adjoints_;
};

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;
extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace mtda
