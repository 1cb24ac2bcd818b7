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

#include "mtda/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mtda/errors.hpp"

namespace mtda {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kInput: return "input";
    case OpKind::kParameter: return "parameter";
    case OpKind::kDense: return "dense";
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kRelu: return "relu";
    case OpKind::kAvgPool2: return "avg_pool2";
    case OpKind::kGlobalAvgPool: return "global_avg_pool";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kGradientReversal: return "gradient_reversal";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kMseLoss: return "mse_loss";
    case OpKind::kSumSquares: return "sum_squares";
    case OpKind::kAdd: return "add";
    case OpKind::kScale: return "scale";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// ParameterStore

template <typename T>
std::size_t ParameterStore<T>::add(std::string name, Tensor<T> value) {
  if (find(name)) throw ContractError("duplicate parameter name: " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

template <typename T>
std::optional<std::size_t> ParameterStore<T>::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  return std::nullopt;
}

template <typename T>
std::size_t ParameterStore<T>::slot(std::string_view name) const {
  if (auto s = find(name)) return *s;
  throw ContractError("unknown parameter: " + std::string(name));
}

// ---------------------------------------------------------------------------
// Kernels shared by forward and backward passes.

namespace {

template <typename T>
void conv3x3_forward(const T* in, const T* kernel, T* out, std::size_t h, std::size_t w) {
  for (int ky = 0; ky < 3; ++ky) {
    const int dy = ky - 1;
    const std::size_t y0 = dy < 0 ? 1 : 0;
    const std::size_t y1 = dy > 0 ? h - 1 : h;
    for (int kx = 0; kx < 3; ++kx) {
      const int dx = kx - 1;
      const T k = kernel[ky * 3 + kx];
      if (k == T(0)) continue;
      const std::size_t x0 = dx < 0 ? 1 : 0;
      const std::size_t x1 = dx > 0 ? w - 1 : w;
      for (std::size_t y = y0; y < y1; ++y) {
        const T* in_row = in + (y + dy) * w + dx;
        T* out_row = out + y * w;
        for (std::size_t x = x0; x < x1; ++x) out_row[x] += k * in_row[x];
      }
    }
  }
}

// Accumulates the input adjoint and the kernel adjoint for one (in, out)
// channel pair.
template <typename T>
void conv3x3_backward(const T* in, const T* kernel, const T* g_out, T* g_in, T* g_kernel,
                      std::size_t h, std::size_t w) {
  for (int ky = 0; ky < 3; ++ky) {
    const int dy = ky - 1;
    const std::size_t y0 = dy < 0 ? 1 : 0;
    const std::size_t y1 = dy > 0 ? h - 1 : h;
    for (int kx = 0; kx < 3; ++kx) {
      const int dx = kx - 1;
      const T k = kernel[ky * 3 + kx];
      const std::size_t x0 = dx < 0 ? 1 : 0;
      const std::size_t x1 = dx > 0 ? w - 1 : w;
      T acc = T(0);
      for (std::size_t y = y0; y < y1; ++y) {
        const T* in_row = in + (y + dy) * w + dx;
        const T* g_row = g_out + y * w;
        T* gi_row = g_in + (y + dy) * w + dx;
        for (std::size_t x = x0; x < x1; ++x) {
          acc += g_row[x] * in_row[x];
          gi_row[x] += k * g_row[x];
        }
      }
      g_kernel[ky * 3 + kx] += acc;
    }
  }
}

template <typename T>
T log_sum_exp(const T* row, std::size_t k) {
  T mx = row[0];
  for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
  T s = T(0);
  for (std::size_t j = 0; j < k; ++j) s += std::exp(row[j] - mx);
  return mx + std::log(s);
}

template <typename T>
std::size_t hot_index(const T* row, std::size_t k, std::size_t i) {
  std::size_t hot = k;
  std::size_t ones = 0;
  for (std::size_t j = 0; j < k && ones < 2; ++j) {
    if (row[j] == T(1)) {
      ++ones;
      hot = j;
    } else if (row[j] != T(0)) {
      ones = 2;
    }
  }
  if (ones != 1) {
    throw ContractError("softmax_cross_entropy: one-hot row " + std::to_string(i) +
                        " must contain a single 1 and zeros elsewhere");
  }
  return hot;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graph construction

template <typename T>
const typename Graph<T>::Node& Graph<T>::node(NodeId id) const {
  if (id >= nodes_.size()) throw ContractError("unknown node id " + std::to_string(id));
  return nodes_[id];
}

template <typename T>
std::string Graph<T>::node_name(NodeId id) const {
  return std::string(op_name(node(id).kind)) + "#" + std::to_string(id);
}

template <typename T>
NodeId Graph<T>::push(Node n, const char* what) {
  if (!n.value.all_finite()) {
    throw NumericError(std::string("non-finite output of ") + what + "#" +
                       std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(n));
  return nodes_.size() - 1;
}

template <typename T>
NodeId Graph<T>::input(Tensor<T> value) {
  Node n{OpKind::kInput, {}, 0, T(0), std::move(value), {}, {}, {}};
  return push(std::move(n), "input");
}

template <typename T>
NodeId Graph<T>::parameter(std::size_t slot) {
  if (!params_) throw ContractError("graph has no parameter store");
  Node n{OpKind::kParameter, {}, slot, T(0), params_->value(slot), {}, {}, {}};
  return push(std::move(n), "parameter");
}

template <typename T>
NodeId Graph<T>::parameter(std::string_view name) {
  if (!params_) throw ContractError("graph has no parameter store");
  return parameter(params_->slot(name));
}

template <typename T>
NodeId Graph<T>::dense(NodeId x, NodeId weight, NodeId bias) {
  const auto& X = node(x).value;
  const auto& W = node(weight).value;
  const auto& b = node(bias).value;
  if (X.rank() != 2 || W.rank() != 2 || X.dim(1) != W.dim(0)) {
    throw ShapeError("dense: dimension mismatch " + dims_to_string(X.dims()) + " vs " +
                     dims_to_string(W.dims()));
  }
  if (b.rank() != 1 || b.dim(0) != W.dim(1)) {
    throw ShapeError("dense: bias dims " + dims_to_string(b.dims()) + " vs weight " +
                     dims_to_string(W.dims()));
  }
  const std::size_t n = X.dim(0), a = X.dim(1), m = W.dim(1);
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < n; ++i) {
    T* row = &out[i * m];
    for (std::size_t j = 0; j < m; ++j) row[j] = b[j];
    for (std::size_t k = 0; k < a; ++k) {
      const T xv = X[i * a + k];
      const T* wrow = &W[k * m];
      for (std::size_t j = 0; j < m; ++j) row[j] += xv * wrow[j];
    }
  }
  return push(Node{OpKind::kDense, {x, weight, bias}, 0, T(0), std::move(out), {}, {}, {}},
              "dense");
}

template <typename T>
NodeId Graph<T>::conv2d(NodeId x, NodeId kernel) {
  const auto& X = node(x).value;
  const auto& K = node(kernel).value;
  if (X.rank() != 4 || K.rank() != 4 || K.dim(2) != 3 || K.dim(3) != 3 ||
      X.dim(1) != K.dim(1)) {
    throw ShapeError("conv2d: dimension mismatch " + dims_to_string(X.dims()) + " vs " +
                     dims_to_string(K.dims()));
  }
  const std::size_t n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3), f = K.dim(0);
  Tensor<T> out({n, f, h, w});
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < f; ++o) {
      T* plane = &out.at(s, o, 0, 0);
      for (std::size_t i = 0; i < c; ++i) {
        conv3x3_forward(&X.at(s, i, 0, 0), &K.at(o, i, 0, 0), plane, h, w);
      }
    }
  }
  return push(Node{OpKind::kConv2d, {x, kernel}, 0, T(0), std::move(out), {}, {}, {}},
              "conv2d");
}

template <typename T>
NodeId Graph<T>::conv2d(NodeId x, NodeId kernel, NodeId bias) {
  const auto& K = node(kernel).value;
  const Tensor<T> b = node(bias).value;  // copy: conv2d() may reallocate nodes_
  if (b.rank() != 1 || K.rank() != 4 || b.dim(0) != K.dim(0)) {
    throw ShapeError("conv2d: bias dims " + dims_to_string(b.dims()) + " vs kernel " +
                     dims_to_string(K.dims()));
  }
  const NodeId conv = conv2d(x, kernel);
  auto& out = nodes_[conv];
  const std::size_t n = out.value.dim(0), f = out.value.dim(1);
  const std::size_t plane = out.value.dim(2) * out.value.dim(3);
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t o = 0; o < f; ++o) {
      T* p = &out.value[(s * f + o) * plane];
      for (std::size_t k = 0; k < plane; ++k) p[k] += b[o];
    }
  }
  out.value.require_finite(node_name(conv));
  out.inputs.push_back(bias);
  return conv;
}

template <typename T>
NodeId Graph<T>::relu(NodeId x) {
  Tensor<T> out = node(x).value;
  for (auto& v : out.data()) v = v > T(0) ? v : T(0);
  return push(Node{OpKind::kRelu, {x}, 0, T(0), std::move(out), {}, {}, {}}, "relu");
}

template <typename T>
NodeId Graph<T>::avg_pool2(NodeId x) {
  const auto& X = node(x).value;
  if (X.rank() != 4 || X.dim(2) < 2 || X.dim(3) < 2) {
    throw ShapeError("avg_pool2: expected n×c×h×w with h,w ≥ 2, got " + dims_to_string(X.dims()));
  }
  const std::size_t n = X.dim(0), c = X.dim(1), h = X.dim(2) / 2, w = X.dim(3) / 2;
  Tensor<T> out({n, c, h, w});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t xx = 0; xx < w; ++xx) {
          out.at(s, i, y, xx) = (X.at(s, i, 2 * y, 2 * xx) + X.at(s, i, 2 * y, 2 * xx + 1) +
                                 X.at(s, i, 2 * y + 1, 2 * xx) +
                                 X.at(s, i, 2 * y + 1, 2 * xx + 1)) *
                                T(0.25);
        }
  return push(Node{OpKind::kAvgPool2, {x}, 0, T(0), std::move(out), {}, {}, {}}, "avg_pool2");
}

template <typename T>
NodeId Graph<T>::global_avg_pool(NodeId x) {
  const auto& X = node(x).value;
  if (X.rank() != 4) {
    throw ShapeError("global_avg_pool: expected n×c×h×w, got " + dims_to_string(X.dims()));
  }
  const std::size_t n = X.dim(0), c = X.dim(1), plane = X.dim(2) * X.dim(3);
  Tensor<T> out({n, c});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < c; ++i) {
      const T* p = &X.at(s, i, 0, 0);
      T acc = T(0);
      for (std::size_t k = 0; k < plane; ++k) acc += p[k];
      out.at(s, i) = acc / static_cast<T>(plane);
    }
  return push(Node{OpKind::kGlobalAvgPool, {x}, 0, T(0), std::move(out), {}, {}, {}},
              "global_avg_pool");
}

template <typename T>
NodeId Graph<T>::softmax(NodeId x) {
  const auto& X = node(x).value;
  if (X.rank() != 2) throw ShapeError("softmax: expected rank 2, got " + dims_to_string(X.dims()));
  const std::size_t n = X.dim(0), k = X.dim(1);
  Tensor<T> out({n, k});
  for (std::size_t i = 0; i < n; ++i) {
    const T lse = log_sum_exp(&X[i * k], k);
    for (std::size_t j = 0; j < k; ++j) out[i * k + j] = std::exp(X[i * k + j] - lse);
  }
  return push(Node{OpKind::kSoftmax, {x}, 0, T(0), std::move(out), {}, {}, {}}, "softmax");
}

template <typename T>
NodeId Graph<T>::gradient_reversal(NodeId x, T lambda) {
  if (!(lambda >= T(0))) throw ContractError("gradient_reversal: lambda must be ≥ 0");
  return push(Node{OpKind::kGradientReversal, {x}, 0, lambda, node(x).value, {}, {}, {}},
              "gradient_reversal");
}

template <typename T>
NodeId Graph<T>::softmax_cross_entropy(NodeId logits, const Tensor<T>& onehot,
                                       const Tensor<T>& weights) {
  const auto& L = node(logits).value;
  if (L.rank() != 2) {
    throw ShapeError("softmax_cross_entropy: logits must be rank 2, got " +
                     dims_to_string(L.dims()));
  }
  require_same_dims(L.dims(), onehot.dims(), "softmax_cross_entropy");
  const std::size_t n = L.dim(0), k = L.dim(1);
  if (weights.rank() != 1 || weights.dim(0) != n) {
    throw ShapeError("softmax_cross_entropy: weights dims " + dims_to_string(weights.dims()) +
                     " vs logits " + dims_to_string(L.dims()));
  }
  Tensor<T> probs({n, k});
  T loss = T(0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(weights[i] >= T(0))) {
      throw ContractError("softmax_cross_entropy: weights must be non-negative");
    }
    const std::size_t hot = hot_index(&onehot[i * k], k, i);
    const T lse = log_sum_exp(&L[i * k], k);
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] = std::exp(L[i * k + j] - lse);
    loss += weights[i] * (lse - L[i * k + hot]);
  }
  Node n_{OpKind::kSoftmaxCrossEntropy, {logits}, 0, T(0), Tensor<T>::scalar(loss), onehot,
          weights, std::move(probs)};
  return push(std::move(n_), "softmax_cross_entropy");
}

template <typename T>
NodeId Graph<T>::mse_loss(NodeId pred, const Tensor<T>& target) {
  const auto& P = node(pred).value;
  require_same_dims(P.dims(), target.dims(), "mse_loss");
  T acc = T(0);
  for (std::size_t i = 0; i < P.size(); ++i) {
    const T d = P[i] - target[i];
    acc += d * d;
  }
  const T batch = P.rank() >= 2 ? static_cast<T>(P.dim(0)) : T(1);
  return push(Node{OpKind::kMseLoss, {pred}, 0, batch, Tensor<T>::scalar(acc / batch), target,
                   {}, {}},
              "mse_loss");
}

template <typename T>
NodeId Graph<T>::sum_squares(NodeId x) {
  T acc = T(0);
  for (T v : node(x).value.data()) acc += v * v;
  return push(Node{OpKind::kSumSquares, {x}, 0, T(0), Tensor<T>::scalar(acc), {}, {}, {}},
              "sum_squares");
}

template <typename T>
NodeId Graph<T>::add(NodeId a, NodeId b) {
  const auto& A = node(a).value;
  const auto& B = node(b).value;
  require_same_dims(A.dims(), B.dims(), "add");
  Tensor<T> out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += B[i];
  return push(Node{OpKind::kAdd, {a, b}, 0, T(0), std::move(out), {}, {}, {}}, "add");
}

template <typename T>
NodeId Graph<T>::scale(NodeId x, T factor) {
  Tensor<T> out = node(x).value;
  for (auto& v : out.data()) v *= factor;
  return push(Node{OpKind::kScale, {x}, 0, factor, std::move(out), {}, {}, {}}, "scale");
}

// ---------------------------------------------------------------------------
// Reverse sweep

template <typename T>
const Tensor<T>& Graph<T>::adjoint(NodeId id) const {
  if (id >= adjoints_.size() || adjoints_[id].empty()) {
    throw ContractError("no adjoint for " + node_name(id) + "; run backward() first");
  }
  return adjoints_[id];
}

template <typename T>
Gradients<T> Graph<T>::backward(NodeId loss) {
  if (node(loss).value.size() != 1) {
    throw ContractError("backward: loss " + node_name(loss) + " is not scalar (dims " +
                        dims_to_string(node(loss).value.dims()) + ")");
  }
  Gradients<T> grads;
  if (params_) {
    grads.reserve(params_->size());
    for (std::size_t s = 0; s < params_->size(); ++s) {
      grads.emplace_back(params_->value(s).dims());
    }
  }
  std::vector<Tensor<T>> adj(nodes_.size());
  adj[loss] = Tensor<T>(node(loss).value.dims(), T(1));
  for (NodeId id = loss + 1; id-- > 0;) {
    if (adj[id].empty()) continue;
    if (!adj[id].all_finite()) throw NumericError("non-finite adjoint at node " + node_name(id));
    backprop_node(id, adj, grads);
  }
  adjoints_ = std::move(adj);
  return grads;
}

template <typename T>
void Graph<T>::backprop_node(NodeId id, std::vector<Tensor<T>>& adj, Gradients<T>& grads) const {
  const Node& n = nodes_[id];
  const Tensor<T>& g = adj[id];
  auto slot_for = [&](NodeId input) -> Tensor<T>& {
    if (adj[input].empty()) adj[input] = Tensor<T>(nodes_[input].value.dims());
    return adj[input];
  };

  switch (n.kind) {
    case OpKind::kInput:
      break;
    case OpKind::kParameter: {
      auto& dst = grads.at(n.slot);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
      break;
    }
    case OpKind::kDense: {
      const auto& X = nodes_[n.inputs[0]].value;
      const auto& W = nodes_[n.inputs[1]].value;
      const std::size_t rows = X.dim(0), a = X.dim(1), m = W.dim(1);
      auto& gx = slot_for(n.inputs[0]);
      auto& gw = slot_for(n.inputs[1]);
      auto& gb = slot_for(n.inputs[2]);
      for (std::size_t i = 0; i < rows; ++i) {
        const T* grow = &g[i * m];
        for (std::size_t k = 0; k < a; ++k) {
          const T* wrow = &W[k * m];
          T acc = T(0);
          for (std::size_t j = 0; j < m; ++j) acc += grow[j] * wrow[j];
          gx[i * a + k] += acc;
          const T xv = X[i * a + k];
          T* gwrow = &gw[k * m];
          for (std::size_t j = 0; j < m; ++j) gwrow[j] += xv * grow[j];
        }
        for (std::size_t j = 0; j < m; ++j) gb[j] += grow[j];
      }
      break;
    }
    case OpKind::kConv2d: {
      const auto& X = nodes_[n.inputs[0]].value;
      const auto& K = nodes_[n.inputs[1]].value;
      const std::size_t s_n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3), f = K.dim(0);
      auto& gx = slot_for(n.inputs[0]);
      auto& gk = slot_for(n.inputs[1]);
      for (std::size_t s = 0; s < s_n; ++s)
        for (std::size_t o = 0; o < f; ++o) {
          const T* gplane = &g[((s * f + o) * h) * w];
          for (std::size_t i = 0; i < c; ++i) {
            conv3x3_backward(&X.at(s, i, 0, 0), &K.at(o, i, 0, 0), gplane, &gx.at(s, i, 0, 0),
                             &gk.at(o, i, 0, 0), h, w);
          }
        }
      if (n.inputs.size() == 3) {
        auto& gb = slot_for(n.inputs[2]);
        const std::size_t plane = h * w;
        for (std::size_t s = 0; s < s_n; ++s)
          for (std::size_t o = 0; o < f; ++o) {
            const T* gp = &g[(s * f + o) * plane];
            T acc = T(0);
            for (std::size_t k = 0; k < plane; ++k) acc += gp[k];
            gb[o] += acc;
          }
      }
      break;
    }
    case OpKind::kRelu: {
      auto& gx = slot_for(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (n.value[i] > T(0)) gx[i] += g[i];
      }
      break;
    }
    case OpKind::kAvgPool2: {
      auto& gx = slot_for(n.inputs[0]);
      const std::size_t s_n = n.value.dim(0), c = n.value.dim(1), h = n.value.dim(2),
                        w = n.value.dim(3);
      for (std::size_t s = 0; s < s_n; ++s)
        for (std::size_t i = 0; i < c; ++i)
          for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) {
              const T q = g.at(s, i, y, x) * T(0.25);
              gx.at(s, i, 2 * y, 2 * x) += q;
              gx.at(s, i, 2 * y, 2 * x + 1) += q;
              gx.at(s, i, 2 * y + 1, 2 * x) += q;
              gx.at(s, i, 2 * y + 1, 2 * x + 1) += q;
            }
      break;
    }
    case OpKind::kGlobalAvgPool: {
      auto& gx = slot_for(n.inputs[0]);
      const auto& X = nodes_[n.inputs[0]].value;
      const std::size_t s_n = X.dim(0), c = X.dim(1), plane = X.dim(2) * X.dim(3);
      for (std::size_t s = 0; s < s_n; ++s)
        for (std::size_t i = 0; i < c; ++i) {
          const T q = g.at(s, i) / static_cast<T>(plane);
          T* p = &gx.at(s, i, 0, 0);
          for (std::size_t k = 0; k < plane; ++k) p[k] += q;
        }
      break;
    }
    case OpKind::kSoftmax: {
      auto& gx = slot_for(n.inputs[0]);
      const std::size_t rows = n.value.dim(0), k = n.value.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        const T* p = &n.value[i * k];
        const T* gr = &g[i * k];
        T dot = T(0);
        for (std::size_t j = 0; j < k; ++j) dot += gr[j] * p[j];
        for (std::size_t j = 0; j < k; ++j) gx[i * k + j] += p[j] * (gr[j] - dot);
      }
      break;
    }
    case OpKind::kGradientReversal: {
      auto& gx = slot_for(n.inputs[0]);
      if (n.scalar == T(0)) break;  // contributes exact zeros
      const T factor = -n.scalar;
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      auto& gx = slot_for(n.inputs[0]);
      const std::size_t rows = n.cache.dim(0), k = n.cache.dim(1);
      for (std::size_t i = 0; i < rows; ++i) {
        const T scale = g[0] * n.aux2[i];
        for (std::size_t j = 0; j < k; ++j) {
          gx[i * k + j] += scale * (n.cache[i * k + j] - n.aux[i * k + j]);
        }
      }
      break;
    }
    case OpKind::kMseLoss: {
      auto& gx = slot_for(n.inputs[0]);
      const auto& P = nodes_[n.inputs[0]].value;
      const T scale = T(2) * g[0] / n.scalar;
      for (std::size_t i = 0; i < P.size(); ++i) gx[i] += scale * (P[i] - n.aux[i]);
      break;
    }
    case OpKind::kSumSquares: {
      auto& gx = slot_for(n.inputs[0]);
      const auto& X = nodes_[n.inputs[0]].value;
      for (std::size_t i = 0; i < X.size(); ++i) gx[i] += T(2) * X[i] * g[0];
      break;
    }
    case OpKind::kAdd: {
      auto& ga = slot_for(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      auto& gb = slot_for(n.inputs[1]);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      break;
    }
    case OpKind::kScale: {
      auto& gx = slot_for(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.scalar * g[i];
      break;
    }
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template class Graph<float>;
template class Graph<double>;

}  // namespace mtda
