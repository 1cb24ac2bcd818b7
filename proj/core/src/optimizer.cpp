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

#include "mtda/optimizer.hpp"

#include <cmath>
#include <string>

#include "mtda/errors.hpp"

namespace mtda {

template <typename T>
void Adam<T>::step(ParameterStore<T>& params, const Gradients<T>& grads) {
  if (grads.size() != params.size()) {
    throw ContractError("adam: " + std::to_string(grads.size()) + " gradients for " +
                        std::to_string(params.size()) + " parameters");
  }
  if (m_.empty()) {
    for (std::size_t s = 0; s < params.size(); ++s) {
      m_.emplace_back(params.value(s).size(), 0.0);
      v_.emplace_back(params.value(s).size(), 0.0);
    }
  }
  if (m_.size() != params.size()) throw ContractError("adam: parameter store changed between steps");

  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t s = 0; s < params.size(); ++s) {
    auto value = params.value(s).data();
    auto grad = grads[s].data();
    if (grad.size() != value.size()) {
      throw ShapeError("adam: gradient for '" + params.name(s) + "' has the wrong size");
    }
    auto& m = m_[s];
    auto& v = v_[s];
    for (std::size_t k = 0; k < value.size(); ++k) {
      double g = static_cast<double>(grad[k]);
      m[k] = b1 * m[k] + (1.0 - b1) * g;
      v[k] = b2 * v[k] + (1.0 - b2) * g * g;
      double update = config_.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + config_.epsilon);
      value[k] = static_cast<T>(static_cast<double>(value[k]) - update);
    }
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace mtda
