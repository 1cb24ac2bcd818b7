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

#include "mtda/tensor.hpp"

#include <cmath>
#include <sstream>

#include "mtda/errors.hpp"

namespace mtda {

std::string dims_to_string(const Dims& dims) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out << 'x';
    out << dims[i];
  }
  out << ']';
  return out.str();
}

std::size_t dims_product(const Dims& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void require_same_dims(const Dims& a, const Dims& b, const char* op) {
  if (a != b) {
    throw ShapeError(std::string(op) + ": dimension mismatch " + dims_to_string(a) +
                     " vs " + dims_to_string(b));
  }
}

namespace {

void check_dims(const Dims& dims) {
  if (dims.empty()) throw ShapeError("tensor needs at least one dimension");
  for (auto d : dims) {
    if (d == 0) throw ShapeError("tensor dims must be positive, got " + dims_to_string(dims));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Dims dims, T fill) : dims_(std::move(dims)) {
  check_dims(dims_);
  data_.assign(dims_product(dims_), fill);
}

template <typename T>
Tensor<T>::Tensor(Dims dims, std::vector<T> data) : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  if (data_.size() != dims_product(dims_)) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match dims " + dims_to_string(dims_));
  }
}

template <typename T>
Tensor<T> Tensor<T>::vector(std::initializer_list<T> values) {
  return Tensor({values.size()}, std::vector<T>(values));
}

template <typename T>
Tensor<T> Tensor<T>::matrix(std::initializer_list<std::initializer_list<T>> rows) {
  const std::size_t n = rows.size();
  const std::size_t m = n ? rows.begin()->size() : 0;
  std::vector<T> data;
  data.reserve(n * m);
  for (const auto& row : rows) {
    if (row.size() != m) throw ShapeError("ragged matrix literal");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor({n, m}, std::move(data));
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Dims dims) const {
  if (dims_product(dims) != data_.size()) {
    throw ShapeError("reshape " + dims_to_string(dims_) + " -> " + dims_to_string(dims));
  }
  return Tensor(std::move(dims), data_);
}

template <typename T>
Tensor<T> Tensor<T>::rows(std::size_t begin, std::size_t end) const {
  if (begin >= end || end > dims_.at(0)) {
    throw ShapeError("row range out of bounds for " + dims_to_string(dims_));
  }
  const std::size_t stride = data_.size() / dims_[0];
  Dims out_dims = dims_;
  out_dims[0] = end - begin;
  return Tensor(std::move(out_dims),
                std::vector<T>(data_.begin() + static_cast<std::ptrdiff_t>(begin * stride),
                               data_.begin() + static_cast<std::ptrdiff_t>(end * stride)));
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
void Tensor<T>::require_finite(const std::string& what) const {
  if (!all_finite()) throw NumericError("non-finite value in " + what);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace mtda
