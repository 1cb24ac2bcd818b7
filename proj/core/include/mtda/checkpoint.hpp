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
#include <string>
#include <variant>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

// Binary tensor container shared by checkpoints and feature files.
//
//   "MTDA"                      4 bytes magic
//   version                     u16
//   entry count                 u32
//   per entry:
//     name length               u32, followed by UTF-8 name bytes
//     dtype                     u8   (0 = f32, 1 = f64)
//     rank                      u32
//     dims                      rank × u32
//     payload                   row-major, IEEE-754
//
// All integers and payload values are little-endian.
inline constexpr std::uint16_t kContainerVersion = 1;

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

struct NamedTensor {
  std::string name;
  std::variant<Tensor<float>, Tensor<double>> tensor;

  DType dtype() const { return tensor.index() == 0 ? DType::kF32 : DType::kF64; }
  const Dims& dims() const;
  /// Converting accessor; f32 entries are widened, f64 entries narrowed.
  template <typename T>
  Tensor<T> as() const {
    return std::visit([](const auto& t) { return t.template cast<T>(); }, tensor);
  }
};

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& entries);
std::vector<NamedTensor> read_container(const std::filesystem::path& path);

/// Finds an entry by name or throws ContractError.
const NamedTensor& find_entry(const std::vector<NamedTensor>& entries, const std::string& name);

}  // namespace mtda
