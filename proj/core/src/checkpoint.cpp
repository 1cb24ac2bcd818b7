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

#include "mtda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mtda/errors.hpp"

namespace mtda {

static_assert(std::endian::native == std::endian::little,
              "container encoding assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'M', 'T', 'D', 'A'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U value) {
  std::uint8_t buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.insert(out.end(), buf, buf + sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get() {
    U value;
    std::memcpy(&value, take(sizeof(U)), sizeof(U));
    return value;
  }

  const std::uint8_t* take(std::size_t n) {
    if (n > bytes_.size() - pos_) throw IoError("tensor container truncated");
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_tensor(std::vector<std::uint8_t>& out, const Tensor<T>& t) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.dims()) put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  const auto* p = reinterpret_cast<const std::uint8_t*>(t.data().data());
  out.insert(out.end(), p, p + t.size() * sizeof(T));
}

template <typename T>
Tensor<T> get_tensor(Reader& in) {
  const auto rank = in.get<std::uint32_t>();
  if (rank == 0 || rank > 8) throw IoError("tensor container: bad rank " + std::to_string(rank));
  Dims dims(rank);
  std::size_t count = 1;
  for (auto& d : dims) {
    d = in.get<std::uint32_t>();
    if (d == 0) throw IoError("tensor container: zero dimension");
    count *= d;
  }
  std::vector<T> data(count);
  std::memcpy(data.data(), in.take(count * sizeof(T)), count * sizeof(T));
  return Tensor<T>(std::move(dims), std::move(data));
}

}  // namespace

const Dims& NamedTensor::dims() const {
  return std::visit([](const auto& t) -> const Dims& { return t.dims(); }, tensor);
}

std::vector<std::uint8_t> encode_container(const std::vector<NamedTensor>& entries) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint16_t>(out, kContainerVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(e.dtype()));
    std::visit([&](const auto& t) { put_tensor(out, t); }, e.tensor);
  }
  return out;
}

std::vector<NamedTensor> decode_container(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  if (std::memcmp(in.take(4), kMagic, 4) != 0) throw IoError("not an MTDA tensor container");
  const auto version = in.get<std::uint16_t>();
  if (version != kContainerVersion) {
    throw IoError("unsupported tensor container version " + std::to_string(version));
  }
  const auto count = in.get<std::uint32_t>();
  std::vector<NamedTensor> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = in.get<std::uint32_t>();
    const auto* p = in.take(len);
    std::string name(reinterpret_cast<const char*>(p), len);
    switch (static_cast<DType>(in.get<std::uint8_t>())) {
      case DType::kF32: entries.push_back({std::move(name), get_tensor<float>(in)}); break;
      case DType::kF64: entries.push_back({std::move(name), get_tensor<double>(in)}); break;
      default: throw IoError("tensor container: unknown dtype code in entry " + name);
    }
  }
  if (!in.done()) throw IoError("tensor container has trailing bytes");
  return entries;
}

void write_container(const std::filesystem::path& path, const std::vector<NamedTensor>& entries) {
  const auto bytes = encode_container(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<NamedTensor> read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_container(bytes);
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

const NamedTensor& find_entry(const std::vector<NamedTensor>& entries, const std::string& name) {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw ContractError("tensor container has no entry named " + name);
}

}  // namespace mtda
