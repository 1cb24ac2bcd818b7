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

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtda/manifest.hpp"
#include "mtda/tensor.hpp"

namespace mtda {

/// A target sample and its parallel source sample, both taken from one
/// joint embedding run.
struct EmbeddedPair {
  std::array<double, 2> target;
  std::array<double, 2> source;
};

/// Target device id -> its embedded parallel pairs.
using ParallelPairSet = std::map<std::string, std::vector<EmbeddedPair>>;

/// Mean Euclidean norm of (target − source) over the pairs.
double domain_distance(std::span<const EmbeddedPair> pairs);

struct DomainEntry {
  double distance = 0.0;
  int index = 0;
  friend bool operator==(const DomainEntry&, const DomainEntry&) = default;
};

/// device -> (distance, domain index). The source has index 0; targets are
/// ranked 1..M−1 by ascending distance.
class DomainIndexTable {
 public:
  DomainIndexTable() = default;
  DomainIndexTable(std::string source_device, std::map<std::string, DomainEntry> entries);

  const std::string& source_device() const { return source_; }
  const std::map<std::string, DomainEntry>& entries() const { return entries_; }
  std::size_t num_domains() const { return entries_.size(); }
  bool contains(const std::string& device) const { return entries_.count(device) != 0; }
  int index_of(const std::string& device) const;
  double distance_of(const std::string& device) const;
  /// Target devices ordered by index.
  std::vector<std::string> ranked_targets() const;

  nlohmann::json to_json() const;
  static DomainIndexTable from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static DomainIndexTable load(const std::filesystem::path& path);

  friend bool operator==(const DomainIndexTable&, const DomainIndexTable&) = default;

 private:
  std::string source_;
  std::map<std::string, DomainEntry> entries_;
};

/// Ranks targets by ascending distance; ties go to the lexicographically
/// smaller device id. Index = 1-based rank, source fixed at 0.
DomainIndexTable assign_indices(const std::map<std::string, double>& distances,
                                const std::string& source_device);

/// The one device whose train rows carry scene labels.
std::string infer_source_device(const Manifest& manifest);

struct IndexConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 0;
  std::size_t max_groups = 0;  // 0 = every parallel group
};

struct IndexResult {
  DomainIndexTable table;
  std::vector<ManifestRow> embedded_rows;
  Tensor<double> embedding;  // aligned with embedded_rows
  ParallelPairSet pairs;
};

/// Joint t-SNE over the time-averaged features of every row in a parallel
/// group, then per-device distances and ranking.
IndexResult index_domains(const Manifest& manifest, const IndexConfig& config);

/// Time average of a time × bands feature matrix.
std::vector<double> time_average(const Tensor<double>& frames);

}  // namespace mtda
