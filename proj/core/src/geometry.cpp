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

#include "mtda/geometry.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "mtda/audio.hpp"
#include "mtda/errors.hpp"
#include "mtda/tsne.hpp"

namespace mtda {

double domain_distance(std::span<const EmbeddedPair> pairs) {
  if (pairs.empty()) throw ContractError("device has no parallel data");
  double acc = 0.0;
  for (const auto& p : pairs) acc += std::hypot(p.target[0] - p.source[0], p.target[1] - p.source[1]);
  return acc / static_cast<double>(pairs.size());
}

DomainIndexTable::DomainIndexTable(std::string source_device, std::map<std::string, DomainEntry> entries)
    : source_(std::move(source_device)), entries_(std::move(entries)) {
  auto it = entries_.find(source_);
  if (it == entries_.end() || it->second.index != 0) {
    throw ContractError("domain index table: source device " + source_ + " must have index 0");
  }
  std::set<int> seen;
  for (const auto& [dev, e] : entries_) {
    if (e.index < 0 || e.index >= static_cast<int>(entries_.size()) || !seen.insert(e.index).second) {
      throw ContractError("domain index table: indices must be a permutation of 0..M-1");
    }
  }
}

int DomainIndexTable::index_of(const std::string& device) const {
  auto it = entries_.find(device);
  if (it == entries_.end()) throw ContractError("device " + device + " is not in the domain index table");
  return it->second.index;
}

double DomainIndexTable::distance_of(const std::string& device) const {
  auto it = entries_.find(device);
  if (it == entries_.end()) throw ContractError("device " + device + " is not in the domain index table");
  return it->second.distance;
}

std::vector<std::string> DomainIndexTable::ranked_targets() const {
  std::vector<std::string> out(entries_.size() - 1);
  for (const auto& [dev, e] : entries_) {
    if (e.index > 0) out[static_cast<std::size_t>(e.index - 1)] = dev;
  }
  return out;
}

nlohmann::json DomainIndexTable::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [dev, e] : entries_) j[dev] = {{"distance", e.distance}, {"index", e.index}};
  return j;
}

DomainIndexTable DomainIndexTable::from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.empty()) throw ContractError("domain index table must be a non-empty object");
  std::map<std::string, DomainEntry> entries;
  std::string source;
  for (const auto& [dev, v] : j.items()) {
    DomainEntry e;
    try {
      e = {v.at("distance").get<double>(), v.at("index").get<int>()};
    } catch (const nlohmann::json::exception& ex) {
      throw ContractError("domain index table entry " + dev + ": " + ex.what());
    }
    if (e.index == 0) source = dev;
    entries.emplace(dev, e);
  }
  if (source.empty()) throw ContractError("domain index table has no index-0 source device");
  return DomainIndexTable(source, std::move(entries));
}

void DomainIndexTable::save(const std::filesystem::path& path) const {
  write_text_if_changed(path, to_json().dump(2) + "\n");
}

DomainIndexTable DomainIndexTable::load(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

DomainIndexTable assign_indices(const std::map<std::string, double>& distances,
                                const std::string& source_device) {
  std::vector<std::pair<std::string, double>> order(distances.begin(), distances.end());
  order.erase(std::remove_if(order.begin(), order.end(),
                             [&](const auto& p) { return p.first == source_device; }),
              order.end());
  // std::map iteration is already sorted by id, so a stable sort keeps the tie rule.
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second < b.second; });
  std::map<std::string, DomainEntry> entries;
  entries.emplace(source_device, DomainEntry{0.0, 0});
  for (std::size_t r = 0; r < order.size(); ++r) {
    entries.emplace(order[r].first, DomainEntry{order[r].second, static_cast<int>(r + 1)});
  }
  return DomainIndexTable(source_device, std::move(entries));
}

std::string infer_source_device(const Manifest& manifest) {
  std::set<std::string> labeled;
  for (const auto& r : manifest.rows) {
    if (r.split == "train" && r.labeled()) labeled.insert(r.device);
  }
  if (labeled.size() != 1) {
    throw ContractError("expected exactly one device with labeled train rows, found " +
                        std::to_string(labeled.size()));
  }
  return *labeled.begin();
}

std::vector<double> time_average(const Tensor<double>& frames) {
  const std::size_t t = frames.dim(0), bands = frames.dim(1);
  std::vector<double> out(bands, 0.0);
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t m = 0; m < bands; ++m) out[m] += frames.at(i, m);
  for (auto& v : out) v /= static_cast<double>(t);
  return out;
}

IndexResult index_domains(const Manifest& manifest, const IndexConfig& config) {
  const std::string source = infer_source_device(manifest);

  // group id -> row indices, in manifest order
  std::map<std::string, std::vector<std::size_t>> groups;
  std::set<std::string> devices;
  for (std::size_t i = 0; i < manifest.rows.size(); ++i) {
    const auto& r = manifest.rows[i];
    if (r.split == "train") devices.insert(r.device);
    if (!r.parallel_group.empty()) groups[r.parallel_group].push_back(i);
  }
  std::vector<std::size_t> selected;
  std::size_t used_groups = 0;
  for (const auto& [gid, members] : groups) {
    const bool has_source = std::any_of(members.begin(), members.end(),
                                        [&](std::size_t i) { return manifest.rows[i].device == source; });
    if (!has_source || members.size() < 2) continue;
    if (config.max_groups && used_groups == config.max_groups) break;
    ++used_groups;
    selected.insert(selected.end(), members.begin(), members.end());
  }
  if (selected.size() < 5) throw ContractError("index: fewer than 5 rows with parallel data");

  IndexResult result;
  const std::size_t n = selected.size();
  std::size_t bands = 0;
  std::vector<double> data;
  for (std::size_t i : selected) {
    const auto& row = manifest.rows[i];
    const auto feat = read_features(manifest.resolve(row.feature_path));
    const auto avg = time_average(feat.frames);
    if (bands == 0) bands = avg.size();
    if (avg.size() != bands) throw ShapeError("index: feature band counts differ");
    data.insert(data.end(), avg.begin(), avg.end());
    result.embedded_rows.push_back(row);
  }
  const Tensor<double> X({n, bands}, std::move(data));

  TsneConfig tcfg;
  tcfg.perplexity = effective_perplexity(n, config.perplexity);
  tcfg.iterations = config.iterations;
  tcfg.seed = config.seed;
  result.embedding = run_tsne(X, tcfg).Y;

  std::map<std::string, std::size_t> source_pos;  // group -> embedded position
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = result.embedded_rows[k];
    if (r.device == source) source_pos.emplace(r.parallel_group, k);
  }
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = result.embedded_rows[k];
    if (r.device == source) continue;
    const std::size_t s = source_pos.at(r.parallel_group);
    result.pairs[r.device].push_back({{result.embedding.at(k, 0), result.embedding.at(k, 1)},
                                      {result.embedding.at(s, 0), result.embedding.at(s, 1)}});
  }

  std::map<std::string, double> distances;
  for (const auto& dev : devices) {
    if (dev == source) continue;
    auto it = result.pairs.find(dev);
    if (it == result.pairs.end()) {
      throw ContractError("device " + dev + " has no parallel data");
    }
    distances[dev] = domain_distance(it->second);
  }
  result.table = assign_indices(distances, source);
  return result;
}

}  // namespace mtda
