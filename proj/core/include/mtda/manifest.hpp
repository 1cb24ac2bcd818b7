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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mtda {

/// One sample. `scene` is empty for unlabeled target rows and
/// `parallel_group` is empty when the sample has no parallel recording.
struct ManifestRow {
  std::string id;
  std::string path;
  std::string scene;
  std::string device;
  std::string parallel_group;
  std::string split;
  std::string feature_path;

  bool labeled() const { return !scene.empty(); }
  friend bool operator==(const ManifestRow&, const ManifestRow&) = default;
};

/// Rows plus the directory that relative paths resolve against.
struct Manifest {
  std::vector<ManifestRow> rows;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& relative) const;
};

inline constexpr std::string_view kManifestHeader =
    "id,path,scene,device,parallel_group,split,feature_path";

std::string format_manifest(const Manifest& manifest);
Manifest parse_manifest(std::string_view text, std::filesystem::path base_dir = {});

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

// Minimal RFC 4180 helpers shared by the CSV writers.
std::string csv_escape(std::string_view field);
std::vector<std::string> csv_split(std::string_view line);

/// Writes `text` to `path` unless the file already holds exactly those
/// bytes. Returns true when the file was written.
bool write_text_if_changed(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mtda
