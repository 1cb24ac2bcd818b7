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
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mtda/manifest.hpp"

namespace mtda {

struct IngestError {
  std::string id;
  std::string path;
  std::string message;
};

struct IngestResult {
  Manifest manifest;  // rows that produced features, feature_path filled
  std::vector<IngestError> errors;
  std::size_t written = 0;
  std::size_t skipped = 0;

  bool ok() const { return errors.empty(); }
};

/// Converts every manifest WAV to a log-mel feature file `<out_dir>/<id>.mtdt`
/// and writes `<out_dir>/manifest.csv` plus `<out_dir>/ingest_errors.csv`.
///
/// A feature file is rewritten only when the SHA-256 of its source WAV
/// differs from the digest recorded next to it, so reruns on unchanged
/// inputs write nothing. Unreadable rows are collected in `errors` and
/// left out of the output manifest.
IngestResult ingest(const Manifest& input, const std::filesystem::path& out_dir);

std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace mtda
