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
#include <vector>

#include <nlohmann/json.hpp>

namespace mtda::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitContract = 1;
inline constexpr int kExitIo = 2;

/// Runs one invocation. `args[0]` is the program name. Messages go to the
/// spdlog default logger; outputs go to files under --out.
int dispatch(const std::vector<std::string>& args);

/// Parses `key=value`. The value is read as JSON when it parses, otherwise
/// kept as a string.
std::pair<std::string, nlohmann::json> parse_override(const std::string& text);

/// Reads a config file. A `run.json` written by a previous invocation is
/// unwrapped to its config when its subcommand matches.
nlohmann::json load_config(const std::filesystem::path& path, const std::string& subcommand);

}  // namespace mtda::cli
