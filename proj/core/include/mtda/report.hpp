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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtda/geometry.hpp"

namespace mtda {

struct Accuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double value() const { return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total); }
};

/// One row of the training log.
struct LossRecord {
  std::size_t step = 0;
  double scene = 0.0;
  double domain = 0.0;
  double total = 0.0;
};

/// Named device groups for grouped accuracies, e.g. {"B&C": {"B", "C"}}.
using DeviceGroups = std::map<std::string, std::vector<std::string>>;

struct ExperimentReport {
  std::map<std::string, Accuracy> devices;
  std::map<std::string, Accuracy> groups;
  std::vector<LossRecord> loss_curve;
  DomainIndexTable index_table;
  nlohmann::json config = nlohmann::json::object();
  double wall_seconds = 0.0;
  std::size_t best_step = 0;
  double best_val_accuracy = 0.0;

  /// Everything except wall time, so identical runs serialize identically.
  nlohmann::json to_json() const;
};

/// Fills report.groups from report.devices. A group pools its member
/// devices' rows; groups with no rows are omitted with a warning.
void tally_groups(ExperimentReport& report, const DeviceGroups& groups);

/// `name,kind,correct,total,accuracy`, devices first, then groups.
std::string format_accuracy_csv(const ExperimentReport& report);
/// `step,L_y,L_d,L_total`.
std::string format_loss_csv(const std::vector<LossRecord>& log);

/// Writes report.json, accuracy.csv, train_log.csv and timing.json under `dir`.
void write_report(const std::filesystem::path& dir, const ExperimentReport& report);

/// Shortest round-trip decimal form.
std::string format_double(double v);

}  // namespace mtda
