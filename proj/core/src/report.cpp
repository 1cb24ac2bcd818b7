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

#include "mtda/report.hpp"

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "mtda/manifest.hpp"

namespace mtda {

std::string format_double(double v) { return fmt::format("{}", v); }

nlohmann::json ExperimentReport::to_json() const {
  auto acc_json = [](const std::map<std::string, Accuracy>& m) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, a] : m) {
      j[name] = {{"correct", a.correct}, {"total", a.total}, {"accuracy", a.value()}};
    }
    return j;
  };
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& r : loss_curve) curve.push_back({r.step, r.scene, r.domain, r.total});
  return {{"devices", acc_json(devices)},
          {"groups", acc_json(groups)},
          {"loss_curve", {{"columns", {"step", "L_y", "L_d", "L_total"}}, {"rows", curve}}},
          {"index_table", index_table.entries().empty() ? nlohmann::json::object() : index_table.to_json()},
          {"config", config},
          {"best_step", best_step},
          {"best_val_accuracy", best_val_accuracy}};
}

void tally_groups(ExperimentReport& report, const DeviceGroups& groups) {
  report.groups.clear();
  for (const auto& [name, members] : groups) {
    Accuracy pooled;
    for (const auto& device : members) {
      auto it = report.devices.find(device);
      if (it == report.devices.end()) continue;
      pooled.correct += it->second.correct;
      pooled.total += it->second.total;
    }
    if (pooled.total == 0) {
      spdlog::warn("group '{}' has no evaluated rows; omitted", name);
      continue;
    }
    report.groups[name] = pooled;
  }
}

std::string format_accuracy_csv(const ExperimentReport& report) {
  std::string out = "name,kind,correct,total,accuracy\n";
  auto emit = [&](const std::map<std::string, Accuracy>& m, const char* kind) {
    for (const auto& [name, a] : m) {
      out += fmt::format("{},{},{},{},{}\n", csv_escape(name), kind, a.correct, a.total, format_double(a.value()));
    }
  };
  emit(report.devices, "device");
  emit(report.groups, "group");
  return out;
}

std::string format_loss_csv(const std::vector<LossRecord>& log) {
  std::string out = "step,L_y,L_d,L_total\n";
  for (const auto& r : log) {
    out += fmt::format("{},{},{},{}\n", r.step, format_double(r.scene), format_double(r.domain),
                       format_double(r.total));
  }
  return out;
}

void write_report(const std::filesystem::path& dir, const ExperimentReport& report) {
  std::filesystem::create_directories(dir);
  write_text_if_changed(dir / "report.json", report.to_json().dump(2) + "\n");
  write_text_if_changed(dir / "accuracy.csv", format_accuracy_csv(report));
  write_text_if_changed(dir / "train_log.csv", format_loss_csv(report.loss_curve));
  write_text_if_changed(dir / "timing.json", nlohmann::json{{"wall_seconds", report.wall_seconds}}.dump(2) + "\n");
}

}  // namespace mtda
