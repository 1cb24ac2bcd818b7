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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtda/geometry.hpp"
#include "mtda/manifest.hpp"
#include "mtda/model.hpp"
#include "mtda/optimizer.hpp"
#include "mtda/report.hpp"
#include "mtda/tsne.hpp"

namespace mtda {

inline const std::vector<double> kDefaultLambdaGrid = {0.2, 0.5, 1.0, 2.0, 5.0, 8.0, 10.0};

struct TrainConfig {
  DiscriminatorMode mode = DiscriminatorMode::kMtdaC2;
  double lambda_d = 1.0;
  double temperature = 10.0;
  AdamConfig adam;
  std::size_t batch_size = 32;
  int epochs = 200;
  std::uint64_t seed = 0;
  double source_fraction = 0.5;
  std::vector<double> lambda_grid = kDefaultLambdaGrid;
  // Share of source train rows held out for model selection when the
  // manifest has no "val" split.
  double val_fraction = 0.2;
  bool normalize_regression_target = false;
  std::size_t conv1 = 8;
  std::size_t conv2 = 16;
  std::size_t feature_dim = 64;
  std::size_t hidden = 32;
  // Report groups; empty means {"targets": every non-source device}.
  DeviceGroups groups;
  // Group whose accuracy ranks sweep runs.
  std::string select_group = "targets";
  std::string eval_split = "test";

  void validate() const;
};

/// Unknown keys are rejected. Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainConfig& config);
/// Key names accepted by train_config_from_json.
const std::vector<std::string>& train_config_keys();

/// Scene label strings in class-id order.
using ClassLabels = std::vector<std::string>;

/// A trained model plus what is needed to interpret its outputs.
struct TrainedModel {
  AdversarialModel<float> model;
  ClassLabels classes;
  DomainIndexTable index_table;

  /// Writes the checkpoint container and a `<path>.json` sidecar with the
  /// class labels and the domain index table.
  void save(const std::filesystem::path& path) const;
  static TrainedModel load(const std::filesystem::path& path);
};

struct TrainResult {
  TrainedModel trained;
  ExperimentReport report;
};

/// Adversarial training followed by evaluation of `config.eval_split`.
/// Throws ContractError without labeled source train rows or target train
/// rows, and NumericError (naming the step) when the loss turns non-finite.
TrainResult train(const TrainConfig& config, const Manifest& manifest, const DomainIndexTable& index_table);

/// Per-device and grouped accuracy of argmax y_pred over the rows of
/// `split`. Devices without rows are omitted with a warning.
ExperimentReport evaluate(const TrainedModel& trained, const Manifest& manifest, const std::string& split,
                          const DeviceGroups& groups = {});

/// Default groups: "targets" = every device except the source.
DeviceGroups default_groups(const Manifest& manifest, const std::string& source_device);

struct EmbeddingExport {
  std::vector<ManifestRow> rows;
  Tensor<double> z;  // n × feature_dim
  Embedding embedding;
};

/// z = F(x) for up to `n_per_device` rows per device (deterministic sample
/// by seed), then t-SNE. Devices with fewer rows contribute all of them.
EmbeddingExport export_embeddings(const TrainedModel& trained, const Manifest& manifest,
                                  std::size_t n_per_device, const TsneConfig& tsne,
                                  const std::string& split = "test");

struct SweepRow {
  double lambda_d = 0.0;
  bool ok = false;
  std::string error;
  double selected_accuracy = 0.0;
  std::optional<ExperimentReport> report;
};

struct SweepSummary {
  std::vector<SweepRow> rows;
  std::string column;
  std::optional<std::size_t> best;  // index into rows

  nlohmann::json to_json() const;
  /// `lambda_d,status,<column>,error`.
  std::string to_csv() const;
};

/// Best = highest accuracy on `column`; ties go to the smaller λ_d.
std::optional<std::size_t> select_best(const std::vector<SweepRow>& rows);

/// One train+evaluate per λ_d in config.lambda_grid. A failing run is
/// recorded and the sweep continues. When `out_dir` is set each run's
/// checkpoint and report go to `<out_dir>/lambda_<value>/`.
SweepSummary sweep(const TrainConfig& config, const Manifest& manifest, const DomainIndexTable& index_table,
                   const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace mtda
