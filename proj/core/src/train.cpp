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

#include "mtda/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <set>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "mtda/audio.hpp"
#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {
namespace {

constexpr std::size_t kEvalChunk = 64;

using FeatureCache = std::map<std::size_t, Tensor<float>>;

void load_rows(const Manifest& manifest, const std::vector<std::size_t>& rows, FeatureCache& cache) {
  for (std::size_t r : rows) {
    if (cache.count(r) != 0) continue;
    const ManifestRow& row = manifest.rows[r];
    if (row.feature_path.empty()) throw ContractError("row '" + row.id + "' has no feature_path; run ingest first");
    FeatureTensor f = read_features(manifest.resolve(row.feature_path));
    if (!cache.empty()) {
      const Dims& want = cache.begin()->second.dims();
      if (f.frames.dims() != want) {
        throw ShapeError("row '" + row.id + "' has features " + dims_to_string(f.frames.dims()) + ", expected " +
                         dims_to_string(want));
      }
    }
    cache.emplace(r, f.frames.cast<float>());
  }
}

Tensor<float> stack(const FeatureCache& cache, std::span<const std::size_t> rows) {
  const Dims& fd = cache.at(rows.front()).dims();
  const std::size_t per = fd[0] * fd[1];
  std::vector<float> data;
  data.reserve(rows.size() * per);
  for (std::size_t r : rows) {
    const auto& src = cache.at(r).values();
    data.insert(data.end(), src.begin(), src.end());
  }
  return Tensor<float>({rows.size(), 1, fd[0], fd[1]}, std::move(data));
}

std::size_t argmax_row(const Tensor<float>& t, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < t.dim(1); ++j) {
    if (t.at(row, j) > t.at(row, best)) best = j;
  }
  return best;
}

std::vector<std::size_t> predict(const AdversarialModel<float>& model, const FeatureCache& cache,
                                 const std::vector<std::size_t>& rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (std::size_t begin = 0; begin < rows.size(); begin += kEvalChunk) {
    std::size_t end = std::min(rows.size(), begin + kEvalChunk);
    std::span<const std::size_t> chunk(rows.data() + begin, end - begin);
    Graph<float> g(&model.params());
    ForwardNodes f = model.forward(g, stack(cache, chunk), 0.0);
    const Tensor<float>& y = g.value(f.y_pred);
    for (std::size_t i = 0; i < chunk.size(); ++i) out.push_back(argmax_row(y, i));
  }
  return out;
}

Accuracy score(const AdversarialModel<float>& model, const ClassLabels& classes, const FeatureCache& cache,
               const Manifest& manifest, const std::vector<std::size_t>& rows) {
  Accuracy acc;
  if (rows.empty()) return acc;
  std::vector<std::size_t> pred = predict(model, cache, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string& truth = manifest.rows[rows[i]].scene;
    acc.total += 1;
    acc.correct += classes[pred[i]] == truth ? 1 : 0;
  }
  return acc;
}

std::size_t class_index(const ClassLabels& classes, const std::string& label) {
  auto it = std::lower_bound(classes.begin(), classes.end(), label);
  if (it == classes.end() || *it != label) throw ContractError("scene '" + label + "' is not a known class");
  return static_cast<std::size_t>(it - classes.begin());
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(lambda_d >= 0.0)) throw ContractError("lambda_d must be >= 0");
  if (!(temperature > 0.0)) throw ContractError("temperature must be > 0");
  if (!(adam.learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ContractError("Adam betas must lie in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ContractError("epsilon must be > 0");
  if (batch_size < 2) throw ContractError("batch_size must be >= 2");
  if (epochs < 1) throw ContractError("epochs must be >= 1");
  if (!(source_fraction > 0.0 && source_fraction < 1.0)) throw ContractError("source_fraction must lie in (0, 1)");
  double ns = static_cast<double>(batch_size) * source_fraction;
  if (std::abs(ns - std::round(ns)) > 1e-9) {
    throw ContractError(fmt::format("batch_size {} does not split evenly at source_fraction {}", batch_size,
                                    source_fraction));
  }
  if (std::round(ns) < 1.0 || std::round(ns) > static_cast<double>(batch_size - 1)) {
    throw ContractError("batch must hold at least one source and one target row");
  }
  if (lambda_grid.empty()) throw ContractError("lambda_grid must not be empty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0)) throw ContractError("lambda_grid values must be >= 0");
  }
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ContractError("val_fraction must lie in [0, 1)");
  if (conv1 == 0 || conv2 == 0 || feature_dim == 0 || hidden == 0) throw ContractError("layer widths must be > 0");
  if (eval_split.empty()) throw ContractError("eval_split must not be empty");
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "mode",        "lambda_d",     "temperature", "learning_rate", "beta1",        "beta2",
      "epsilon",     "batch_size",   "epochs",      "seed",          "source_fraction", "lambda_grid",
      "val_fraction", "normalize_regression_target", "conv1", "conv2", "feature_dim", "hidden",
      "groups",      "select_group", "eval_split"};
  return keys;
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ContractError("train config must be a JSON object");
  const auto& keys = train_config_keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ContractError("unknown train config key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
    c.lambda_d = get_or(j, "lambda_d", c.lambda_d);
    c.temperature = get_or(j, "temperature", c.temperature);
    c.adam.learning_rate = get_or(j, "learning_rate", c.adam.learning_rate);
    c.adam.beta1 = get_or(j, "beta1", c.adam.beta1);
    c.adam.beta2 = get_or(j, "beta2", c.adam.beta2);
    c.adam.epsilon = get_or(j, "epsilon", c.adam.epsilon);
    c.batch_size = get_or(j, "batch_size", c.batch_size);
    c.epochs = get_or(j, "epochs", c.epochs);
    c.seed = get_or(j, "seed", c.seed);
    c.source_fraction = get_or(j, "source_fraction", c.source_fraction);
    c.lambda_grid = get_or(j, "lambda_grid", c.lambda_grid);
    c.val_fraction = get_or(j, "val_fraction", c.val_fraction);
    c.normalize_regression_target = get_or(j, "normalize_regression_target", c.normalize_regression_target);
    c.conv1 = get_or(j, "conv1", c.conv1);
    c.conv2 = get_or(j, "conv2", c.conv2);
    c.feature_dim = get_or(j, "feature_dim", c.feature_dim);
    c.hidden = get_or(j, "hidden", c.hidden);
    c.groups = get_or(j, "groups", c.groups);
    c.select_group = get_or(j, "select_group", c.select_group);
    c.eval_split = get_or(j, "eval_split", c.eval_split);
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"mode", to_string(c.mode)},
          {"lambda_d", c.lambda_d},
          {"temperature", c.temperature},
          {"learning_rate", c.adam.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"source_fraction", c.source_fraction},
          {"lambda_grid", c.lambda_grid},
          {"val_fraction", c.val_fraction},
          {"normalize_regression_target", c.normalize_regression_target},
          {"conv1", c.conv1},
          {"conv2", c.conv2},
          {"feature_dim", c.feature_dim},
          {"hidden", c.hidden},
          {"groups", c.groups},
          {"select_group", c.select_group},
          {"eval_split", c.eval_split}};
}

void TrainedModel::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  model.save(path);
  nlohmann::json side = {{"mode", to_string(model.mode())}, {"classes", classes}, {"index_table", index_table.to_json()},
                         {"source_device", index_table.source_device()}};
  write_text_if_changed(path.string() + ".json", side.dump(2) + "\n");
}

TrainedModel TrainedModel::load(const std::filesystem::path& path) {
  AdversarialModel<float> model = AdversarialModel<float>::load(path);
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_text(path.string() + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint sidecar " + path.string() + ".json: " + e.what());
  }
  TrainedModel t{std::move(model), side.at("classes").get<ClassLabels>(),
                 DomainIndexTable::from_json(side.at("index_table"))};
  if (t.classes.size() != t.model.shape().num_classes) {
    throw ContractError("checkpoint sidecar lists " + std::to_string(t.classes.size()) + " classes, model has " +
                        std::to_string(t.model.shape().num_classes));
  }
  if (!std::is_sorted(t.classes.begin(), t.classes.end())) throw ContractError("checkpoint class labels not sorted");
  return t;
}

DeviceGroups default_groups(const Manifest& manifest, const std::string& source_device) {
  std::set<std::string> devices;
  for (const auto& row : manifest.rows) {
    if (row.device != source_device) devices.insert(row.device);
  }
  return {{"targets", std::vector<std::string>(devices.begin(), devices.end())}};
}

TrainResult train(const TrainConfig& config, const Manifest& manifest, const DomainIndexTable& index_table) {
  const auto started = std::chrono::steady_clock::now();
  config.validate();
  const std::string& source = index_table.source_device();
  if (source.empty() || !index_table.contains(source)) throw ContractError("index table has no source device");

  std::vector<std::size_t> source_train;
  std::vector<std::size_t> source_val;
  std::map<std::string, std::vector<std::size_t>> target_train;
  std::set<std::string> class_set;
  for (std::size_t r = 0; r < manifest.rows.size(); ++r) {
    const ManifestRow& row = manifest.rows[r];
    if (row.device == source) {
      if (!row.labeled()) continue;
      if (row.split == "train") source_train.push_back(r);
      if (row.split == "val") source_val.push_back(r);
      if (row.split == "train" || row.split == "val") class_set.insert(row.scene);
    } else if (row.split == "train") {
      if (!index_table.contains(row.device)) {
        throw ContractError("index table has no entry for training device '" + row.device + "'");
      }
      target_train[row.device].push_back(r);
    }
  }
  if (source_train.empty()) throw ContractError("no labeled source train rows for device '" + source + "'");
  if (target_train.empty()) throw ContractError("no target-domain train rows");
  if (class_set.size() < 2) throw ContractError("source rows carry fewer than 2 scene classes");
  ClassLabels classes(class_set.begin(), class_set.end());

  if (source_val.empty() && config.val_fraction > 0.0) {
    Rng rng = derive_rng(config.seed, fnv1a("validation"));
    std::vector<std::size_t> shuffled = source_train;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto n_val = static_cast<std::size_t>(std::round(config.val_fraction * static_cast<double>(shuffled.size())));
    n_val = std::min(n_val, shuffled.size() - 1);
    source_val.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_val));
    std::sort(source_val.begin(), source_val.end());
    std::vector<std::size_t> kept;
    std::set_difference(source_train.begin(), source_train.end(), source_val.begin(), source_val.end(),
                        std::back_inserter(kept));
    source_train = std::move(kept);
  }
  if (source_val.empty()) spdlog::warn("no source validation rows; keeping the final checkpoint");

  FeatureCache cache;
  load_rows(manifest, source_train, cache);
  load_rows(manifest, source_val, cache);
  for (const auto& [device, rows] : target_train) load_rows(manifest, rows, cache);

  ModelShape shape{classes.size(), index_table.num_domains(), config.conv1, config.conv2, config.feature_dim,
                   config.hidden};
  AdversarialModel<float> model(config.mode, shape, config.seed);
  Adam<float> adam(config.adam);

  std::vector<int> source_labels(manifest.rows.size(), -1);
  for (std::size_t r : source_train) source_labels[r] = static_cast<int>(class_index(classes, manifest.rows[r].scene));
  std::vector<std::string> target_devices;
  for (const auto& [device, rows] : target_train) target_devices.push_back(device);

  const auto n_source = static_cast<std::size_t>(std::round(static_cast<double>(config.batch_size) *
                                                            config.source_fraction));
  const std::size_t n_target = config.batch_size - n_source;
  const std::size_t steps_per_epoch = (source_train.size() + n_source - 1) / n_source;

  LossOptions options;
  options.lambda_d = config.lambda_d;
  options.temperature = config.temperature;
  options.normalize_regression_target = config.normalize_regression_target;

  Rng rng = derive_rng(config.seed, fnv1a("batches"));
  std::vector<std::size_t> order = source_train;
  std::size_t cursor = order.size();
  std::uniform_int_distribution<std::size_t> pick_device(0, target_devices.size() - 1);

  ExperimentReport report;
  std::vector<Tensor<float>> best_params;
  double best_val = -1.0;
  std::size_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      std::vector<std::size_t> rows;
      Batch<float> batch;
      for (std::size_t i = 0; i < n_source; ++i) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), rng);
          cursor = 0;
        }
        std::size_t r = order[cursor++];
        rows.push_back(r);
        batch.scene.push_back(source_labels[r]);
        batch.domain.push_back(0);
      }
      for (std::size_t i = 0; i < n_target; ++i) {
        const std::string& device = target_devices[pick_device(rng)];
        const auto& pool = target_train.at(device);
        std::uniform_int_distribution<std::size_t> pick_row(0, pool.size() - 1);
        rows.push_back(pool[pick_row(rng)]);
        batch.scene.push_back(-1);
        batch.domain.push_back(index_table.index_of(device));
      }
      batch.x = stack(cache, rows);

      Graph<float> g(&model.params());
      LossNodes nodes;
      Gradients<float> grads;
      try {
        nodes = model.build_loss(g, batch, options);
        grads = g.backward(nodes.total);
      } catch (const NumericError& e) {
        throw NumericError(fmt::format("training diverged at step {}: {}", step, e.what()));
      }
      report.loss_curve.push_back({step, g.value(nodes.scene)[0], g.value(nodes.domain)[0], g.value(nodes.total)[0]});
      adam.step(model.params(), grads);
    }
    if (!source_val.empty()) {
      double acc = score(model, classes, cache, manifest, source_val).value();
      spdlog::debug("epoch {} source val accuracy {:.4f}", epoch, acc);
      if (acc > best_val) {
        best_val = acc;
        report.best_step = step;
        best_params.clear();
        for (std::size_t i = 0; i < model.params().size(); ++i) best_params.push_back(model.params().value(i));
      }
    }
  }
  if (!best_params.empty()) {
    for (std::size_t i = 0; i < best_params.size(); ++i) model.params().value(i) = best_params[i];
    report.best_val_accuracy = best_val;
  } else {
    report.best_step = step;
  }

  TrainResult result{TrainedModel{std::move(model), classes, index_table}, {}};
  DeviceGroups groups = config.groups.empty() ? default_groups(manifest, source) : config.groups;
  result.report = evaluate(result.trained, manifest, config.eval_split, groups);
  result.report.loss_curve = std::move(report.loss_curve);
  result.report.best_step = report.best_step;
  result.report.best_val_accuracy = report.best_val_accuracy;
  result.report.config = to_json(config);
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

ExperimentReport evaluate(const TrainedModel& trained, const Manifest& manifest, const std::string& split,
                          const DeviceGroups& groups) {
  std::map<std::string, std::vector<std::size_t>> by_device;
  std::set<std::string> all_devices;
  for (std::size_t r = 0; r < manifest.rows.size(); ++r) {
    const ManifestRow& row = manifest.rows[r];
    all_devices.insert(row.device);
    if (row.split != split) continue;
    if (!row.labeled()) {
      spdlog::warn("row '{}' in split '{}' has no scene label; skipped", row.id, split);
      continue;
    }
    by_device[row.device].push_back(r);
  }
  ExperimentReport report;
  report.index_table = trained.index_table;
  for (const auto& device : all_devices) {
    if (by_device.count(device) == 0) spdlog::warn("device '{}' has no '{}' rows; omitted", device, split);
  }
  for (const auto& [device, rows] : by_device) {
    FeatureCache cache;
    load_rows(manifest, rows, cache);
    report.devices[device] = score(trained.model, trained.classes, cache, manifest, rows);
  }
  DeviceGroups resolved =
      groups.empty() ? default_groups(manifest, trained.index_table.source_device()) : groups;
  tally_groups(report, resolved);
  return report;
}

EmbeddingExport export_embeddings(const TrainedModel& trained, const Manifest& manifest, std::size_t n_per_device,
                                  const TsneConfig& tsne, const std::string& split) {
  if (n_per_device < 5) throw ContractError("n_per_device must be >= 5");
  std::map<std::string, std::vector<std::size_t>> by_device;
  for (std::size_t r = 0; r < manifest.rows.size(); ++r) {
    if (manifest.rows[r].split == split) by_device[manifest.rows[r].device].push_back(r);
  }
  std::vector<std::size_t> chosen;
  for (auto& [device, rows] : by_device) {
    if (rows.size() < n_per_device) {
      spdlog::warn("device '{}' has {} '{}' rows, fewer than the {} requested; using all", device, rows.size(),
                   split, n_per_device);
    } else {
      Rng rng = derive_rng(tsne.seed, fnv1a(device));
      std::shuffle(rows.begin(), rows.end(), rng);
      rows.resize(n_per_device);
      std::sort(rows.begin(), rows.end());
    }
    chosen.insert(chosen.end(), rows.begin(), rows.end());
  }
  if (chosen.size() < 3) throw ContractError("too few rows to embed");

  FeatureCache cache;
  load_rows(manifest, chosen, cache);
  EmbeddingExport out;
  const std::size_t width = trained.model.shape().feature_dim;
  std::vector<double> z;
  z.reserve(chosen.size() * width);
  for (std::size_t begin = 0; begin < chosen.size(); begin += kEvalChunk) {
    std::size_t end = std::min(chosen.size(), begin + kEvalChunk);
    Graph<float> g(&trained.model.params());
    ForwardNodes f =
        trained.model.forward(g, stack(cache, std::span<const std::size_t>(chosen.data() + begin, end - begin)), 0.0);
    for (float v : g.value(f.z).values()) z.push_back(v);
  }
  out.z = Tensor<double>({chosen.size(), width}, std::move(z));
  for (std::size_t r : chosen) out.rows.push_back(manifest.rows[r]);
  TsneConfig cfg = tsne;
  cfg.perplexity = effective_perplexity(chosen.size(), tsne.perplexity);
  out.embedding = run_tsne(out.z, cfg);
  return out;
}

std::optional<std::size_t> select_best(const std::vector<SweepRow>& rows) {
  std::optional<std::size_t> best;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!rows[i].ok) continue;
    if (!best) {
      best = i;
      continue;
    }
    const SweepRow& b = rows[*best];
    const SweepRow& c = rows[i];
    if (c.selected_accuracy > b.selected_accuracy ||
        (c.selected_accuracy == b.selected_accuracy && c.lambda_d < b.lambda_d)) {
      best = i;
    }
  }
  return best;
}

nlohmann::json SweepSummary::to_json() const {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = {{"lambda_d", r.lambda_d}, {"status", r.ok ? "ok" : "failed"}};
    if (r.ok) j[column] = r.selected_accuracy;
    if (!r.ok) j["error"] = r.error;
    runs.push_back(std::move(j));
  }
  nlohmann::json out = {{"column", column}, {"runs", runs}};
  out["best_lambda_d"] = best ? nlohmann::json(rows[*best].lambda_d) : nlohmann::json(nullptr);
  return out;
}

std::string SweepSummary::to_csv() const {
  std::string out = "lambda_d,status," + csv_escape(column) + ",error\n";
  for (const auto& r : rows) {
    out += fmt::format("{},{},{},{}\n", format_double(r.lambda_d), r.ok ? "ok" : "failed",
                       r.ok ? format_double(r.selected_accuracy) : "", csv_escape(r.error));
  }
  return out;
}

SweepSummary sweep(const TrainConfig& config, const Manifest& manifest, const DomainIndexTable& index_table,
                   const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  SweepSummary summary;
  summary.column = config.select_group;
  for (double lambda : config.lambda_grid) {
    SweepRow row;
    row.lambda_d = lambda;
    try {
      TrainConfig run = config;
      run.lambda_d = lambda;
      TrainResult result = train(run, manifest, index_table);
      auto it = result.report.groups.find(config.select_group);
      if (it == result.report.groups.end()) {
        throw ContractError("report has no group '" + config.select_group + "'");
      }
      row.selected_accuracy = it->second.value();
      if (out_dir) {
        std::filesystem::path dir = *out_dir / ("lambda_" + format_double(lambda));
        result.trained.save(dir / "model.ckpt");
        write_report(dir, result.report);
      }
      row.report = std::move(result.report);
      row.ok = true;
    } catch (const std::exception& e) {
      spdlog::error("sweep run lambda_d={} failed: {}", lambda, e.what());
      row.error = e.what();
    }
    summary.rows.push_back(std::move(row));
  }
  summary.best = select_best(summary.rows);
  return summary;
}

}  // namespace mtda
