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

#include "cli.hpp"

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "mtda/errors.hpp"
#include "mtda/geometry.hpp"
#include "mtda/ingest.hpp"
#include "mtda/manifest.hpp"
#include "mtda/synth.hpp"
#include "mtda/train.hpp"
#include "mtda/tsne.hpp"

namespace mtda::cli {
namespace fs = std::filesystem;
namespace {

// Keys holding file paths; relative values resolve against the config
// file's directory (or the working directory for --override).
const std::vector<std::string> kPathKeys = {"manifest", "index_table", "checkpoint"};

struct Invocation {
  std::string subcommand;
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
};

bool is_path_key(const std::string& key) {
  return std::find(kPathKeys.begin(), kPathKeys.end(), key) != kPathKeys.end();
}

void absolutize_paths(nlohmann::json& j, const fs::path& base) {
  for (const auto& key : kPathKeys) {
    if (!j.contains(key)) continue;
    if (!j[key].is_string()) throw ContractError("config key '" + key + "' must be a path string");
    fs::path p = j[key].get<std::string>();
    j[key] = fs::absolute(p.is_absolute() ? p : base / p).lexically_normal().string();
  }
}

/// Removes and returns the listed keys, rejecting anything not in `allowed`.
nlohmann::json take_keys(nlohmann::json& j, const std::vector<std::string>& take,
                         const std::vector<std::string>& allowed, const std::string& subcommand) {
  nlohmann::json taken = nlohmann::json::object();
  for (const auto& key : take) {
    if (j.contains(key)) {
      taken[key] = j[key];
      j.erase(key);
    }
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ContractError("unknown " + subcommand + " config key '" + key + "'");
    }
  }
  return taken;
}

std::string require_path(const nlohmann::json& j, const std::string& key, const std::string& subcommand) {
  if (!j.contains(key)) throw ContractError(subcommand + " needs config key '" + key + "'");
  return j.at(key).get<std::string>();
}

template <typename T>
T value_or(const nlohmann::json& j, const char* key, T fallback) {
  try {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
  } catch (const nlohmann::json::exception& e) {
    throw ContractError(std::string("config key '") + key + "': " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text_if_changed(path, j.dump(2) + "\n"); }

// --- subcommands ---------------------------------------------------------

void run_synth(nlohmann::json config, const fs::path& out) {
  SynthConfig synth = synth_config_from_json(config);
  SynthDataset data = make_dataset(synth, out);
  spdlog::info("synth: {} rows written to {}", data.manifest.rows.size(), out.string());
}

int run_ingest(nlohmann::json config, const fs::path& out) {
  nlohmann::json paths = take_keys(config, {"manifest"}, {"seed"}, "ingest");
  Manifest input = read_manifest(require_path(paths, "manifest", "ingest"));
  IngestResult result = ingest(input, out);
  spdlog::info("ingest: {} written, {} up to date, {} failed", result.written, result.skipped,
               result.errors.size());
  for (const auto& e : result.errors) spdlog::error("ingest: {} ({}): {}", e.id, e.path, e.message);
  return result.ok() ? kExitOk : kExitIo;
}

void run_index(nlohmann::json config, const fs::path& out) {
  nlohmann::json paths = take_keys(config, {"manifest"}, {"perplexity", "iterations", "seed", "max_groups"}, "index");
  IndexConfig ic;
  ic.perplexity = value_or(config, "perplexity", ic.perplexity);
  ic.iterations = value_or(config, "iterations", ic.iterations);
  ic.seed = value_or(config, "seed", ic.seed);
  ic.max_groups = value_or(config, "max_groups", ic.max_groups);
  Manifest manifest = read_manifest(require_path(paths, "manifest", "index"));
  IndexResult result = index_domains(manifest, ic);
  result.table.save(out / "index_table.json");
  write_text_if_changed(out / "index_embedding.csv", format_embedding_csv(result.embedded_rows, result.embedding));
  for (const auto& device : result.table.ranked_targets()) {
    spdlog::info("index: {} -> u={} (distance {:.4f})", device, result.table.index_of(device),
                 result.table.distance_of(device));
  }
}

void run_train(nlohmann::json config, const fs::path& out) {
  nlohmann::json paths = take_keys(config, {"manifest", "index_table"}, train_config_keys(), "train");
  TrainConfig tc = train_config_from_json(config);
  Manifest manifest = read_manifest(require_path(paths, "manifest", "train"));
  DomainIndexTable table = DomainIndexTable::load(require_path(paths, "index_table", "train"));
  TrainResult result = train(tc, manifest, table);
  result.trained.save(out / "model.ckpt");
  write_report(out, result.report);
  for (const auto& [name, acc] : result.report.groups) spdlog::info("train: {} accuracy {:.4f}", name, acc.value());
}

void run_sweep(nlohmann::json config, const fs::path& out) {
  nlohmann::json paths = take_keys(config, {"manifest", "index_table"}, train_config_keys(), "sweep");
  TrainConfig tc = train_config_from_json(config);
  Manifest manifest = read_manifest(require_path(paths, "manifest", "sweep"));
  DomainIndexTable table = DomainIndexTable::load(require_path(paths, "index_table", "sweep"));
  SweepSummary summary = sweep(tc, manifest, table, out);
  write_json(out / "sweep.json", summary.to_json());
  write_text_if_changed(out / "sweep.csv", summary.to_csv());
  if (summary.best) spdlog::info("sweep: best lambda_d = {}", summary.rows[*summary.best].lambda_d);
  if (!summary.best) throw ContractError("every sweep run failed");
}

void run_eval(nlohmann::json config, const fs::path& out) {
  nlohmann::json paths = take_keys(config, {"manifest", "checkpoint"}, {"split", "groups", "seed"}, "eval");
  TrainedModel trained = TrainedModel::load(require_path(paths, "checkpoint", "eval"));
  Manifest manifest = read_manifest(require_path(paths, "manifest", "eval"));
  ExperimentReport report = evaluate(trained, manifest, value_or<std::string>(config, "split", "test"),
                                     value_or<DeviceGroups>(config, "groups", {}));
  report.config = config;
  write_json(out / "report.json", report.to_json());
  write_text_if_changed(out / "accuracy.csv", format_accuracy_csv(report));
}

void run_export(nlohmann::json config, const fs::path& out) {
  nlohmann::json paths = take_keys(config, {"manifest", "checkpoint"},
                                   {"n_per_device", "split", "perplexity", "iterations", "seed"}, "export-embeddings");
  TrainedModel trained = TrainedModel::load(require_path(paths, "checkpoint", "export-embeddings"));
  Manifest manifest = read_manifest(require_path(paths, "manifest", "export-embeddings"));
  TsneConfig tsne;
  tsne.perplexity = value_or(config, "perplexity", tsne.perplexity);
  tsne.iterations = value_or(config, "iterations", tsne.iterations);
  tsne.seed = value_or(config, "seed", tsne.seed);
  EmbeddingExport e = export_embeddings(trained, manifest, value_or<std::size_t>(config, "n_per_device", 50), tsne,
                                        value_or<std::string>(config, "split", "test"));
  write_embedding_csv(out / "embeddings.csv", e.rows, e.embedding.Y);
  spdlog::info("export-embeddings: {} rows, KL {:.4f} -> {:.4f}", e.rows.size(), e.embedding.initial_kl,
               e.embedding.final_kl);
}

int execute(const Invocation& inv) {
  nlohmann::json config = nlohmann::json::object();
  if (!inv.config_path.empty()) {
    config = load_config(inv.config_path, inv.subcommand);
    absolutize_paths(config, fs::absolute(inv.config_path).parent_path());
  }
  for (const auto& text : inv.overrides) {
    auto [key, value] = parse_override(text);
    if (is_path_key(key) && value.is_string()) {
      value = fs::absolute(value.get<std::string>()).lexically_normal().string();
    }
    config[key] = value;
  }
  if (inv.seed) config["seed"] = *inv.seed;

  fs::path out = fs::absolute(inv.out).lexically_normal();
  fs::create_directories(out);
  write_json(out / "run.json", {{"subcommand", inv.subcommand}, {"config", config}, {"out", out.string()}});

  static const std::map<std::string, std::function<int(nlohmann::json, const fs::path&)>> table = {
      {"synth", [](nlohmann::json c, const fs::path& o) { return run_synth(std::move(c), o), kExitOk; }},
      {"ingest", run_ingest},
      {"index", [](nlohmann::json c, const fs::path& o) { return run_index(std::move(c), o), kExitOk; }},
      {"train", [](nlohmann::json c, const fs::path& o) { return run_train(std::move(c), o), kExitOk; }},
      {"eval", [](nlohmann::json c, const fs::path& o) { return run_eval(std::move(c), o), kExitOk; }},
      {"sweep", [](nlohmann::json c, const fs::path& o) { return run_sweep(std::move(c), o), kExitOk; }},
      {"export-embeddings", [](nlohmann::json c, const fs::path& o) { return run_export(std::move(c), o), kExitOk; }},
  };
  return table.at(inv.subcommand)(std::move(config), out);
}

}  // namespace

std::pair<std::string, nlohmann::json> parse_override(const std::string& text) {
  auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ContractError("override '" + text + "' is not key=value");
  std::string key = text.substr(0, eq);
  std::string raw = text.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  return {key, value};
}

nlohmann::json load_config(const fs::path& path, const std::string& subcommand) {
  std::string text = read_text(path);
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ContractError("config " + path.string() + " is not valid JSON");
  if (!j.is_object()) throw ContractError("config " + path.string() + " must be a JSON object");
  if (j.contains("subcommand") && j.contains("config")) {
    if (j["subcommand"] != subcommand) {
      throw ContractError("run file " + path.string() + " is for '" + j["subcommand"].get<std::string>() +
                          "', not '" + subcommand + "'");
    }
    return j["config"];
  }
  return j;
}

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"Multi-target domain adaptation pipeline for acoustic scene classification", "mtda"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Errors only");

  Invocation inv;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"synth", "Generate a synthetic multi-device dataset"},
      {"ingest", "Convert manifest WAV files to log-mel feature files"},
      {"index", "Rank target devices by embedded distance to the source"},
      {"train", "Train one adversarial model"},
      {"eval", "Evaluate a checkpoint on a manifest split"},
      {"sweep", "Train and evaluate over the lambda_d grid"},
      {"export-embeddings", "Embed feature vectors z with t-SNE"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", inv.config_path, "JSON config file (or a previous run.json)");
    sub->add_option("--override", inv.overrides, "key=value, applied after --config")->take_all();
    sub->add_option("-o,--out", inv.out, "Output directory")->required();
    sub->add_option("--seed", inv.seed, "Seed override");
    sub->callback([&inv, name = name]() { inv.subcommand = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    std::cerr << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return kExitContract;
  }

  spdlog::set_level(verbose ? spdlog::level::debug : quiet ? spdlog::level::err : spdlog::level::info);
  try {
    return execute(inv);
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitContract;
  }
}

}  // namespace mtda::cli
