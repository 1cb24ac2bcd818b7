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

#include "mtda/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "mtda/errors.hpp"

namespace mtda {

namespace {

constexpr double kPi = std::numbers::pi;

std::string zero_pad(std::size_t v, int width) {
  std::string s = std::to_string(v);
  if (static_cast<int>(s.size()) < width) s.insert(0, static_cast<std::size_t>(width) - s.size(), '0');
  return s;
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known,
                         const char* where) {
  if (!j.is_object()) throw ContractError(std::string(where) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ContractError(std::string(where) + ": unknown key \"" + key + "\"");
  }
}

}  // namespace

DeviceProfile DeviceProfile::from_magnitude(std::string id, double magnitude,
                                            std::uint64_t shape_seed) {
  if (!(magnitude >= 0.0)) throw ContractError("shift_magnitude must be non-negative");
  DeviceProfile p;
  p.device_id = std::move(id);
  p.shift_magnitude = magnitude;
  if (magnitude == 0.0) return p;

  Rng rng(splitmix64(shape_seed));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  double amp[3], phi[3];
  for (int j = 0; j < 3; ++j) {
    amp[j] = unit(rng);
    phi[j] = phase(rng);
  }
  const double tilt = unit(rng);
  double ss = 0.0;
  for (std::size_t m = 0; m < kSynthBands; ++m) {
    const double x = static_cast<double>(m) / (kSynthBands - 1);
    double v = tilt * (x - 0.5);
    for (int j = 0; j < 3; ++j) v += amp[j] * std::cos(kPi * (j + 1) * x + phi[j]);
    p.band_gain_curve[m] = v;
    ss += v * v;
  }
  const double rms = std::sqrt(ss / kSynthBands);
  for (auto& v : p.band_gain_curve) v *= magnitude * kGainPerMagnitude / rms;
  p.noise_std = magnitude * kNoisePerMagnitude;
  return p;
}

void DeviceProfile::validate() const {
  if (device_id.empty()) throw ContractError("device id must be non-empty");
  if (!(shift_magnitude >= 0.0)) throw ContractError("shift_magnitude must be non-negative");
  if (!(noise_std >= 0.0)) throw ContractError("noise_std must be non-negative");
  if (band_gain_curve.size() != kSynthBands) {
    throw ContractError("band_gain_curve must have 64 entries for device " + device_id);
  }
  if (shift_magnitude == 0.0) {
    for (double v : band_gain_curve) {
      if (v != 0.0) throw ContractError("zero-magnitude device " + device_id + " has a gain curve");
    }
    if (noise_std != 0.0) throw ContractError("zero-magnitude device " + device_id + " has noise");
  }
}

void SynthConfig::validate() const {
  if (num_classes < 2) throw ContractError("synth: need at least 2 classes");
  if (devices.size() < 2) throw ContractError("synth: need at least 2 devices");
  if (!(parallel_fraction >= 0.0 && parallel_fraction <= 1.0)) {
    throw ContractError("synth: parallel_fraction must be in [0, 1]");
  }
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw ContractError("synth: test_fraction must be in [0, 1)");
  }
  if (samples_per_class == 0) throw ContractError("synth: samples_per_class must be positive");
  if (frames < 2) throw ContractError("synth: frames must be at least 2");
  if (!(clean_noise >= 0.0)) throw ContractError("synth: clean_noise must be non-negative");
  std::set<std::string> ids;
  for (const auto& d : devices) {
    d.validate();
    if (!ids.insert(d.device_id).second) throw ContractError("synth: duplicate device " + d.device_id);
  }
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j,
                      {"num_classes", "samples_per_class", "parallel_fraction", "test_fraction",
                       "frames", "clean_noise", "seed", "devices"},
                      "synth config");
  SynthConfig c;
  c.num_classes = j.value("num_classes", c.num_classes);
  c.samples_per_class = j.value("samples_per_class", c.samples_per_class);
  c.parallel_fraction = j.value("parallel_fraction", c.parallel_fraction);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.frames = j.value("frames", c.frames);
  c.clean_noise = j.value("clean_noise", c.clean_noise);
  c.seed = j.value("seed", c.seed);
  if (!j.contains("devices") || !j["devices"].is_array()) {
    throw ContractError("synth config needs a \"devices\" array");
  }
  for (const auto& d : j["devices"]) {
    reject_unknown_keys(d, {"id", "shift_magnitude", "band_gain_curve", "noise_std"}, "device");
    const auto id = d.at("id").get<std::string>();
    const double mag = d.value("shift_magnitude", 0.0);
    auto p = DeviceProfile::from_magnitude(id, mag, c.seed ^ fnv1a(id));
    if (d.contains("band_gain_curve")) p.band_gain_curve = d["band_gain_curve"].get<std::vector<double>>();
    if (d.contains("noise_std")) p.noise_std = d["noise_std"].get<double>();
    c.devices.push_back(std::move(p));
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const SynthConfig& c) {
  nlohmann::json devices = nlohmann::json::array();
  for (const auto& d : c.devices) {
    devices.push_back({{"id", d.device_id},
                       {"shift_magnitude", d.shift_magnitude},
                       {"band_gain_curve", d.band_gain_curve},
                       {"noise_std", d.noise_std}});
  }
  return {{"num_classes", c.num_classes},         {"samples_per_class", c.samples_per_class},
          {"parallel_fraction", c.parallel_fraction}, {"test_fraction", c.test_fraction},
          {"frames", c.frames},                   {"clean_noise", c.clean_noise},
          {"seed", c.seed},                       {"devices", devices}};
}

SceneGenerator::SceneGenerator(std::size_t num_classes, std::size_t frames, double noise)
    : num_classes_(num_classes), frames_(frames), noise_(noise) {
  if (num_classes < 2) throw ContractError("SceneGenerator: need at least 2 classes");
  const double T = static_cast<double>(frames);
  const double M = static_cast<double>(kSynthBands);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double kd = static_cast<double>(k);
    const double profile_freq = 1.0 + static_cast<double>(k % 4);
    const double ft = 1.0 + static_cast<double>(k % 5);
    const double fm = 1.0 + 2.0 * static_cast<double>((k / 5) % 3);
    Tensor<double> p({frames, kSynthBands});
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t m = 0; m < kSynthBands; ++m) {
        const double td = static_cast<double>(t), md = static_cast<double>(m);
        const double profile = 0.3 * std::cos(kPi * profile_freq * md / (M - 1) + 0.7 * kd);
        const double grating = 0.8 * std::cos(2.0 * kPi * (ft * td / T + fm * md / M) + 1.3 * kd);
        p.at(t, m) = profile + grating;
      }
    }
    patterns_.push_back(std::move(p));
  }
}

const Tensor<double>& SceneGenerator::pattern(std::size_t class_id) const {
  if (class_id >= num_classes_) {
    throw ContractError("class id " + std::to_string(class_id) + " out of range");
  }
  return patterns_[class_id];
}

FeatureTensor SceneGenerator::make_clean(std::size_t class_id, Rng& rng) const {
  FeatureTensor out{pattern(class_id), FrontendParams::kSampleRate / FrontendParams::kHop};
  if (noise_ > 0.0) {
    std::normal_distribution<double> n(0.0, noise_);
    for (auto& v : out.frames.data()) v += n(rng);
  }
  return out;
}

FeatureTensor apply_device(const FeatureTensor& clean, const DeviceProfile& profile, Rng& rng) {
  if (clean.frames.rank() != 2 || clean.frames.dim(1) != profile.band_gain_curve.size()) {
    throw ShapeError("apply_device: features " + dims_to_string(clean.frames.dims()) +
                     " vs gain curve of " + std::to_string(profile.band_gain_curve.size()));
  }
  FeatureTensor out = clean;
  const std::size_t frames = out.frames.dim(0), bands = out.frames.dim(1);
  if (profile.noise_std > 0.0) {
    std::normal_distribution<double> n(0.0, profile.noise_std);
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t m = 0; m < bands; ++m) out.frames.at(t, m) += profile.band_gain_curve[m] + n(rng);
  } else {
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t m = 0; m < bands; ++m) out.frames.at(t, m) += profile.band_gain_curve[m];
  }
  return out;
}

SynthDataset generate_dataset(const SynthConfig& config) {
  config.validate();
  const SceneGenerator scenes(config.num_classes, config.frames, config.clean_noise);
  const std::size_t n = config.samples_per_class;
  const auto n_parallel = static_cast<std::size_t>(std::lround(config.parallel_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::lround(config.test_fraction * static_cast<double>(n)));
  const std::size_t n_train = n - std::min(n_test, n);

  // Stream tags keep clean, device and per-device-clean draws independent.
  enum : std::uint64_t { kClean = 1, kDevice = 2 };

  SynthDataset ds;
  for (std::size_t d = 0; d < config.devices.size(); ++d) {
    const auto& dev = config.devices[d];
    const bool source = d == 0;
    for (std::size_t c = 0; c < config.num_classes; ++c) {
      for (std::size_t s = 0; s < n; ++s) {
        const bool parallel = s < n_parallel;
        Rng clean_rng = parallel || source ? derive_rng(config.seed, kClean, 0, c, s)
                                           : derive_rng(config.seed, kClean, d, c, s);
        const FeatureTensor clean = scenes.make_clean(c, clean_rng);
        Rng dev_rng = derive_rng(config.seed, kDevice, d, c, s);

        ManifestRow row;
        row.id = dev.device_id + "_c" + zero_pad(c, 2) + "_s" + zero_pad(s, 3);
        row.device = dev.device_id;
        row.split = s < n_train ? "train" : "test";
        row.scene = (source || row.split == "test") ? std::to_string(c) : "";
        if (parallel) row.parallel_group = "g_c" + zero_pad(c, 2) + "_s" + zero_pad(s, 3);
        row.feature_path = "features/" + row.id + ".mtdt";
        ds.manifest.rows.push_back(std::move(row));
        ds.features.push_back(apply_device(clean, dev, dev_rng));
      }
    }
  }
  return ds;
}

SynthDataset make_dataset(const SynthConfig& config, const std::filesystem::path& out_dir) {
  SynthDataset ds = generate_dataset(config);
  std::filesystem::create_directories(out_dir / "features");
  ds.manifest.base_dir = out_dir;
  for (std::size_t i = 0; i < ds.features.size(); ++i) {
    write_features(ds.manifest.resolve(ds.manifest.rows[i].feature_path), ds.features[i]);
  }
  write_manifest(out_dir / "manifest.csv", ds.manifest);
  return ds;
}

}  // namespace mtda
