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
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mtda/audio.hpp"
#include "mtda/manifest.hpp"
#include "mtda/rng.hpp"

namespace mtda {

inline constexpr std::size_t kSynthBands = 64;

/// Recording-device model: a per-band additive offset in log-mel space
/// (a multiplicative frequency response) plus Gaussian noise, both scaled
/// by `shift_magnitude`.
struct DeviceProfile {
  std::string device_id;
  double shift_magnitude = 0.0;
  std::vector<double> band_gain_curve = std::vector<double>(kSynthBands, 0.0);
  double noise_std = 0.0;

  // RMS of the gain curve and noise std per unit of shift magnitude.
  static constexpr double kGainPerMagnitude = 0.5;
  static constexpr double kNoisePerMagnitude = 0.2;

  /// Smooth random curve shape keyed by `shape_seed`, scaled to RMS
  /// `magnitude * kGainPerMagnitude`.
  static DeviceProfile from_magnitude(std::string id, double magnitude, std::uint64_t shape_seed);
  void validate() const;
};

struct SynthConfig {
  std::size_t num_classes = 10;
  std::vector<DeviceProfile> devices;  // devices[0] is the labeled source
  std::size_t samples_per_class = 30;  // per device and class
  double parallel_fraction = 0.5;
  double test_fraction = 1.0 / 3.0;
  std::size_t frames = 64;
  double clean_noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Accepts {"num_classes", "samples_per_class", "parallel_fraction",
/// "test_fraction", "frames", "clean_noise", "seed", "devices": [{"id",
/// "shift_magnitude", optional "band_gain_curve", optional "noise_std"}]}.
/// Unknown keys are rejected.
SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthConfig& config);

/// Class-conditional clean "scenes": a smooth per-class band profile plus a
/// class-specific 2-D cosine grating over time × band.
class SceneGenerator {
 public:
  SceneGenerator(std::size_t num_classes, std::size_t frames = 64, double noise = 0.1);

  std::size_t num_classes() const { return num_classes_; }
  /// Noise-free class pattern, frames × 64.
  const Tensor<double>& pattern(std::size_t class_id) const;
  /// pattern(class_id) + i.i.d. N(0, noise²).
  FeatureTensor make_clean(std::size_t class_id, Rng& rng) const;

 private:
  std::size_t num_classes_;
  std::size_t frames_;
  double noise_;
  std::vector<Tensor<double>> patterns_;
};

/// out[t, m] = clean[t, m] + band_gain_curve[m] + N(0, noise_std²).
FeatureTensor apply_device(const FeatureTensor& clean, const DeviceProfile& profile, Rng& rng);

struct SynthDataset {
  Manifest manifest;
  std::vector<FeatureTensor> features;  // aligned with manifest.rows
};

/// Generates the dataset in memory. Target rows with sample index below
/// round(parallel_fraction · samples_per_class) reuse the source clean
/// tensor of the same (class, index) and share its parallel_group. The last
/// round(test_fraction · samples_per_class) samples of every (device, class)
/// form the test split; target train rows carry no scene label.
SynthDataset generate_dataset(const SynthConfig& config);

/// generate_dataset, then writes `<out_dir>/manifest.csv` and
/// `<out_dir>/features/<id>.mtdt`.
SynthDataset make_dataset(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace mtda
