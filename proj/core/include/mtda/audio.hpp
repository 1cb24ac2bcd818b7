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
#include <span>
#include <vector>

#include "mtda/tensor.hpp"

namespace mtda {

/// Front-end constants. A 15.6 ms hop at 32 kHz is 499.2 samples; the hop is
/// rounded to 500 so frames start on integer sample positions.
struct FrontendParams {
  static constexpr double kSampleRate = 32000.0;
  static constexpr std::size_t kClipSamples = 320000;  // 10 s
  static constexpr std::size_t kWindow = 1024;         // 32 ms
  static constexpr std::size_t kHop = 500;
  static constexpr std::size_t kMelBands = 64;
  static constexpr double kFmin = 0.0;
  static constexpr double kFmax = 16000.0;
  static constexpr double kLogFloor = 1e-10;
};

struct AudioClip {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  double sample_rate = 0.0;

  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Log-mel frames, time × mel bands.
struct FeatureTensor {
  Tensor<double> frames;
  double frame_rate = 0.0;

  std::size_t num_frames() const { return frames.dim(0); }
  std::size_t num_bands() const { return frames.dim(1); }
};

/// Band-limited (windowed-sinc) rate conversion. Equal rates copy.
AudioClip change_rate(const AudioClip& clip, double target_hz);

/// Zero-pads or truncates to exactly `length` samples.
AudioClip fix_length(const AudioClip& clip, std::size_t length);

/// change_rate to 32 kHz followed by fix_length to 10 s.
AudioClip resample(const AudioClip& clip, double target_hz = FrontendParams::kSampleRate,
                   std::size_t length = FrontendParams::kClipSamples);

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Triangular mel filters over the one-sided power spectrum.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t fft_size, double sample_rate, std::size_t bands, double fmin,
                double fmax);

  std::size_t bands() const { return bands_; }
  std::size_t bins() const { return bins_; }
  double weight(std::size_t band, std::size_t bin) const { return weights_[band * bins_ + bin]; }
  /// Edge frequencies, bands + 2 of them; band m spans edges m..m+2.
  const std::vector<double>& edges_hz() const { return edges_hz_; }
  double center_hz(std::size_t band) const { return edges_hz_.at(band + 1); }
  double bin_hz(std::size_t bin) const { return static_cast<double>(bin) * bin_hz_; }

  void apply(std::span<const double> power, std::span<double> out) const;

 private:
  std::size_t bands_;
  std::size_t bins_;
  double bin_hz_;
  std::vector<double> edges_hz_;
  std::vector<double> weights_;
};

const MelFilterbank& default_filterbank();

/// Number of full frames for `samples` input samples (no centering pad).
std::size_t frame_count(std::size_t samples, std::size_t window = FrontendParams::kWindow,
                        std::size_t hop = FrontendParams::kHop);

/// Hann-windowed STFT power, 64 mel bands, natural log with floor 1e-10.
/// Requires a 32 kHz clip of at least one window.
FeatureTensor logmel(const AudioClip& clip);

// WAV I/O (RIFF, 16-bit PCM). Multi-channel input is averaged to mono.
AudioClip decode_wav(std::span<const std::uint8_t> bytes);
AudioClip read_wav(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_wav(const AudioClip& clip);
void write_wav(const std::filesystem::path& path, const AudioClip& clip);

// Feature files use the tensor container with entries "features" (f32,
// time × bands) and "frame_rate" (f64 scalar).
void write_features(const std::filesystem::path& path, const FeatureTensor& features);
FeatureTensor read_features(const std::filesystem::path& path);

}  // namespace mtda
