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

#include "mtda/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "mtda/checkpoint.hpp"
#include "mtda/errors.hpp"

namespace mtda {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr int kSincZeroCrossings = 16;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

// Blackman window on [-1, 1].
double blackman(double u) {
  if (std::abs(u) >= 1.0) return 0.0;
  const double t = kPi * (u + 1.0);
  return 0.42 - 0.5 * std::cos(t) + 0.08 * std::cos(2.0 * t);
}

// FFTW planning is not thread-safe; execution on distinct buffers is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class PowerSpectrum {
 public:
  explicit PowerSpectrum(std::size_t n) : n_(n) {
    in_ = fftw_alloc_real(n);
    out_ = fftw_alloc_complex(n / 2 + 1);
    std::lock_guard lock(planner_mutex());
    plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE);
  }
  ~PowerSpectrum() {
    {
      std::lock_guard lock(planner_mutex());
      fftw_destroy_plan(plan_);
    }
    fftw_free(in_);
    fftw_free(out_);
  }
  PowerSpectrum(const PowerSpectrum&) = delete;
  PowerSpectrum& operator=(const PowerSpectrum&) = delete;

  std::span<double> input() { return {in_, n_}; }

  void run(std::span<double> power) {
    fftw_execute(plan_);
    for (std::size_t k = 0; k <= n_ / 2; ++k) {
      power[k] = out_[k][0] * out_[k][0] + out_[k][1] * out_[k][1];
    }
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace

AudioClip change_rate(const AudioClip& clip, double target_hz) {
  if (clip.samples.empty()) throw ContractError("resample: zero-length clip");
  if (!(clip.sample_rate > 0.0) || !(target_hz > 0.0)) {
    throw ContractError("resample: sample rates must be positive");
  }
  if (clip.sample_rate == target_hz) return clip;

  const double ratio = target_hz / clip.sample_rate;
  const double cutoff = std::min(1.0, ratio);  // relative to the input Nyquist
  const double half_width = kSincZeroCrossings / cutoff;
  const auto n_in = static_cast<std::ptrdiff_t>(clip.samples.size());
  const auto n_out = static_cast<std::size_t>(std::floor(static_cast<double>(n_in) * ratio));

  AudioClip out;
  out.sample_rate = target_hz;
  out.samples.resize(std::max<std::size_t>(n_out, 1));
  for (std::size_t n = 0; n < out.samples.size(); ++n) {
    const double t = static_cast<double>(n) / ratio;
    const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(std::ceil(t - half_width)));
    const auto hi = std::min<std::ptrdiff_t>(n_in - 1, static_cast<std::ptrdiff_t>(std::floor(t + half_width)));
    double acc = 0.0;
    for (std::ptrdiff_t k = lo; k <= hi; ++k) {
      const double d = t - static_cast<double>(k);
      acc += clip.samples[static_cast<std::size_t>(k)] * cutoff * sinc(cutoff * d) *
             blackman(d / half_width);
    }
    out.samples[n] = acc;
  }
  return out;
}

AudioClip fix_length(const AudioClip& clip, std::size_t length) {
  AudioClip out = clip;
  out.samples.resize(length, 0.0);
  return out;
}

AudioClip resample(const AudioClip& clip, double target_hz, std::size_t length) {
  return fix_length(change_rate(clip, target_hz), length);
}

double hz_to_mel(double hz) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz < min_log_hz) return hz / f_sp;
  return min_log_mel + std::log(hz / min_log_hz) / logstep;
}

double mel_to_hz(double mel) {
  constexpr double f_sp = 200.0 / 3.0;
  constexpr double min_log_hz = 1000.0;
  constexpr double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel < min_log_mel) return mel * f_sp;
  return min_log_hz * std::exp(logstep * (mel - min_log_mel));
}

MelFilterbank::MelFilterbank(std::size_t fft_size, double sample_rate, std::size_t bands,
                             double fmin, double fmax)
    : bands_(bands), bins_(fft_size / 2 + 1), bin_hz_(sample_rate / static_cast<double>(fft_size)) {
  if (bands == 0 || fft_size < 2 || !(fmax > fmin) || fmin < 0.0 || fmax > sample_rate / 2.0) {
    throw ContractError("MelFilterbank: invalid configuration");
  }
  const double mel_lo = hz_to_mel(fmin);
  const double mel_hi = hz_to_mel(fmax);
  edges_hz_.resize(bands + 2);
  for (std::size_t i = 0; i < edges_hz_.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(bands + 1);
    edges_hz_[i] = mel_to_hz(mel);
  }
  weights_.assign(bands_ * bins_, 0.0);
  for (std::size_t m = 0; m < bands_; ++m) {
    const double lower = edges_hz_[m], center = edges_hz_[m + 1], upper = edges_hz_[m + 2];
    for (std::size_t k = 0; k < bins_; ++k) {
      const double f = bin_hz(k);
      const double rise = (f - lower) / (center - lower);
      const double fall = (upper - f) / (upper - center);
      weights_[m * bins_ + k] = std::max(0.0, std::min(rise, fall));
    }
  }
}

void MelFilterbank::apply(std::span<const double> power, std::span<double> out) const {
  for (std::size_t m = 0; m < bands_; ++m) {
    const double* w = &weights_[m * bins_];
    double acc = 0.0;
    for (std::size_t k = 0; k < bins_; ++k) acc += w[k] * power[k];
    out[m] = acc;
  }
}

const MelFilterbank& default_filterbank() {
  static const MelFilterbank bank(FrontendParams::kWindow, FrontendParams::kSampleRate,
                                  FrontendParams::kMelBands, FrontendParams::kFmin,
                                  FrontendParams::kFmax);
  return bank;
}

std::size_t frame_count(std::size_t samples, std::size_t window, std::size_t hop) {
  if (samples < window) return 0;
  return (samples - window) / hop + 1;
}

FeatureTensor logmel(const AudioClip& clip) {
  using P = FrontendParams;
  if (clip.sample_rate != P::kSampleRate) {
    throw ContractError("logmel: expected a 32000 Hz clip, got " +
                        std::to_string(clip.sample_rate) + " Hz");
  }
  const std::size_t frames = frame_count(clip.samples.size());
  if (frames == 0) throw ContractError("logmel: clip shorter than one 1024-sample window");

  std::vector<double> window(P::kWindow);
  for (std::size_t i = 0; i < P::kWindow; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / P::kWindow);
  }
  const auto& bank = default_filterbank();
  PowerSpectrum fft(P::kWindow);
  std::vector<double> power(P::kWindow / 2 + 1);
  FeatureTensor out{Tensor<double>({frames, P::kMelBands}), P::kSampleRate / P::kHop};
  auto in = fft.input();
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = clip.samples.data() + t * P::kHop;
    for (std::size_t i = 0; i < P::kWindow; ++i) in[i] = src[i] * window[i];
    fft.run(power);
    std::span<double> row(&out.frames.at(t, 0), P::kMelBands);
    bank.apply(power, row);
    for (auto& v : row) v = std::log(v + P::kLogFloor);
  }
  out.frames.require_finite("logmel output");
  return out;
}

void write_features(const std::filesystem::path& path, const FeatureTensor& features) {
  write_container(path, {{"features", features.frames.cast<float>()},
                         {"frame_rate", Tensor<double>::scalar(features.frame_rate)}});
}

FeatureTensor read_features(const std::filesystem::path& path) {
  const auto entries = read_container(path);
  FeatureTensor out;
  out.frames = find_entry(entries, "features").as<double>();
  out.frame_rate = find_entry(entries, "frame_rate").as<double>()[0];
  if (out.frames.rank() != 2) throw IoError(path.string() + ": features must be rank 2");
  return out;
}

}  // namespace mtda
