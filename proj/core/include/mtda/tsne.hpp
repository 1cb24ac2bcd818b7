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
#include <optional>
#include <span>
#include <vector>

#include "mtda/manifest.hpp"
#include "mtda/tensor.hpp"

namespace mtda {

struct Calibration {
  double sigma = 0.0;
  double beta = 0.0;           // 1 / (2 sigma²)
  double entropy_bits = 0.0;   // Shannon entropy of `conditional`, base 2
  int iterations = 0;
  bool converged = false;
  std::vector<double> conditional;  // p_{j|i}, same order as the input row
};

inline constexpr int kCalibrationMaxIterations = 64;
inline constexpr double kPerplexityTolerance = 1e-4;

/// Bisection on the Gaussian precision so that 2^H of the row's conditional
/// distribution is within 1e-4 of `perplexity`. `sq_distances` are squared
/// distances from one point to every other point (self excluded). Returns the
/// best sigma with `converged == false` after 64 iterations (and logs a
/// warning).
Calibration perplexity_calibrate(std::span<const double> sq_distances, double perplexity);

/// Symmetrized t-SNE input affinities, P = (p_{j|i} + p_{i|j}) / 2n.
struct AffinityMatrix {
  std::size_t n = 0;
  std::vector<double> p;  // row-major n × n
  std::vector<Calibration> rows;

  double at(std::size_t i, std::size_t j) const { return p[i * n + j]; }
};

AffinityMatrix affinities(const Tensor<double>& X, double perplexity);

/// Normalized Student-t (one degree of freedom) similarities of an n×2
/// embedding; Σ Q = 1, zero diagonal.
std::vector<double> student_t_affinities(const Tensor<double>& Y);

/// KL(P ‖ Q(Y)) over pairs with p_ij > 0.
double kl_divergence(const AffinityMatrix& P, const Tensor<double>& Y);

/// ∂KL/∂Y = 4 Σ_j (p_ij − q_ij)(y_i − y_j)(1 + |y_i − y_j|²)^-1, with P
/// optionally scaled by `exaggeration`.
Tensor<double> kl_gradient(const AffinityMatrix& P, const Tensor<double>& Y,
                           double exaggeration = 1.0);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  std::uint64_t seed = 0;
  /// Starting coordinates (n×2); drawn from N(0, 1e-4²) per row index when
  /// absent.
  std::optional<Tensor<double>> initial;
};

/// min(requested, n/4), clamped into [2, n−1].
double effective_perplexity(std::size_t n, double requested);

struct Embedding {
  Tensor<double> Y;  // n × 2, centered
  double initial_kl = 0.0;
  double final_kl = 0.0;
};

/// Exact O(n²) t-SNE: momentum gradient descent with per-coordinate gains
/// and early exaggeration. Deterministic for a fixed seed.
Embedding run_tsne(const Tensor<double>& X, const TsneConfig& config);

/// Writes `id,device,scene,y0,y1` with one line per embedded row.
void write_embedding_csv(const std::filesystem::path& path, std::span<const ManifestRow> rows,
                         const Tensor<double>& Y);
std::string format_embedding_csv(std::span<const ManifestRow> rows, const Tensor<double>& Y);

}  // namespace mtda
