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

#include "mtda/tsne.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mtda/errors.hpp"
#include "mtda/rng.hpp"

namespace mtda {

namespace {

// Conditional distribution for precision beta; returns entropy in bits.
double conditional_at(std::span<const double> d, double d_min, double beta, std::vector<double>& p) {
  double z = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    p[j] = std::exp(-beta * (d[j] - d_min));
    z += p[j];
  }
  double weighted = 0.0;
  for (std::size_t j = 0; j < d.size(); ++j) {
    p[j] /= z;
    weighted += p[j] * (d[j] - d_min);
  }
  return (std::log(z) + beta * weighted) / std::log(2.0);
}

}  // namespace

Calibration perplexity_calibrate(std::span<const double> sq_distances, double perplexity) {
  const std::size_t k = sq_distances.size();
  if (k == 0) throw ContractError("perplexity_calibrate: empty distance row");
  if (!(perplexity >= 2.0) || perplexity > static_cast<double>(k)) {
    throw ContractError("perplexity_calibrate: perplexity " + std::to_string(perplexity) +
                        " outside [2, " + std::to_string(k) + "]");
  }
  double d_min = std::numeric_limits<double>::infinity(), d_mean = 0.0;
  for (double d : sq_distances) {
    if (!(d >= 0.0)) throw ContractError("perplexity_calibrate: distances must be non-negative");
    d_min = std::min(d_min, d);
    d_mean += d;
  }
  d_mean /= static_cast<double>(k);
  const double spread = d_mean - d_min;

  Calibration out;
  out.conditional.resize(k);
  double beta = spread > 0.0 ? 1.0 / spread : 1.0;
  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  double best_err = std::numeric_limits<double>::infinity();
  double best_beta = beta;
  std::vector<double> p(k);
  for (int it = 1; it <= kCalibrationMaxIterations; ++it) {
    const double h = conditional_at(sq_distances, d_min, beta, p);
    const double err = std::pow(2.0, h) - perplexity;
    out.iterations = it;
    if (std::abs(err) < best_err) {
      best_err = std::abs(err);
      best_beta = beta;
      out.entropy_bits = h;
      out.conditional = p;
    }
    if (std::abs(err) <= kPerplexityTolerance) {
      out.converged = true;
      break;
    }
    // Too flat (entropy too high) means beta must grow.
    if (err > 0.0) {
      lo = beta;
      beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (lo + hi);
    } else {
      hi = beta;
      beta = 0.5 * (lo + hi);
    }
  }
  out.beta = best_beta;
  out.sigma = best_beta > 0.0 ? std::sqrt(1.0 / (2.0 * best_beta))
                              : std::numeric_limits<double>::infinity();
  if (!out.converged) {
    spdlog::warn("perplexity calibration did not converge after {} iterations "
                 "(|2^H - perplexity| = {:.3g}); using best sigma {:.6g}",
                 kCalibrationMaxIterations, best_err, out.sigma);
  }
  return out;
}

AffinityMatrix affinities(const Tensor<double>& X, double perplexity) {
  if (X.rank() != 2) throw ShapeError("affinities: X must be n×d, got " + dims_to_string(X.dims()));
  const std::size_t n = X.dim(0), d = X.dim(1);
  if (n < 3) throw ContractError("affinities: need at least 3 points");
  std::vector<double> sq(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = X.at(i, k) - X.at(j, k);
        acc += diff * diff;
      }
      sq[i * n + j] = sq[j * n + i] = acc;
    }

  AffinityMatrix P;
  P.n = n;
  P.p.assign(n * n, 0.0);
  std::vector<double> cond(n * n, 0.0);
  std::vector<double> row(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0, c = 0; j < n; ++j)
      if (j != i) row[c++] = sq[i * n + j];
    auto cal = perplexity_calibrate(row, perplexity);
    for (std::size_t j = 0, c = 0; j < n; ++j)
      if (j != i) cond[i * n + j] = cal.conditional[c++];
    P.rows.push_back(std::move(cal));
  }
  const double denom = 2.0 * static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) P.p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / denom;
  return P;
}

std::vector<double> student_t_affinities(const Tensor<double>& Y) {
  const std::size_t n = Y.dim(0), dim = Y.dim(1);
  std::vector<double> q(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = Y.at(i, k) - Y.at(j, k);
        d2 += diff * diff;
      }
      const double v = 1.0 / (1.0 + d2);
      q[i * n + j] = q[j * n + i] = v;
      z += 2.0 * v;
    }
  for (auto& v : q) v /= z;
  return q;
}

double kl_divergence(const AffinityMatrix& P, const Tensor<double>& Y) {
  if (Y.rank() != 2 || Y.dim(0) != P.n) {
    throw ShapeError("kl_divergence: Y " + dims_to_string(Y.dims()) + " vs n = " + std::to_string(P.n));
  }
  const auto q = student_t_affinities(Y);
  double kl = 0.0;
  for (std::size_t i = 0; i < P.p.size(); ++i) {
    if (P.p[i] > 0.0) kl += P.p[i] * std::log(P.p[i] / q[i]);
  }
  return kl;
}

Tensor<double> kl_gradient(const AffinityMatrix& P, const Tensor<double>& Y, double exaggeration) {
  if (Y.rank() != 2 || Y.dim(0) != P.n) {
    throw ShapeError("kl_gradient: Y " + dims_to_string(Y.dims()) + " vs n = " + std::to_string(P.n));
  }
  const std::size_t n = P.n, dim = Y.dim(1);
  std::vector<double> num(n * n, 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double diff = Y.at(i, k) - Y.at(j, k);
        d2 += diff * diff;
      }
      const double v = 1.0 / (1.0 + d2);
      num[i * n + j] = num[j * n + i] = v;
      z += 2.0 * v;
    }
  Tensor<double> grad({n, dim});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double v = num[i * n + j];
      const double mult = 4.0 * (exaggeration * P.p[i * n + j] - v / z) * v;
      for (std::size_t k = 0; k < dim; ++k) grad.at(i, k) += mult * (Y.at(i, k) - Y.at(j, k));
    }
  return grad;
}

double effective_perplexity(std::size_t n, double requested) {
  const double quarter = static_cast<double>(n) / 4.0;
  return std::clamp(std::min(requested, quarter), 2.0, static_cast<double>(n) - 1.0);
}

Embedding run_tsne(const Tensor<double>& X, const TsneConfig& cfg) {
  if (X.rank() != 2) throw ShapeError("run_tsne: X must be n×d, got " + dims_to_string(X.dims()));
  const std::size_t n = X.dim(0);
  const std::size_t d = X.dim(1);
  if (n < 5) throw ContractError("run_tsne: need at least 5 points");
  if (!X.all_finite()) throw ContractError("run_tsne: input has non-finite values");
  constexpr std::size_t dim = 2;

  Tensor<double> Y0({n, dim});
  if (cfg.initial) {
    require_same_dims(cfg.initial->dims(), Y0.dims(), "run_tsne initial");
    Y0 = *cfg.initial;
  } else {
    std::normal_distribution<double> init(0.0, 1e-4);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = derive_rng(cfg.seed, i);
      for (std::size_t k = 0; k < dim; ++k) Y0.at(i, k) = init(rng);
    }
  }

  // Work in a canonical row order (lexicographic on input row, then initial
  // coordinates) so floating-point summation order does not depend on how
  // the caller ordered the rows.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto row_less = [&](std::size_t a, std::size_t b) {
    for (std::size_t k = 0; k < d; ++k) {
      if (X.at(a, k) != X.at(b, k)) return X.at(a, k) < X.at(b, k);
    }
    for (std::size_t k = 0; k < dim; ++k) {
      if (Y0.at(a, k) != Y0.at(b, k)) return Y0.at(a, k) < Y0.at(b, k);
    }
    return false;
  };
  std::stable_sort(order.begin(), order.end(), row_less);
  Tensor<double> Xs({n, d});
  Tensor<double> Y({n, dim});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < d; ++k) Xs.at(r, k) = X.at(order[r], k);
    for (std::size_t k = 0; k < dim; ++k) Y.at(r, k) = Y0.at(order[r], k);
  }

  const AffinityMatrix P = affinities(Xs, cfg.perplexity);

  Embedding out;
  out.initial_kl = kl_divergence(P, Y);
  Tensor<double> velocity({n, dim});
  Tensor<double> gains({n, dim}, 1.0);
  for (int it = 0; it < cfg.iterations; ++it) {
    const double exaggeration = it < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
    const Tensor<double> grad = kl_gradient(P, Y, exaggeration);
    for (std::size_t i = 0; i < Y.size(); ++i) {
      const bool same_sign = (grad[i] > 0.0) == (velocity[i] > 0.0);
      gains[i] = std::max(same_sign ? gains[i] * 0.8 : gains[i] + 0.2, 0.01);
      velocity[i] = momentum * velocity[i] - cfg.learning_rate * gains[i] * grad[i];
      Y[i] += velocity[i];
    }
    for (std::size_t k = 0; k < dim; ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += Y.at(i, k);
      mean /= static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) Y.at(i, k) -= mean;
    }
    if (!Y.all_finite()) throw NumericError("t-SNE produced non-finite coordinates at iteration " + std::to_string(it));
  }
  out.final_kl = kl_divergence(P, Y);
  out.Y = Tensor<double>({n, dim});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < dim; ++k) out.Y.at(order[r], k) = Y.at(r, k);
  }
  return out;
}

std::string format_embedding_csv(std::span<const ManifestRow> rows, const Tensor<double>& Y) {
  if (Y.rank() != 2 || Y.dim(0) != rows.size() || Y.dim(1) != 2) {
    throw ShapeError("embedding export: " + std::to_string(rows.size()) + " rows vs Y " +
                     dims_to_string(Y.dims()));
  }
  std::ostringstream out;
  out.precision(17);
  out << "id,device,scene,y0,y1\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << csv_escape(rows[i].id) << ',' << csv_escape(rows[i].device) << ','
        << csv_escape(rows[i].scene) << ',' << Y.at(i, 0) << ',' << Y.at(i, 1) << '\n';
  }
  return out.str();
}

void write_embedding_csv(const std::filesystem::path& path, std::span<const ManifestRow> rows,
                         const Tensor<double>& Y) {
  write_text_if_changed(path, format_embedding_csv(rows, Y));
}

}  // namespace mtda
