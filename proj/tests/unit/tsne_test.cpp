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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "mtda/errors.hpp"
#include "mtda/rng.hpp"
#include "mtda/tsne.hpp"
#include "testing.hpp"

namespace mtda {
namespace {

// Independent oracle: bisection on sigma itself (not on the precision),
// run to machine-level bracket width.
double oracle_perplexity(const std::vector<double>& d2, double sigma) {
  std::vector<double> w(d2.size());
  double z = 0;
  for (std::size_t j = 0; j < d2.size(); ++j) z += w[j] = std::exp(-d2[j] / (2 * sigma * sigma));
  double h = 0;
  for (double x : w) {
    if (x > 0) h -= (x / z) * std::log2(x / z);
  }
  return std::exp2(h);
}

double oracle_sigma(const std::vector<double>& d2, double perplexity) {
  double lo = 1e-3, hi = 1e3;
  for (int i = 0; i < 200; ++i) {
    const double mid = std::sqrt(lo * hi);
    (oracle_perplexity(d2, mid) < perplexity ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

Tensor<double> random_points(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Tensor<double> x({n, d});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = normal(rng);
  return x;
}

TEST(Calibrate, EquidistantNeighboursAreUniform) {
  std::vector<double> d2{2.0, 2.0, 2.0};
  Calibration c = perplexity_calibrate(d2, 3.0);
  EXPECT_TRUE(c.converged);
  for (double p : c.conditional) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
}

TEST(Calibrate, ConvergedRowsHitThePerplexity) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> d2(30);
    for (double& v : d2) v = u(rng);
    const double perp = 2.0 + static_cast<double>(trial % 20);
    Calibration c = perplexity_calibrate(d2, perp);
    ASSERT_TRUE(c.converged) << trial;
    EXPECT_LE(std::abs(std::exp2(c.entropy_bits) - perp), kPerplexityTolerance);
    EXPECT_LE(c.iterations, kCalibrationMaxIterations);
    EXPECT_NEAR(std::accumulate(c.conditional.begin(), c.conditional.end(), 0.0), 1.0, 1e-12);
  }
}

TEST(Calibrate, HandRowMatchesBisectionOracle) {
  std::vector<double> d2{1.0, 4.0, 9.0};
  Calibration c = perplexity_calibrate(d2, 2.0);
  const double expected = oracle_sigma(d2, 2.0);
  EXPECT_NEAR(c.sigma, expected, 1e-3 * expected);
  EXPECT_NEAR(c.beta, 1.0 / (2 * c.sigma * c.sigma), 1e-12 * c.beta);
  EXPECT_NEAR(oracle_perplexity(d2, c.sigma), 2.0, kPerplexityTolerance);
}

// All-duplicate row: every sigma gives the uniform row, so the target is
// unreachable and the fallback path runs.
TEST(Calibrate, AllDuplicatesFallBackToUniform) {
  std::vector<double> d2{0.0, 0.0, 0.0, 0.0};
  Calibration c = perplexity_calibrate(d2, 2.0);
  EXPECT_FALSE(c.converged);
  EXPECT_EQ(c.iterations, kCalibrationMaxIterations);
  for (double p : c.conditional) EXPECT_NEAR(p, 0.25, 1e-12);
  EXPECT_NEAR(std::accumulate(c.conditional.begin(), c.conditional.end(), 0.0), 1.0, 1e-12);
}

TEST(Calibrate, RejectsPerplexityOutsideTheRow) {
  std::vector<double> d2{1.0, 2.0};
  EXPECT_THROW(perplexity_calibrate(d2, 3.0), ContractError);
  EXPECT_THROW(perplexity_calibrate(d2, 1.5), ContractError);
}

TEST(Affinities, SymmetricWithUnitSum) {
  Tensor<double> x = random_points(25, 4, 1);
  AffinityMatrix P = affinities(x, 5.0);
  double sum = 0;
  for (std::size_t i = 0; i < P.n; ++i) {
    EXPECT_EQ(P.at(i, i), 0.0);
    for (std::size_t j = 0; j < P.n; ++j) {
      EXPECT_NEAR(P.at(i, j), P.at(j, i), 1e-15);
      EXPECT_GE(P.at(i, j), 0.0);
      sum += P.at(i, j);
    }
  }
  EXPECT_NEAR(sum, 1.0, 1e-9);
}

TEST(Affinities, CloserPairOnALineGetsMoreMass) {
  Tensor<double> x({3, 1}, {0.0, 1.0, 2.0});
  AffinityMatrix P = affinities(x, 2.0);
  EXPECT_GT(P.at(0, 1), P.at(0, 2));
  EXPECT_GT(P.at(1, 2), P.at(0, 2));
}

TEST(Affinities, FivePointsMatchDirectFormula) {
  Tensor<double> x = random_points(5, 3, 9);
  const double perp = 2.5;
  AffinityMatrix P = affinities(x, perp);
  std::vector<std::vector<double>> cond(5, std::vector<double>(5, 0.0));
  for (std::size_t i = 0; i < 5; ++i) {
    std::vector<double> d2;
    for (std::size_t j = 0; j < 5; ++j) {
      if (j == i) continue;
      double s = 0;
      for (std::size_t k = 0; k < 3; ++k) s += std::pow(x.at(i, k) - x.at(j, k), 2);
      d2.push_back(s);
    }
    const double sigma = oracle_sigma(d2, perp);
    double z = 0;
    for (double v : d2) z += std::exp(-v / (2 * sigma * sigma));
    for (std::size_t j = 0, m = 0; j < 5; ++j) {
      if (j != i) cond[i][j] = std::exp(-d2[m++] / (2 * sigma * sigma)) / z;
    }
  }
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t j = 0; j < 5; ++j) {
      EXPECT_NEAR(P.at(i, j), (cond[i][j] + cond[j][i]) / 10.0, 1e-5) << i << "," << j;
    }
  }
}

TEST(StudentT, NormalizedWithZeroDiagonal) {
  Tensor<double> y = random_points(12, 2, 3);
  std::vector<double> q = student_t_affinities(y);
  EXPECT_NEAR(std::accumulate(q.begin(), q.end(), 0.0), 1.0, 1e-12);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(q[i * 12 + i], 0.0);
}

TEST(KlGradient, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    testing::GradCheck r = testing::tsne_gradient_trial(seed);
    EXPECT_TRUE(r.ok()) << "seed " << seed << " " << r.worst << " " << r.max_rel_error;
  }
}

TEST(EffectivePerplexity, ClampsToTheSampleCount) {
  EXPECT_EQ(effective_perplexity(1000, 30.0), 30.0);
  EXPECT_EQ(effective_perplexity(60, 30.0), 15.0);
  EXPECT_EQ(effective_perplexity(5, 30.0), 2.0);
  EXPECT_EQ(effective_perplexity(3, 30.0), 2.0);
}

TsneConfig short_config(std::uint64_t seed, int iterations = 300) {
  TsneConfig c;
  c.perplexity = 5.0;
  c.iterations = iterations;
  c.momentum_switch_iter = 100;
  c.exaggeration_iters = 100;
  c.seed = seed;
  return c;
}

TEST(RunTsne, ReducesKlAndIsCentered) {
  Tensor<double> x = random_points(30, 8, 2, 5.0);
  Embedding e = run_tsne(x, short_config(4));
  EXPECT_LT(e.final_kl, e.initial_kl);
  double scale = 0;
  for (std::size_t i = 0; i < e.Y.size(); ++i) scale = std::max(scale, std::abs(e.Y[i]));
  for (std::size_t k = 0; k < 2; ++k) {
    double mean = 0;
    for (std::size_t i = 0; i < 30; ++i) mean += e.Y.at(i, k) / 30.0;
    EXPECT_LE(std::abs(mean), 1e-6 * scale);
  }
}

TEST(RunTsne, DeterministicForFixedSeed) {
  Tensor<double> x = random_points(20, 5, 3);
  EXPECT_EQ(run_tsne(x, short_config(7, 100)).Y, run_tsne(x, short_config(7, 100)).Y);
  EXPECT_NE(run_tsne(x, short_config(7, 100)).Y, run_tsne(x, short_config(8, 100)).Y);
}

TEST(RunTsne, PermutedInputsGivePermutedOutputs) {
  const std::size_t n = 15;
  Tensor<double> x = random_points(n, 4, 6);
  Tensor<double> y0 = random_points(n, 2, 7, 1e-2);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(8);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor<double> xp({n, 4}), y0p({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 4; ++k) xp.at(i, k) = x.at(perm[i], k);
    for (std::size_t k = 0; k < 2; ++k) y0p.at(i, k) = y0.at(perm[i], k);
  }
  TsneConfig a = short_config(1, 300), b = short_config(1, 300);
  a.initial = y0;
  b.initial = y0p;
  Embedding ea = run_tsne(x, a), eb = run_tsne(xp, b);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(eb.Y.at(i, k), ea.Y.at(perm[i], k));
  }
}

TEST(RunTsne, SeparatedClustersStayTogether) {
  const std::size_t per = 20, n = 60, d = 10;
  Rng rng(11);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<double> x({n, d});
  std::vector<int> label(n);
  for (std::size_t i = 0; i < n; ++i) {
    label[i] = static_cast<int>(i / per);
    for (std::size_t k = 0; k < d; ++k) x.at(i, k) = normal(rng) + (k == i / per ? 10.0 : 0.0);
  }
  TsneConfig c;
  c.seed = 3;
  Embedding e = run_tsne(x, c);
  double agreement = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) dist.emplace_back(std::hypot(e.Y.at(i, 0) - e.Y.at(j, 0), e.Y.at(i, 1) - e.Y.at(j, 1)), j);
    }
    std::partial_sort(dist.begin(), dist.begin() + 10, dist.end());
    int same = 0;
    for (int m = 0; m < 10; ++m) same += label[dist[m].second] == label[i];
    agreement += same / 10.0;
  }
  EXPECT_GE(agreement / n, 0.9);
}

TEST(RunTsne, RejectsTooFewPoints) {
  EXPECT_THROW(run_tsne(random_points(4, 3, 1), short_config(1)), ContractError);
  Tensor<double> x = random_points(6, 3, 1);
  x[4] = std::nan("");
  EXPECT_THROW(run_tsne(x, short_config(1)), ContractError);
}

TEST(EmbeddingCsv, HeaderAndRows) {
  std::vector<ManifestRow> rows{{"a", "", "tram", "A", "", "test", ""}, {"b", "", "", "B", "", "test", ""}};
  Tensor<double> y({2, 2}, {0.5, -1.0, 2.0, 0.25});
  EXPECT_EQ(format_embedding_csv(rows, y), "id,device,scene,y0,y1\na,A,tram,0.5,-1\nb,B,,2,0.25\n");
}

}  // namespace
}  // namespace mtda
