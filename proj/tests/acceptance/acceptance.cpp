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

// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Every tolerance and pinned value lives in this file.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <string>

#include <spdlog/fmt/fmt.h>
#include <spdlog/spdlog.h>

#include "mtda/audio.hpp"
#include "mtda/geometry.hpp"
#include "mtda/losses.hpp"
#include "mtda/model.hpp"
#include "mtda/optimizer.hpp"
#include "mtda/synth.hpp"
#include "mtda/train.hpp"
#include "mtda/tsne.hpp"
#include "testing.hpp"

namespace mtda {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// ---- pinned values ------------------------------------------------------

constexpr int kGradientTrials = 100;
constexpr double kGradientTolerance = 1e-4;  // max relative error
constexpr double kGradientBudgetSeconds = 60.0;
// Partials skipped because ±step crosses a ReLU kink, as a share of all.
constexpr double kMaxKinkSkipFraction = 1e-3;
constexpr double kTableFitTolerance = 1e-3;
constexpr double kAffinitySumTolerance = 1e-9;
constexpr double kKnnAgreement = 0.9;

// Criterion 6: seeds whose recovered index order was checked once and is
// asserted stable.
constexpr std::uint64_t kIndexSeeds[] = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

// Criterion 7 desk benchmark.
constexpr std::uint64_t kBenchmarkSeeds[] = {11, 12, 13, 14, 15};
constexpr double kBenchmarkLambda = 0.2;
constexpr int kBenchmarkEpochs = 20;
constexpr double kBenchmarkBudgetSeconds = 600.0;
const char* const kHardestDevice = "D";
// Seed-averaged accuracy on the hardest device, recorded from the first
// calibrated run; a mode regresses when it falls more than the margin below.
constexpr double kRecordedDann = 0.332;
constexpr double kRecordedC2 = 0.342;
constexpr double kRecordedR = 0.514;
constexpr double kRegressionMargin = 0.02;

// ---- helpers ------------------------------------------------------------

struct Outcome {
  bool pass = false;
  std::string detail;
};

nlohmann::json synth_json(std::uint64_t seed) {
  return {{"seed", seed},
          {"devices",
           {{{"id", "A"}, {"shift_magnitude", 0.0}},
            {{"id", "B"}, {"shift_magnitude", 0.2}},
            {{"id", "C"}, {"shift_magnitude", 0.6}},
            {{"id", "D"}, {"shift_magnitude", 1.2}}}}};
}

struct SynthRun {
  testing::TempDir dir{"acceptance"};
  Manifest manifest;
  DomainIndexTable table;
};

// synth + index, as `mtda synth` and `mtda index --seed <seed>` run them.
void synth_and_index(std::uint64_t seed, SynthRun& run) {
  make_dataset(synth_config_from_json(synth_json(seed)), run.dir.path());
  run.manifest = read_manifest(run.dir / "manifest.csv");
  IndexConfig ic;
  ic.seed = seed;
  run.table = index_domains(run.manifest, ic).table;
}

Tensor<double> random_tensor(Rng& rng, Dims dims, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor<double> t(std::move(dims));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

ModelShape small_shape() {
  ModelShape s;
  s.num_classes = 4;
  s.num_domains = 4;
  s.conv1 = 3;
  s.conv2 = 4;
  s.feature_dim = 6;
  s.hidden = 5;
  return s;
}

Batch<double> random_batch(Rng& rng) {
  Batch<double> b;
  b.x = random_tensor(rng, {8, 1, 8, 8});
  std::uniform_int_distribution<int> cls(0, 3), dom(1, 3);
  for (int i = 0; i < 8; ++i) {
    const bool source = i < 4;
    b.scene.push_back(source ? cls(rng) : -1);
    b.domain.push_back(source ? 0 : dom(rng));
  }
  return b;
}

// ---- criteria -----------------------------------------------------------

Outcome gradient_suite() {
  const auto t0 = Clock::now();
  double worst = 0;
  std::string worst_where;
  std::size_t checks = 0, skipped = 0;
  for (int trial = 1; trial <= kGradientTrials; ++trial) {
    auto results = testing::op_gradient_trial(static_cast<std::uint64_t>(trial));
    results.emplace_back("tsne", testing::tsne_gradient_trial(static_cast<std::uint64_t>(trial)));
    for (const auto& [name, check] : results) {
      checks += check.checked;
      skipped += check.skipped;
      if (check.max_rel_error > worst) {
        worst = check.max_rel_error;
        worst_where = fmt::format("{} trial {} {}", name, trial, check.worst);
      }
    }
  }
  const double elapsed = seconds_since(t0);
  const double skip_fraction = static_cast<double>(skipped) / static_cast<double>(checks + skipped);
  const bool pass =
      worst <= kGradientTolerance && elapsed < kGradientBudgetSeconds && skip_fraction <= kMaxKinkSkipFraction;
  return {pass, fmt::format("{} trials, {} partials ({} at ReLU kinks skipped), max rel err {:.2e} ({}), {:.1f} s",
                            kGradientTrials, checks, skipped, worst, worst_where, elapsed)};
}

Outcome optimal_discriminator() {
  // z in {0..3}; P(target | z) = 0.1, 0.4, 0.6, 0.9.
  Rng rng(2024);
  const double p_target[] = {0.1, 0.4, 0.6, 0.9};
  std::uniform_int_distribution<int> z(0, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<DiscreteSample> samples;
  for (int i = 0; i < 400; ++i) {
    const int zi = z(rng);
    const bool target = u(rng) < p_target[zi];
    samples.push_back({zi, target ? std::vector<double>{1, 0} : std::vector<double>{0, 1}});
  }
  const auto oracle = conditional_mean_oracle(samples);
  const TableFit fit = fit_table_discriminator(samples);
  double worst = 0;
  for (const auto& [key, mean] : oracle) {
    for (std::size_t k = 0; k < mean.size(); ++k) worst = std::max(worst, std::abs(fit.table.at(key)[k] - mean[k]));
  }
  return {oracle.size() == 4 && worst <= kTableFitTolerance,
          fmt::format("max |table - E[d|z]| = {:.2e} after {} iterations", worst, fit.iterations)};
}

Outcome pathology_and_remedy() {
  Rng rng(7);
  std::uniform_real_distribution<double> u01(0.05, 0.95);
  std::normal_distribution<double> normal(0.0, 2.0);
  bool same_rows = true, scaled = true;
  for (int trial = 0; trial < 50; ++trial) {
    // (a) two targets, one near and one far, with equal outputs and labels.
    const double p = u01(rng);
    Tensor<double> d_pred({3, 2}, {p, 1 - p, p, 1 - p, u01(rng), u01(rng)});
    std::vector<int> u{1, 3, 0};
    Graph<double> g;
    NodeId x = g.input(d_pred);
    g.backward(g.mse_loss(x, binary_domain_labels(u)));
    const auto& adj = g.adjoint(x);
    same_rows = same_rows && adj.at(0, 0) == adj.at(1, 0) && adj.at(0, 1) == adj.at(1, 1);

    // (b) per-sample logit gradient under the index-weighted CE.
    const int ui = trial % 10;
    const double w = (ui + 1) / 10.0;
    Tensor<double> logits({1, 4});
    for (std::size_t j = 0; j < 4; ++j) logits[j] = normal(rng);
    std::vector<int> label{trial % 4};
    auto grad = [&](double weight) {
      Graph<double> gg;
      NodeId l = gg.input(logits);
      gg.backward(gg.softmax_cross_entropy(l, one_hot(label, 4), Tensor<double>({1}, weight)));
      return gg.adjoint(l);
    };
    const Tensor<double> plain = grad(1.0), weighted = grad(w);
    for (std::size_t j = 0; j < 4; ++j) scaled = scaled && weighted[j] == w * plain[j];
  }
  return {same_rows && scaled, fmt::format("(a) identical dL/dd_pred rows: {}; (b) exact (u+1)/T scaling: {}",
                                           same_rows ? "yes" : "no", scaled ? "yes" : "no")};
}

Outcome loss_identities() {
  Rng rng(11);
  // Weighted CE at u = T - 1 against plain CE.
  bool ce_equal = true;
  for (int trial = 0; trial < 50; ++trial) {
    Tensor<double> probs({6, 4});
    std::uniform_real_distribution<double> u(0.05, 1.0);
    std::vector<int> dom;
    std::uniform_int_distribution<int> pick(0, 3);
    for (std::size_t i = 0; i < 6; ++i) {
      double s = 0;
      for (std::size_t j = 0; j < 4; ++j) s += probs.at(i, j) = u(rng);
      for (std::size_t j = 0; j < 4; ++j) probs.at(i, j) /= s;
      dom.push_back(pick(rng));
    }
    double plain = 0;
    for (std::size_t i = 0; i < 6; ++i) plain -= std::log(probs.at(i, static_cast<std::size_t>(dom[i])));
    std::vector<int> idx(6, 9);
    ce_equal = ce_equal && weighted_domain_ce(probs, one_hot(dom, 4), idx, 10.0) == plain / 6;
  }

  // Reversal-layer gradients against the explicit objective; λ powers of two
  // keep every rescaling exact.
  bool grl_equal = true;
  bool lambda0_equal = true;
  const DiscriminatorMode modes[] = {DiscriminatorMode::kDann, DiscriminatorMode::kMtdaC1, DiscriminatorMode::kMtdaC2,
                                     DiscriminatorMode::kMtdaR};
  for (auto mode : modes) {
    for (double lambda : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      AdversarialModel<double> model(mode, small_shape(), 31);
      const Batch<double> batch = random_batch(rng);
      Graph<double> a(&model.params());
      LossOptions opts;
      opts.lambda_d = lambda;
      const auto ga = a.backward(model.build_loss(a, batch, opts).total);
      Graph<double> b(&model.params());
      const auto gb = b.backward(testing::explicit_objective(b, model, batch, lambda));
      for (std::size_t s = 0; s < model.params().size(); ++s) {
        const bool is_d = part_of(model.params().name(s)) == Part::kDiscriminator;
        for (std::size_t i = 0; i < ga[s].size(); ++i) {
          grl_equal = grl_equal && ga[s][i] == (is_d ? gb[s][i] / -lambda : gb[s][i]);
        }
      }
    }

    // λ = 0: one Adam update from identical parameters, adversarial graph
    // vs supervised-only graph.
    AdversarialModel<double> adv(mode, small_shape(), 37), sup(mode, small_shape(), 37);
    Adam<double> opt_adv, opt_sup;
    for (int step = 0; step < 5; ++step) {
      const Batch<double> batch = random_batch(rng);
      LossOptions zero;
      zero.lambda_d = 0.0;
      LossOptions supervised;
      supervised.include_domain = false;
      Graph<double> ga(&adv.params()), gs(&sup.params());
      opt_adv.step(adv.params(), ga.backward(adv.build_loss(ga, batch, zero).total));
      opt_sup.step(sup.params(), gs.backward(sup.build_loss(gs, batch, supervised).total));
    }
    for (std::size_t s = 0; s < adv.params().size(); ++s) {
      if (part_of(adv.params().name(s)) == Part::kDiscriminator) continue;
      lambda0_equal = lambda0_equal && adv.params().value(s) == sup.params().value(s);
    }
  }
  return {ce_equal && grl_equal && lambda0_equal,
          fmt::format("u=T-1 CE exact: {}; GRL vs explicit objective exact: {}; lambda_d=0 F,C updates "
                      "bit-identical: {}",
                      ce_equal ? "yes" : "no", grl_equal ? "yes" : "no", lambda0_equal ? "yes" : "no")};
}

Outcome distance_and_ranking() {
  std::vector<EmbeddedPair> hand{{{0, 0}, {0, 1}}, {{2, 0}, {2, 2}}};
  const double d = domain_distance(hand);
  Rng rng(5);
  std::uniform_real_distribution<double> dist(0.0, 5.0), scale(1e-3, 1e3);
  std::uniform_int_distribution<int> coarse(0, 3);
  bool rescale_ok = true, ties_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, double> a, b;
    const double s = scale(rng);
    for (int i = 0; i < 7; ++i) {
      // Coarse values make ties common.
      const double v = trial % 2 ? dist(rng) : static_cast<double>(coarse(rng));
      a["t" + std::to_string(i)] = v;
      b["t" + std::to_string(i)] = v * s;
    }
    const auto ta = assign_indices(a, "src"), tb = assign_indices(b, "src");
    rescale_ok = rescale_ok && ta.ranked_targets() == tb.ranked_targets();
    const auto ranked = ta.ranked_targets();
    for (std::size_t k = 1; k < ranked.size(); ++k) {
      const double prev = a[ranked[k - 1]], cur = a[ranked[k]];
      ties_ok = ties_ok && (prev < cur || (prev == cur && ranked[k - 1] < ranked[k]));
    }
  }
  return {d == 1.5 && rescale_ok && ties_ok,
          fmt::format("hand example = {}; rescaling invariant: {}; tie rule: {}", d, rescale_ok ? "yes" : "no",
                      ties_ok ? "yes" : "no")};
}

Outcome pinned_index_order() {
  std::vector<std::string> failed;
  for (std::uint64_t seed : kIndexSeeds) {
    SynthRun run;
    synth_and_index(seed, run);
    if (run.table.ranked_targets() != std::vector<std::string>{"B", "C", "D"}) failed.push_back(std::to_string(seed));
  }
  return {failed.empty(), fmt::format("{}/{} pinned seeds recover B<C<D{}", std::size(kIndexSeeds) - failed.size(),
                                      std::size(kIndexSeeds),
                                      failed.empty() ? "" : "; failing seeds " + fmt::format("{}", fmt::join(failed, ",")))};
}

Outcome desk_benchmark() {
  const auto t0 = Clock::now();
  const DiscriminatorMode modes[] = {DiscriminatorMode::kDann, DiscriminatorMode::kMtdaC2, DiscriminatorMode::kMtdaR};
  std::map<DiscriminatorMode, double> mean;
  std::string per_seed;
  for (std::uint64_t seed : kBenchmarkSeeds) {
    SynthRun run;
    synth_and_index(seed, run);
    per_seed += fmt::format(" s{}:", seed);
    for (auto mode : modes) {
      TrainConfig tc;
      tc.mode = mode;
      tc.lambda_d = kBenchmarkLambda;
      tc.epochs = kBenchmarkEpochs;
      tc.seed = seed;
      const TrainResult r = train(tc, run.manifest, run.table);
      const double acc = r.report.devices.at(kHardestDevice).value();
      mean[mode] += acc / static_cast<double>(std::size(kBenchmarkSeeds));
      per_seed += fmt::format(" {}={:.4f}", to_string(mode), acc);
    }
  }
  const double elapsed = seconds_since(t0);
  const double dann = mean[DiscriminatorMode::kDann], c2 = mean[DiscriminatorMode::kMtdaC2],
               r = mean[DiscriminatorMode::kMtdaR];
  const bool directional = c2 >= dann && r >= dann;
  const bool recorded = dann >= kRecordedDann - kRegressionMargin && c2 >= kRecordedC2 - kRegressionMargin &&
                        r >= kRecordedR - kRegressionMargin;
  return {directional && recorded && elapsed < kBenchmarkBudgetSeconds,
          fmt::format("device {} mean acc: dann {:.4f}, mtda-c2 {:.4f}, mtda-r {:.4f} (recorded {:.4f}/{:.4f}/{:.4f}); "
                      "{:.0f} s;{}",
                      kHardestDevice, dann, c2, r, kRecordedDann, kRecordedC2, kRecordedR, elapsed, per_seed)};
}

Outcome frontend_contract() {
  auto tone = [](double hz, std::size_t n) {
    AudioClip clip{std::vector<double>(n), FrontendParams::kSampleRate};
    for (std::size_t i = 0; i < n; ++i) {
      clip.samples[i] = 0.5 * std::sin(2 * std::numbers::pi * hz * static_cast<double>(i) / FrontendParams::kSampleRate);
    }
    return clip;
  };
  const FeatureTensor ten = logmel(tone(1000.0, FrontendParams::kClipSamples));
  const bool shape_ok = ten.frames.dims() == Dims{638, 64};

  const FeatureTensor silent = logmel(AudioClip{std::vector<double>(FrontendParams::kClipSamples, 0.0),
                                                FrontendParams::kSampleRate});
  const double floor_value = std::log(FrontendParams::kLogFloor);
  bool silence_ok = silent.frames.dims() == Dims{638, 64};
  for (std::size_t i = 0; i < silent.frames.size(); ++i) silence_ok = silence_ok && silent.frames[i] == floor_value;

  std::vector<std::size_t> missed;
  for (std::size_t band : {4u, 10u, 20u, 32u, 45u, 58u}) {
    const FeatureTensor f = logmel(tone(default_filterbank().center_hz(band), 64000));
    std::vector<double> mean(f.num_bands(), 0.0);
    for (std::size_t t = 0; t < f.num_frames(); ++t)
      for (std::size_t m = 0; m < f.num_bands(); ++m) mean[m] += f.frames.at(t, m);
    if (static_cast<std::size_t>(std::max_element(mean.begin(), mean.end()) - mean.begin()) != band) {
      missed.push_back(band);
    }
  }
  return {shape_ok && silence_ok && missed.empty(),
          fmt::format("10 s -> {}; silence == ln(1e-10): {}; band-center peaks {}", dims_to_string(ten.frames.dims()),
                      silence_ok ? "yes" : "no", missed.empty() ? "all 6 correct" : "missed some")};
}

Outcome tsne_contract() {
  bool sym = true, sum_ok = true, perp_ok = true, kl_ok = true;
  double worst_perp = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Tensor<double> x = random_tensor(rng, {40, 8}, 3.0);
    const double perplexity = 5.0 + static_cast<double>(seed);
    const AffinityMatrix P = affinities(x, perplexity);
    double total = 0;
    for (std::size_t i = 0; i < P.n; ++i) {
      for (std::size_t j = 0; j < P.n; ++j) {
        sym = sym && P.at(i, j) == P.at(j, i);
        total += P.at(i, j);
      }
      const double err = std::abs(std::exp2(P.rows[i].entropy_bits) - perplexity);
      worst_perp = std::max(worst_perp, err);
      perp_ok = perp_ok && P.rows[i].converged && err <= kPerplexityTolerance;
    }
    sum_ok = sum_ok && std::abs(total - 1.0) <= kAffinitySumTolerance;
    TsneConfig cfg;
    cfg.perplexity = perplexity;
    cfg.iterations = 500;
    cfg.seed = seed;
    const Embedding e = run_tsne(x, cfg);
    kl_ok = kl_ok && e.final_kl < e.initial_kl;
  }

  // Three separated clusters, 10-NN label agreement in the embedding.
  const std::size_t per = 20, n = 60, d = 10;
  Rng rng(99);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<double> x({n, d});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) x.at(i, k) = normal(rng) + (k == i / per ? 10.0 : 0.0);
  TsneConfig cfg;
  cfg.seed = 1;
  const Embedding e = run_tsne(x, cfg);
  double agreement = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> dist;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist.emplace_back(std::hypot(e.Y.at(i, 0) - e.Y.at(j, 0), e.Y.at(i, 1) - e.Y.at(j, 1)), j);
    std::partial_sort(dist.begin(), dist.begin() + 10, dist.end());
    for (int m = 0; m < 10; ++m) agreement += (dist[static_cast<std::size_t>(m)].second / per == i / per) / 10.0;
  }
  agreement /= static_cast<double>(n);
  kl_ok = kl_ok && e.final_kl < e.initial_kl;
  return {sym && sum_ok && perp_ok && kl_ok && agreement >= kKnnAgreement,
          fmt::format("symmetric: {}; sum within 1e-9: {}; max |2^H - perp| = {:.1e}; KL decreases on 11 runs: {}; "
                      "10-NN agreement {:.3f}",
                      sym ? "yes" : "no", sum_ok ? "yes" : "no", worst_perp, kl_ok ? "yes" : "no", agreement)};
}

}  // namespace
}  // namespace mtda

int main(int argc, char** argv) {
  spdlog::set_level(spdlog::level::err);
  const std::vector<std::pair<const char*, std::function<mtda::Outcome()>>> criteria = {
      {"gradient suite", mtda::gradient_suite},
      {"optimal discriminator", mtda::optimal_discriminator},
      {"binary-label pathology and index weighting", mtda::pathology_and_remedy},
      {"loss identities", mtda::loss_identities},
      {"domain distance and ranking", mtda::distance_and_ranking},
      {"pinned-seed index order", mtda::pinned_index_order},
      {"desk benchmark", mtda::desk_benchmark},
      {"frontend contract", mtda::frontend_contract},
      {"t-SNE contract", mtda::tsne_contract},
  };
  // Optional argument: run only the listed criterion numbers.
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) only.push_back(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int number = static_cast<int>(k + 1);
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    mtda::Outcome out;
    try {
      out = criteria[k].second();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    failed += out.pass ? 0 : 1;
    std::printf("criterion %d %s: %s | %s\n", number, out.pass ? "PASS" : "FAIL", criteria[k].first,
                out.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
