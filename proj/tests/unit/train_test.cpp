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

#include <gtest/gtest.h>

#include "mtda/errors.hpp"
#include "mtda/synth.hpp"
#include "mtda/train.hpp"
#include "testing.hpp"

namespace mtda {
namespace {

namespace fs = std::filesystem;

// Tiny synthetic task shared by the tests below: 4 classes, source A and
// targets B, C, 16 frames.
class TrainTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new testing::TempDir("train");
    SynthConfig c;
    c.num_classes = 4;
    c.samples_per_class = 9;
    c.frames = 16;
    c.seed = 3;
    c.devices = {DeviceProfile::from_magnitude("A", 0.0, 1), DeviceProfile::from_magnitude("B", 0.3, 2),
                 DeviceProfile::from_magnitude("C", 1.0, 3)};
    make_dataset(c, dir_->path());
    manifest_ = new Manifest(read_manifest(*dir_ / "manifest.csv"));
    table_ = new DomainIndexTable(assign_indices({{"B", 1.0}, {"C", 2.0}}, "A"));
  }
  static void TearDownTestSuite() {
    delete table_;
    delete manifest_;
    delete dir_;
  }

  static TrainConfig small_config() {
    TrainConfig c;
    c.epochs = 2;
    c.batch_size = 8;
    c.seed = 5;
    c.conv1 = 2;
    c.conv2 = 3;
    c.feature_dim = 8;
    c.hidden = 4;
    c.lambda_d = 0.5;
    return c;
  }

  static testing::TempDir* dir_;
  static Manifest* manifest_;
  static DomainIndexTable* table_;
};

testing::TempDir* TrainTest::dir_ = nullptr;
Manifest* TrainTest::manifest_ = nullptr;
DomainIndexTable* TrainTest::table_ = nullptr;

void expect_same_params(const AdversarialModel<float>& a, const AdversarialModel<float>& b, bool include_d = true) {
  ASSERT_EQ(a.params().size(), b.params().size());
  for (std::size_t s = 0; s < a.params().size(); ++s) {
    if (!include_d && part_of(a.params().name(s)) == Part::kDiscriminator) continue;
    EXPECT_EQ(a.params().value(s), b.params().value(s)) << a.params().name(s);
  }
}

TEST(TrainConfigJson, RoundTripAndUnknownKeys) {
  TrainConfig c;
  c.mode = DiscriminatorMode::kMtdaR;
  c.lambda_d = 0.2;
  c.groups = {{"B&C", {"B", "C"}}};
  nlohmann::json j = to_json(c);
  EXPECT_EQ(to_json(train_config_from_json(j)), j);
  for (const auto& key : train_config_keys()) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_THROW(train_config_from_json({{"lamda_d", 1.0}}), ContractError);
  EXPECT_THROW(train_config_from_json({{"lambda_d", "big"}}), ContractError);
  EXPECT_THROW(train_config_from_json({{"mode", "mcd"}}), ContractError);
  EXPECT_EQ(train_config_from_json(nlohmann::json::object()).epochs, 200);
}

TEST(TrainConfigJson, DefaultsFollowTheExperimentSetting) {
  TrainConfig c;
  EXPECT_EQ(c.adam.learning_rate, 0.002);
  EXPECT_EQ(c.adam.beta1, 0.9);
  EXPECT_EQ(c.adam.beta2, 0.999);
  EXPECT_EQ(c.adam.epsilon, 1e-8);
  EXPECT_EQ(c.batch_size, 32u);
  EXPECT_EQ(c.temperature, 10.0);
  EXPECT_EQ(c.lambda_grid, (std::vector<double>{0.2, 0.5, 1.0, 2.0, 5.0, 8.0, 10.0}));
}

TEST(TrainConfigJson, ValidateRejectsBadValues) {
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ContractError);
  };
  bad([](TrainConfig& c) { c.lambda_d = -0.1; });
  bad([](TrainConfig& c) { c.batch_size = 33; });
  bad([](TrainConfig& c) { c.epochs = 0; });
  bad([](TrainConfig& c) { c.lambda_grid.clear(); });
  bad([](TrainConfig& c) { c.temperature = 0; });
  bad([](TrainConfig& c) { c.source_fraction = 1.0; });
  TrainConfig ok;
  EXPECT_NO_THROW(ok.validate());
}

TEST_F(TrainTest, SameSeedGivesIdenticalResults) {
  TrainResult a = train(small_config(), *manifest_, *table_);
  TrainResult b = train(small_config(), *manifest_, *table_);
  expect_same_params(a.trained.model, b.trained.model);
  EXPECT_EQ(a.report.to_json(), b.report.to_json());
  TrainConfig other = small_config();
  other.seed = 6;
  TrainResult c = train(other, *manifest_, *table_);
  EXPECT_NE(a.trained.model.params().value(0), c.trained.model.params().value(0));
}

TEST_F(TrainTest, LossCurveAccountsEveryStep) {
  TrainResult r = train(small_config(), *manifest_, *table_);
  // 4 classes x 6 train rows, 20% held out -> 19 or 20 rows, 4 per batch.
  ASSERT_FALSE(r.report.loss_curve.empty());
  const std::size_t per_epoch = r.report.loss_curve.size() / 2;
  EXPECT_EQ(r.report.loss_curve.size(), 2 * per_epoch);
  for (std::size_t i = 0; i < r.report.loss_curve.size(); ++i) {
    const LossRecord& rec = r.report.loss_curve[i];
    EXPECT_EQ(rec.step, i);
    EXPECT_NEAR(rec.total, rec.scene + rec.domain, 1e-5 * std::max(1.0, std::abs(rec.total)));
    EXPECT_GE(rec.scene, 0.0);
    EXPECT_GE(rec.domain, 0.0);
  }
  EXPECT_LT(r.report.best_step, r.report.loss_curve.size());
  EXPECT_GE(r.report.best_val_accuracy, 0.0);
  EXPECT_LE(r.report.best_val_accuracy, 1.0);
}

TEST_F(TrainTest, ZeroLambdaLeavesFeatureAndClassifierIndependentOfTheDiscriminator) {
  TrainConfig dann = small_config();
  dann.lambda_d = 0.0;
  dann.mode = DiscriminatorMode::kDann;
  TrainConfig c2 = dann;
  c2.mode = DiscriminatorMode::kMtdaC2;
  TrainResult a = train(dann, *manifest_, *table_);
  TrainResult b = train(c2, *manifest_, *table_);
  expect_same_params(a.trained.model, b.trained.model, /*include_d=*/false);
  // D still trains.
  AdversarialModel<float> init(DiscriminatorMode::kMtdaC2, b.trained.model.shape(), c2.seed);
  const std::size_t slot = init.params().slot("D.out.weight");
  EXPECT_NE(init.params().value(slot), b.trained.model.params().value(slot));
}

TEST_F(TrainTest, EveryModeTrains) {
  for (auto m : {DiscriminatorMode::kDann, DiscriminatorMode::kMtdaC1, DiscriminatorMode::kMtdaC2,
                 DiscriminatorMode::kMtdaR}) {
    TrainConfig c = small_config();
    c.mode = m;
    c.epochs = 1;
    TrainResult r = train(c, *manifest_, *table_);
    EXPECT_EQ(r.trained.model.mode(), m);
    EXPECT_EQ(r.report.config["mode"], to_string(m));
    for (const auto& [dev, acc] : r.report.devices) EXPECT_EQ(acc.total, 12u) << dev;
  }
}

TEST_F(TrainTest, RejectsUnusableInputs) {
  Manifest no_source = *manifest_;
  for (auto& row : no_source.rows) {
    if (row.split == "train") row.scene.clear();
  }
  EXPECT_THROW(train(small_config(), no_source, *table_), ContractError);

  Manifest no_target = *manifest_;
  std::erase_if(no_target.rows, [](const ManifestRow& r) { return r.device != "A" && r.split == "train"; });
  EXPECT_THROW(train(small_config(), no_target, *table_), ContractError);

  DomainIndexTable partial = assign_indices({{"B", 1.0}}, "A");
  EXPECT_THROW(train(small_config(), *manifest_, partial), ContractError);
}

TEST_F(TrainTest, CheckpointRoundTripKeepsPredictions) {
  TrainResult r = train(small_config(), *manifest_, *table_);
  testing::TempDir dir;
  r.trained.save(dir / "model.ckpt");
  EXPECT_TRUE(fs::exists(dir / "model.ckpt.json"));
  TrainedModel back = TrainedModel::load(dir / "model.ckpt");
  EXPECT_EQ(back.classes, r.trained.classes);
  EXPECT_EQ(back.index_table, r.trained.index_table);
  expect_same_params(back.model, r.trained.model);
  EXPECT_EQ(evaluate(back, *manifest_, "test").to_json()["devices"], r.report.to_json()["devices"]);
}

TEST_F(TrainTest, ConstantPredictorScoresClassPrevalence) {
  TrainResult r = train(small_config(), *manifest_, *table_);
  TrainedModel constant = r.trained;
  auto& p = constant.model.params();
  p.value(p.slot("C.dense.weight")) = Tensor<float>(p.value(p.slot("C.dense.weight")).dims(), 0.0F);
  Tensor<float> bias(p.value(p.slot("C.dense.bias")).dims(), 0.0F);
  bias[1] = 5.0F;
  p.value(p.slot("C.dense.bias")) = bias;
  ExperimentReport rep = evaluate(constant, *manifest_, "test", {{"B&C", {"B", "C"}}});
  for (const auto& [dev, acc] : rep.devices) {
    EXPECT_EQ(acc.total, 12u) << dev;
    EXPECT_EQ(acc.correct, 3u) << dev;
  }
  EXPECT_EQ(rep.groups.at("B&C").total, 24u);
  EXPECT_DOUBLE_EQ(rep.groups.at("B&C").value(), 0.25);
}

TEST_F(TrainTest, GroupAccuracyIsRowWeightedMean) {
  TrainResult r = train(small_config(), *manifest_, *table_);
  Manifest uneven = *manifest_;
  // Drop half of C's test rows so the devices carry different weights.
  int dropped = 0;
  std::erase_if(uneven.rows, [&](const ManifestRow& row) {
    return row.device == "C" && row.split == "test" && dropped++ < 6;
  });
  ExperimentReport rep = evaluate(r.trained, uneven, "test", {{"B&C", {"B", "C"}}, {"none", {"Z"}}});
  const Accuracy& b = rep.devices.at("B");
  const Accuracy& c = rep.devices.at("C");
  EXPECT_EQ(c.total, 6u);
  const double expected = (b.value() * b.total + c.value() * c.total) / static_cast<double>(b.total + c.total);
  EXPECT_NEAR(rep.groups.at("B&C").value(), expected, 1e-12);
  EXPECT_EQ(rep.groups.count("none"), 0u);
  for (const auto& [name, acc] : rep.devices) {
    EXPECT_GE(acc.value(), 0.0);
    EXPECT_LE(acc.value(), 1.0);
  }
}

TEST_F(TrainTest, TestOnlyDeviceIsStillReported) {
  Manifest extra = *manifest_;
  for (const auto& row : manifest_->rows) {
    if (row.device == "C" && row.split == "test") {
      ManifestRow copy = row;
      copy.id = "S9_" + row.id;
      copy.device = "S9";
      extra.rows.push_back(copy);
    }
  }
  TrainResult r = train(small_config(), extra, *table_);
  EXPECT_EQ(r.report.devices.at("S9").total, 12u);
  EXPECT_EQ(r.report.devices.at("S9").correct, r.report.devices.at("C").correct);
  EXPECT_EQ(r.report.groups.at("targets").total, 36u);
}

TEST_F(TrainTest, ExportEmbeddingsCountsAndColumns) {
  TrainResult r = train(small_config(), *manifest_, *table_);
  TsneConfig tsne;
  tsne.iterations = 100;
  EmbeddingExport e = export_embeddings(r.trained, *manifest_, 5, tsne);
  EXPECT_EQ(e.rows.size(), 15u);
  EXPECT_EQ(e.z.dims(), (Dims{15, 8}));
  EXPECT_EQ(e.embedding.Y.dims(), (Dims{15, 2}));
  EmbeddingExport all = export_embeddings(r.trained, *manifest_, 50, tsne);
  EXPECT_EQ(all.rows.size(), 36u);
  std::string csv = format_embedding_csv(e.rows, e.embedding.Y);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,device,scene,y0,y1");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), 16u);
  EXPECT_THROW(export_embeddings(r.trained, *manifest_, 4, tsne), ContractError);
}

TEST_F(TrainTest, SweepRecordsEveryGridValue) {
  TrainConfig c = small_config();
  c.epochs = 1;
  c.lambda_grid = {0.5, 1e300, 0.2};
  testing::TempDir dir;
  SweepSummary s = sweep(c, *manifest_, *table_, dir.path());
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_TRUE(s.rows[0].ok);
  EXPECT_FALSE(s.rows[1].ok);
  EXPECT_FALSE(s.rows[1].error.empty());
  EXPECT_TRUE(s.rows[2].ok);
  ASSERT_TRUE(s.best.has_value());
  EXPECT_TRUE(s.rows[*s.best].ok);
  EXPECT_TRUE(fs::exists(dir / "lambda_0.5/model.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "lambda_0.2/report.json"));
  EXPECT_EQ(s.to_json()["runs"].size(), 3u);
  EXPECT_EQ(s.to_csv().substr(0, s.to_csv().find('\n')), "lambda_d,status,targets,error");
}

TEST_F(TrainTest, SweepOfOneEqualsSingleTrain) {
  TrainConfig c = small_config();
  c.epochs = 1;
  c.lambda_d = 0.2;
  c.lambda_grid = {0.2};
  SweepSummary s = sweep(c, *manifest_, *table_);
  TrainResult r = train(c, *manifest_, *table_);
  ASSERT_EQ(s.rows.size(), 1u);
  EXPECT_EQ(s.rows[0].report->to_json(), r.report.to_json());
  EXPECT_EQ(s.rows[0].selected_accuracy, r.report.groups.at("targets").value());
}

TEST(SelectBest, ArgmaxWithTiesToSmallerLambda) {
  auto row = [](double l, bool ok, double acc) {
    SweepRow r;
    r.lambda_d = l;
    r.ok = ok;
    r.selected_accuracy = acc;
    return r;
  };
  EXPECT_EQ(select_best({row(0.2, true, 0.5), row(0.5, true, 0.7), row(1.0, true, 0.6)}), 1u);
  EXPECT_EQ(select_best({row(2.0, true, 0.7), row(0.5, true, 0.7), row(1.0, true, 0.6)}), 1u);
  EXPECT_EQ(select_best({row(0.2, false, 0.9), row(0.5, true, 0.1)}), 1u);
  EXPECT_FALSE(select_best({row(0.2, false, 0.0)}).has_value());
  EXPECT_FALSE(select_best({}).has_value());
}

TEST(Report, CsvFormats) {
  ExperimentReport r;
  r.devices["B"] = {3, 4};
  r.groups["all"] = {3, 4};
  EXPECT_EQ(format_accuracy_csv(r), "name,kind,correct,total,accuracy\nB,device,3,4,0.75\nall,group,3,4,0.75\n");
  EXPECT_EQ(format_loss_csv({{1, 0.5, 0.25, 0.75}}), "step,L_y,L_d,L_total\n1,0.5,0.25,0.75\n");
  EXPECT_EQ(format_double(0.1), "0.1");
  testing::TempDir dir;
  write_report(dir.path(), r);
  for (const char* f : {"report.json", "accuracy.csv", "train_log.csv", "timing.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(r.to_json().contains("wall_seconds"));
}

}  // namespace
}  // namespace mtda
