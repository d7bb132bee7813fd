// Copyright 2026 The mdlab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "gtest/gtest.h"
#include "mdlab/experiment.h"
#include "mdlab/io.h"
#include "mdlab/report.h"
#include "test_util.h"

namespace mdlab {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::json;

ExperimentConfig Tiny(const fs::path& out, Defense defense = Defense::kNone) {
  ExperimentConfig c = ExperimentConfig::Default();
  c.name = "tiny";
  c.dataset.n_member = 16;
  c.dataset.n_test = 16;
  c.schedule.num_timesteps = 20;
  c.schedule.beta_end = 0.2;
  c.arch.hidden = {16};
  c.arch.embed_dim = 8;
  c.arch.fourier_features = 1;
  c.train.iterations = 40;
  c.train.batch_size = 8;
  c.sampling.n_samples = 50;
  c.eval.quality_reference = 50;
  c.eval.gap_n_mc = 2;
  c.eval.memorized_set_size = 8;
  c.eval.clean_set_size = 8;
  c.attacks[0].t_sec = {2, 10};
  c.attacks[1].t_lists = {{}, {1, 2}};
  c.defense = defense;
  if (defense == Defense::kDualMd) c.attacks = {c.attacks[2]};
  c.output_dir = out.string();
  return c;
}

TEST(ConfigTest, DefaultIsValidAndRoundTrips) {
  ExperimentConfig c = ExperimentConfig::Default();
  EXPECT_OK(c.Validate());
  ASSERT_OK_AND_ASSIGN(ExperimentConfig back, ExperimentConfig::FromJson(c.ToJson()));
  EXPECT_EQ(back.ToJson().dump(), c.ToJson().dump());
  ASSERT_OK_AND_ASSIGN(ExperimentConfig empty, ExperimentConfig::FromJson(Json::object()));
  EXPECT_EQ(empty.ToJson().dump(), c.ToJson().dump());
}

TEST(ConfigTest, ShippedConfigsLoad) {
  int n = 0;
  for (const auto& entry : fs::directory_iterator(MDLAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ASSERT_OK_AND_ASSIGN(ExperimentConfig c, LoadExperimentConfig(entry.path()));
    EXPECT_TRUE(c.Validate().ok()) << entry.path();
    ++n;
  }
  EXPECT_EQ(n, 3);
  ASSERT_OK_AND_ASSIGN(ExperimentConfig ring,
                       LoadExperimentConfig(fs::path(MDLAB_CONFIG_DIR) / "ring.json"));
  ExperimentConfig def = ExperimentConfig::Default();
  def.name = "ring";
  EXPECT_EQ(ring.ToJson().dump(), def.ToJson().dump());
}

TEST(ConfigTest, UnknownKeysRejected) {
  for (const char* path : {"/bogus", "/schedule/bogus", "/arch/bogus", "/train/bogus",
                           "/sampling/bogus", "/eval/bogus", "/dataset/bogus"}) {
    Json j = ExperimentConfig::Default().ToJson();
    j[Json::json_pointer(path)] = 1;
    EXPECT_FALSE(ExperimentConfig::FromJson(j).ok()) << path;
  }
  Json j = ExperimentConfig::Default().ToJson();
  j["attacks"][0]["bogus"] = 1;
  EXPECT_FALSE(ExperimentConfig::FromJson(j).ok());
  j = ExperimentConfig::Default().ToJson();
  j["train"]["conditional"] = true;
  EXPECT_FALSE(ExperimentConfig::FromJson(j).ok());
}

TEST(ConfigTest, PartialTrainBlockMerges) {
  ASSERT_OK_AND_ASSIGN(ExperimentConfig c,
                       ExperimentConfig::FromJson(Json{{"train", {{"iterations", 7}}}}));
  EXPECT_EQ(c.train.iterations, 7);
  EXPECT_EQ(c.train.learning_rate, ExperimentConfig::Default().train.learning_rate);
}

TEST(ConfigTest, ValidationRules) {
  ExperimentConfig c = ExperimentConfig::Default();
  c.defense = Defense::kDualMd;
  EXPECT_FALSE(c.Validate().ok());  // white-box attacks on a dual arm
  c = ExperimentConfig::Default();
  c.attacks[0].t_sec = {100};
  EXPECT_FALSE(c.Validate().ok());
  c = ExperimentConfig::Default();
  c.attacks.push_back(c.attacks[0]);
  EXPECT_FALSE(c.Validate().ok());
}

TEST(ConfigTest, Overrides) {
  Json j = Json::object();
  ASSERT_OK(ApplyOverride(j, "train.iterations=12"));
  ASSERT_OK(ApplyOverride(j, "name=hello"));
  ASSERT_OK(ApplyOverride(j, "arch.hidden=[8,8]"));
  EXPECT_EQ(j["train"]["iterations"], 12);
  EXPECT_EQ(j["name"], "hello");
  EXPECT_EQ(j["arch"]["hidden"], Json::array({8, 8}));
  EXPECT_FALSE(ApplyOverride(j, "no_equals_sign").ok());
  EXPECT_FALSE(ApplyOverride(j, "=3").ok());
}

TEST(ExperimentTest, BaselineManifest) {
  const fs::path dir = testing::TempDir("exp_baseline");
  ExperimentConfig c = Tiny(dir);
  c.attacks = {c.attacks[0]};
  ASSERT_OK_AND_ASSIGN(Json m, RunExperiment(c));
  EXPECT_EQ(m["status"], "ok");
  EXPECT_EQ(m["format_version"], kManifestFormatVersion);
  ASSERT_EQ(m["metrics"]["reports"].size(), 1u);
  EXPECT_TRUE(m["metrics"]["reports"].contains("secmi@baseline"));
  EXPECT_EQ(m["metrics"]["reports"]["secmi@baseline"]["sweep"].size(), 2u);
  EXPECT_TRUE(m["metrics"]["quality"].contains("baseline"));
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_OK(VerifyManifestArtifacts(dir / "manifest.json"));
}

TEST(ExperimentTest, DistillArmRecordsThreeDistinctCheckpoints) {
  const fs::path dir = testing::TempDir("exp_distill");
  ASSERT_OK_AND_ASSIGN(Json m, RunExperiment(Tiny(dir, Defense::kDistillMd)));
  const Json& ck = m["artifacts"]["checkpoints"];
  ASSERT_EQ(ck.size(), 3u);
  std::set<std::string> hashes;
  for (const char* role : {"teacher1", "teacher2", "student"}) {
    ASSERT_TRUE(ck.contains(role)) << role;
    hashes.insert(ck[role]["hash"].get<std::string>());
  }
  EXPECT_EQ(hashes.size(), 3u);
  const Json& audit = m["metrics"]["training"]["student"]["audit"];
  EXPECT_EQ(audit["d1_batches_teacher2"], 20);
  EXPECT_EQ(audit["d2_batches_teacher1"], 20);
  for (const char* g : {"student", "teacher1_on_d2", "teacher2_on_d1"}) {
    EXPECT_TRUE(m["metrics"]["generalization_gaps"].contains(g)) << g;
  }
}

TEST(ExperimentTest, DualArmAttacksEachGenerator) {
  const fs::path dir = testing::TempDir("exp_dual");
  ASSERT_OK_AND_ASSIGN(Json m, RunExperiment(Tiny(dir, Defense::kDualMd)));
  for (const char* key : {"blackbox@dual", "blackbox@teacher1", "blackbox@teacher2"}) {
    EXPECT_TRUE(m["metrics"]["reports"].contains(key)) << key;
  }
  // Dual samples answer for all members; each teacher for its own half.
  const Json& r = m["metrics"]["reports"];
  EXPECT_EQ(r["blackbox@dual"]["n_member"], 16);
  EXPECT_EQ(r["blackbox@teacher1"]["n_member"], 8);
  EXPECT_EQ(r["blackbox@teacher2"]["n_member"], 8);
  EXPECT_EQ(r["blackbox@teacher1"]["n_nonmember"], 16);
}

TEST(ExperimentTest, RerunReproducesMetricBlocks) {
  const fs::path a = testing::TempDir("exp_det_a");
  const fs::path b = testing::TempDir("exp_det_b");
  ASSERT_OK_AND_ASSIGN(Json ma, RunExperiment(Tiny(a, Defense::kDistillMd)));
  ASSERT_OK_AND_ASSIGN(Json mb, RunExperiment(Tiny(b, Defense::kDistillMd)));
  EXPECT_EQ(MetricBlocks(ma).dump(), MetricBlocks(mb).dump());
  EXPECT_EQ(ma["artifacts"].dump(), mb["artifacts"].dump());
}

TEST(ExperimentTest, CacheSharesTeachersAcrossArms) {
  ModelCache cache;
  const fs::path root = testing::TempDir("exp_cache");
  ASSERT_OK(RunExperiment(Tiny(root / "d", Defense::kDistillMd), &cache).status());
  ASSERT_OK(RunExperiment(Tiny(root / "u", Defense::kDualMd), &cache).status());
  EXPECT_EQ(cache.size(), 3u);
  // Each arm reads both teachers at least once.
  EXPECT_GE(cache.hits(), 2);
  // Cached models produce the same manifest as a fresh run.
  ASSERT_OK_AND_ASSIGN(Json fresh, RunExperiment(Tiny(root / "f", Defense::kDualMd)));
  ASSERT_OK_AND_ASSIGN(Json cached, ReadJsonFile(root / "u" / "manifest.json"));
  EXPECT_EQ(MetricBlocks(fresh).dump(), MetricBlocks(cached).dump());
}

TEST(ExperimentTest, FailureWritesFailedManifest) {
  const fs::path dir = testing::TempDir("exp_fail");
  ExperimentConfig c = Tiny(dir);
  c.train.iterations = 0;
  EXPECT_FALSE(RunExperiment(c).ok());
  ASSERT_OK_AND_ASSIGN(Json m, ReadJsonFile(dir / "manifest.json"));
  EXPECT_EQ(m["status"], "failed");
  EXPECT_EQ(m["failed_stage"], "validate");
}

TEST(ExperimentTest, TamperedArtifactDetected) {
  const fs::path dir = testing::TempDir("exp_tamper");
  ExperimentConfig c = Tiny(dir);
  c.attacks = {c.attacks[2]};
  ASSERT_OK_AND_ASSIGN(Json m, RunExperiment(c));
  const fs::path ckpt = dir / m["artifacts"]["checkpoints"]["baseline"]["path"].get<std::string>();
  std::ofstream(ckpt, std::ios::app) << "x";
  EXPECT_FALSE(VerifyManifestArtifacts(dir / "manifest.json").ok());
}

TEST(MemorizationTest, SetsAreNearCopiesAndNonmembers) {
  DatasetSpec spec;
  spec.duplicate = DuplicationSpec{4, 100};
  ASSERT_OK_AND_ASSIGN(Dataset d, GenerateDataset(spec, 3));
  EvalConfig eval;
  ASSERT_OK_AND_ASSIGN(MemorizationSets s, BuildMemorizationSets(d, eval, 9));
  EXPECT_EQ(s.memorized.rows(), 32u);
  EXPECT_EQ(s.clean.rows(), 32u);
  const double median = MedianNearestNeighborDistance(UniqueMemberPoints(d));
  for (std::size_t i = 0; i < s.memorized.rows(); ++i) {
    EXPECT_LT(std::sqrt(SquaredDistance(s.memorized.row(i), d.members[4].x0.data())),
              0.1 * median);
  }
  const auto row = s.clean.row(0);
  EXPECT_EQ(std::vector<float>(row.begin(), row.end()), d.nonmembers[0].x0.values());
  spec.duplicate.reset();
  ASSERT_OK_AND_ASSIGN(Dataset plain, GenerateDataset(spec, 3));
  EXPECT_FALSE(BuildMemorizationSets(plain, eval, 9).ok());
}

class ReportTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new fs::path(testing::TempDir("report"));
    ModelCache cache;
    ExperimentConfig base = Tiny(*root_ / "none");
    base.attacks = {base.attacks[0]};
    ASSERT_OK(RunExperiment(base, &cache).status());
    ExperimentConfig distill = Tiny(*root_ / "distillmd", Defense::kDistillMd);
    distill.attacks = {distill.attacks[0]};
    ASSERT_OK(RunExperiment(distill, &cache).status());
  }
  static void TearDownTestSuite() { delete root_; }
  static fs::path* root_;
};

fs::path* ReportTest::root_ = nullptr;

TEST_F(ReportTest, SingleManifestSingleRow) {
  ASSERT_OK_AND_ASSIGN(ComparisonTable t, BuildReport({*root_ / "none" / "manifest.json"}));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].defense, "none");
  EXPECT_EQ(t.rows[0].attack, "secmi");
  EXPECT_TRUE(t.rows[0].energy_distance.has_value());
}

TEST_F(ReportTest, TwoArmsShareHeader) {
  ASSERT_OK_AND_ASSIGN(ComparisonTable t,
                       BuildReport({*root_ / "none" / "manifest.json",
                                    *root_ / "distillmd" / "manifest.json"}));
  ASSERT_EQ(t.rows.size(), 2u);
  const std::string csv = t.ToCsv();
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_NE(header.find("auc"), std::string::npos);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
  const std::string md = t.ToMarkdown();
  EXPECT_NE(md.find("**"), std::string::npos);
  ASSERT_OK_AND_ASSIGN(ComparisonTable again,
                       BuildReport({*root_ / "none" / "manifest.json",
                                    *root_ / "distillmd" / "manifest.json"}));
  EXPECT_EQ(again.ToCsv(), csv);
}

TEST_F(ReportTest, RejectsBudgetMismatchAndFailedRuns) {
  const fs::path other = *root_ / "other";
  ExperimentConfig c = Tiny(other);
  c.attacks = {c.attacks[0]};
  c.train.iterations = 41;
  ASSERT_OK(RunExperiment(c).status());
  EXPECT_FALSE(BuildReport({*root_ / "none" / "manifest.json", other / "manifest.json"}).ok());

  const fs::path failed = *root_ / "failed";
  ExperimentConfig f = Tiny(failed);
  f.train.iterations = 0;
  ASSERT_FALSE(RunExperiment(f).ok());
  EXPECT_FALSE(BuildReport({failed / "manifest.json"}).ok());
  EXPECT_FALSE(BuildReport({}).ok());
}

}  // namespace
}  // namespace mdlab
