//
// Copyright 2026 The dptext Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "dptext/attack.h"

#include <cmath>

#include "dptext/pipeline.h"
#include "dptext/strings.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace dptext {
namespace {

using ::dptext::testing::MakeAuthorWorld;

// Releases every word unchanged; isolates the attack plumbing.
class IdentityMechanism : public WordMechanism {
 public:
  MechanismId id() const override { return MechanismId::kCmp; }
  absl::StatusOr<SanitizeResult> Sanitize(std::string_view word, double,
                                          Rng&) const override {
    return SanitizeResult{std::string(word), false, true};
  }
};

struct Fixture {
  testing::AuthorWorld world;
  Corpus train, test;
};

Fixture MakeFixture() {
  Fixture f{MakeAuthorWorld(3, 60, 15, 21), {}, {}};
  auto split = SplitTrainTest(f.world.corpus, 0.3, 5);
  f.train = split->first;
  f.test = split->second;
  return f;
}

TEST(StageTest, ReadsFlags) {
  Corpus c;
  c.documents.push_back(MakeDocument("x", "a", std::nullopt, "t"));
  EXPECT_EQ(*CorpusStage(c), Stage::kClean);
  c.documents[0].extra["sanitized"] = true;
  EXPECT_EQ(*CorpusStage(c), Stage::kSanitized);
  c.documents[0].extra["reconstructed"] = true;
  EXPECT_EQ(*CorpusStage(c), Stage::kReconstructed);
  c.documents.push_back(MakeDocument("y", "a", std::nullopt, "t"));
  EXPECT_FALSE(CorpusStage(c).ok());
}

TEST(AttackTest, StaticDropsAdaptiveRecovers) {
  Fixture f = MakeFixture();
  CmpMechanism mech(f.world.store);
  auto policy = BudgetPolicy::Create(1.0, BudgetMode::kBounded,
                                     *DatasetAvgWords(f.world.corpus));
  auto clean = RunStaticAttack(f.train, f.test, {});
  ASSERT_TRUE(clean.ok()) << clean.status();
  EXPECT_GE(clean->micro_f1, 95.0);

  auto sanitized = SanitizeCorpus(f.test, mech, *policy, {.seed = 1});
  ASSERT_TRUE(sanitized.ok());
  auto stat = RunStaticAttack(f.train, sanitized->output, {});
  auto adaptive = RunAdaptiveAttack(f.train, sanitized->output, mech, *policy, 1, {});
  ASSERT_TRUE(stat.ok() && adaptive.ok()) << adaptive.status();
  EXPECT_EQ(stat->test_stage, Stage::kSanitized);
  EXPECT_EQ(adaptive->train_stage, Stage::kSanitized);
  EXPECT_GE(clean->micro_f1 - stat->micro_f1, 30.0);
  EXPECT_GE(adaptive->micro_f1, stat->micro_f1 - 2.0);
}

TEST(AttackTest, IdentityMechanismLeavesAttackUnchanged) {
  Fixture f = MakeFixture();
  IdentityMechanism identity;
  auto policy = BudgetPolicy::Create(1.0, BudgetMode::kUnbounded, 1.0);
  auto released = SanitizeCorpus(f.test, identity, *policy, {});
  ASSERT_TRUE(released.ok());
  auto clean = RunStaticAttack(f.train, f.test, {});
  auto stat = RunStaticAttack(f.train, released->output, {});
  auto adaptive = RunAdaptiveAttack(f.train, released->output, identity, *policy, 0, {});
  ASSERT_TRUE(clean.ok() && stat.ok() && adaptive.ok());
  EXPECT_DOUBLE_EQ(stat->micro_f1, clean->micro_f1);
  EXPECT_DOUBLE_EQ(adaptive->micro_f1, clean->micro_f1);
}

TEST(AttackTest, ReportMatchesDirectRecomputation) {
  Fixture f = MakeFixture();
  const ClassifierConfig cfg{.epochs = 5};
  auto report = RunStaticAttack(f.train, f.test, cfg);
  auto model = TextClassifier::TrainOnCorpus(f.train, LabelTarget::kAuthor, cfg);
  ASSERT_TRUE(report.ok() && model.ok());
  auto truth = TargetLabels(f.test, LabelTarget::kAuthor);
  EXPECT_DOUBLE_EQ(report->micro_f1, *MicroF1(model->PredictCorpus(f.test), *truth));
  EXPECT_EQ(report->n_train, f.train.size());
  EXPECT_EQ(report->n_test, f.test.size());
  EXPECT_EQ(report->ToJson()["mode"], "static");
}

TEST(AttackTest, StagePreconditions) {
  Fixture f = MakeFixture();
  CmpMechanism mech(f.world.store);
  auto policy = BudgetPolicy::Create(1.0, BudgetMode::kUnbounded, 1.0);
  // Adaptive attacks need a transformed test split.
  EXPECT_FALSE(RunAdaptiveAttack(f.train, f.test, mech, *policy, 0, {}).ok());
  EXPECT_FALSE(RunAdaptiveAttackOnPrepared(f.train, f.test, {}).ok());
  auto sanitized = SanitizeCorpus(f.test, mech, *policy, {});
  EXPECT_FALSE(RunStaticAttack(sanitized->output, f.test, {}).ok());
  // Unknown authors at test time are a setup error.
  Corpus stranger = f.test;
  for (auto& d : stranger.documents) d.author_id = "nobody";
  EXPECT_EQ(RunStaticAttack(f.train, stranger, {}).status().code(),
            absl::StatusCode::kFailedPrecondition);
}

TEST(UtilityTest, MeanAndPopulationStd) {
  Corpus train, test;
  for (int i = 0; i < 60; ++i) {
    const bool pos = i % 2 == 0;
    Document d = MakeDocument(StrCat("d", i), "a", pos ? "pos" : "neg",
                              pos ? "great lovely tasty fine" : "awful cold bland rude");
    (i < 40 ? train : test).documents.push_back(d);
  }
  auto result = RunUtilityEval(train, test, {.epochs = 3}, 3);
  ASSERT_TRUE(result.ok()) << result.status();
  ASSERT_EQ(result->runs.size(), 3u);
  double mean = (result->runs[0] + result->runs[1] + result->runs[2]) / 3;
  double var = 0;
  for (double r : result->runs) var += (r - mean) * (r - mean);
  EXPECT_DOUBLE_EQ(result->mean, mean);
  EXPECT_NEAR(result->std, std::sqrt(var / 3), 1e-12);
  EXPECT_DOUBLE_EQ(result->mean, 100.0);
  for (int r = 0; r < 3; ++r) {
    auto model = TextClassifier::TrainOnCorpus(
        train, LabelTarget::kLabel, {.epochs = 3, .seed = static_cast<uint64_t>(r)});
    EXPECT_DOUBLE_EQ(result->runs[r],
                     *MicroF1(model->PredictCorpus(test), *TargetLabels(test, LabelTarget::kLabel)));
  }
}

}  // namespace
}  // namespace dptext
