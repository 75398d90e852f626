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

#include "dptext/evaluate.h"

#include "dptext/pipeline.h"
#include "dptext/strings.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace dptext {
namespace {

using ::dptext::testing::FakeEmbedding;
using ::dptext::testing::FakePerplexity;
using ::dptext::testing::MakeAuthorWorld;

void Record(FixtureSidecar& f, const Corpus& c) {
  for (const auto& d : c.documents) {
    f.AddVector(d.text, FakeEmbedding(d.text));
    f.AddScore(d.text, FakePerplexity(d.text));
  }
}

Corpus MarkReconstructed(Corpus c) {
  for (auto& d : c.documents) d.extra["reconstructed"] = true;
  return c;
}

struct Setup {
  std::shared_ptr<const EmbeddingStore> store;
  EvalInputs inputs;
  FixtureSidecar fixture;
};

std::unique_ptr<Setup> MakeSetup(bool with_reconstruction) {
  auto setup = std::make_unique<Setup>();
  auto world = MakeAuthorWorld(3, 20, 12, 31);
  setup->store = world.store;
  auto split = SplitTrainTest(world.corpus, 0.3, 2);
  CmpMechanism mech(world.store);
  auto policy = BudgetPolicy::Create(1.0, BudgetMode::kBounded, 12);
  auto train = SanitizeCorpus(split->first, mech, *policy, {.seed = 4});
  auto test = SanitizeCorpus(split->second, mech, *policy, {.seed = 4});
  EvalInputs& in = setup->inputs;
  in.dataset = "synthetic";
  in.mechanism = "cmp";
  in.mode = "bounded";
  in.eps = 1.0;
  in.clean = {split->first, split->second};
  in.mldp = StageSplits{train->output, test->output};
  if (with_reconstruction) {
    in.reconstructed = StageSplits{MarkReconstructed(train->output),
                                   MarkReconstructed(test->output)};
  }
  in.classifier = {.epochs = 5};
  Record(setup->fixture, in.clean.test);
  Record(setup->fixture, in.mldp->test);
  in.embedder = &setup->fixture;
  in.scorer = &setup->fixture;
  return setup;
}

TEST(EvaluateTest, RowsMatchDirectComputation) {
  auto setup = MakeSetup(true);
  const EvalInputs& in = setup->inputs;
  auto report = Evaluate(in);
  ASSERT_TRUE(report.ok()) << report.status();
  ASSERT_EQ(report->rows.size(), 3u);
  const EvalRow& original = report->rows[0];
  const EvalRow& mldp = report->rows[1];
  EXPECT_EQ(original.stage, "original");
  EXPECT_EQ(mldp.stage, "mldp");
  EXPECT_EQ(report->rows[2].stage, "reconstructed");
  EXPECT_EQ(original.p_s, original.p_a);
  EXPECT_FALSE(original.ss.has_value());

  auto p_s = RunStaticAttack(in.clean.train, in.mldp->test, in.classifier);
  auto p_a = RunAdaptiveAttackOnPrepared(in.mldp->train, in.mldp->test, in.classifier);
  auto u_p = RunUtilityEval(in.mldp->train, in.mldp->test, in.classifier);
  EXPECT_DOUBLE_EQ(*mldp.p_s, p_s->micro_f1);
  EXPECT_DOUBLE_EQ(*mldp.p_a, p_a->micro_f1);
  EXPECT_DOUBLE_EQ(*mldp.util, u_p->mean);
  EXPECT_DOUBLE_EQ(*mldp.to_s, *mldp.util / *original.util - *mldp.p_s / *original.p_s);
  EXPECT_DOUBLE_EQ(*mldp.to_a, *mldp.util / *original.util - *mldp.p_a / *original.p_s);

  auto o = EmbedCorpus(in.clean.test, setup->fixture);
  auto p = EmbedCorpus(in.mldp->test, setup->fixture);
  EXPECT_DOUBLE_EQ(*mldp.ss, *SemanticSimilarity(*o, *p));
  EXPECT_DOUBLE_EQ(*mldp.in, *Indistinguishability(*o, *p));
  std::vector<std::string> texts;
  for (const auto& d : in.mldp->test.documents) texts.push_back(d.text);
  EXPECT_DOUBLE_EQ(*mldp.co, *MeanPerplexity(texts, setup->fixture));

  // Identical reconstruction: the same numbers and zero token shift.
  auto cells = [](const EvalRow& row) {
    const std::string line = EvalCsvLine(row);
    return line.substr(line.find(StrCat(",", row.stage, ",")) + row.stage.size() + 1);
  };
  EXPECT_EQ(cells(report->rows[2]), cells(mldp));
  ASSERT_TRUE(report->token_shift.has_value());
  EXPECT_EQ(report->token_shift->p95, 0.0);
}

TEST(EvaluateTest, OnlyMldpStage) {
  auto setup = MakeSetup(false);
  auto report = Evaluate(setup->inputs);
  ASSERT_TRUE(report.ok()) << report.status();
  ASSERT_EQ(report->rows.size(), 2u);
  EXPECT_TRUE(report->rows[1].to_s.has_value());
  EXPECT_FALSE(report->token_shift.has_value());
  EXPECT_EQ(report->ToJson()["token_shift"], nullptr);
}

TEST(EvaluateTest, MissingClientsLeaveColumnsEmpty) {
  auto setup = MakeSetup(false);
  setup->inputs.embedder = nullptr;
  setup->inputs.scorer = nullptr;
  auto report = Evaluate(setup->inputs);
  ASSERT_TRUE(report.ok());
  EXPECT_EQ(report->skipped, (std::vector<std::string>{"ss", "in", "co"}));
  const std::string line = EvalCsvLine(report->rows[1]);
  EXPECT_NE(line.find(",,"), std::string::npos);
  EXPECT_FALSE(report->rows[1].ss.has_value());
}

TEST(EvaluateTest, UnrecordedFixtureTextIsNotFound) {
  auto setup = MakeSetup(true);
  FixtureSidecar partial;
  Record(partial, setup->inputs.clean.test);
  setup->inputs.embedder = &partial;
  setup->inputs.scorer = &partial;
  EXPECT_EQ(Evaluate(setup->inputs).status().code(), absl::StatusCode::kNotFound);
}

TEST(EvaluateTest, RejectsMisalignedStages) {
  auto setup = MakeSetup(false);
  setup->inputs.mldp->test.documents.pop_back();
  EXPECT_FALSE(Evaluate(setup->inputs).ok());
}

TEST(EvalRowTest, CsvAndJsonRoundTrip) {
  EvalRow row{"yr", "cmp", "bounded", 1.0, "mldp", 93.2, 0.5, 0.75, 42.0,
              20.23, 73.5, 0.1, 0.76, 0.2};
  EXPECT_EQ(EvalCsvHeader(),
            "dataset,mechanism,mode,eps,stage,util,util_std,ss,co,p_s,p_a,in,to_s,to_a");
  EXPECT_EQ(EvalCsvLine(row),
            "yr,cmp,bounded,1,mldp,93.2000,0.5000,0.7500,42.0000,20.2300,73.5000,"
            "0.1000,0.7600,0.2000");
  auto parsed = EvalRow::FromJson(row.ToJson());
  ASSERT_TRUE(parsed.ok());
  EXPECT_EQ(EvalCsvLine(*parsed), EvalCsvLine(row));
  row.ss.reset();
  EXPECT_EQ(EvalCsvLine(*EvalRow::FromJson(row.ToJson())), EvalCsvLine(row));
}

}  // namespace
}  // namespace dptext
