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

#include "dptext/metrics.h"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "Eigen/QR"
#include "dptext/rng.h"
#include "dptext/strings.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace dptext {
namespace {

using ::dptext::testing::DataPath;
using ::dptext::testing::TempDir;

EmbeddingSet RandomSet(size_t n, size_t dim, uint64_t seed) {
  Rng rng = NamedRng(seed, "test/set");
  std::normal_distribution<double> normal(0.0, 1.0);
  EmbeddingSet set;
  set.vectors.resize(n, dim);
  for (size_t i = 0; i < n; ++i) {
    set.doc_ids.push_back(StrCat("d", i));
    for (size_t j = 0; j < dim; ++j) set.vectors(i, j) = normal(rng);
  }
  return set;
}

double Cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) / (a.norm() * b.norm());
}

// Rank by sorting every candidate, descending cosine, earlier row on ties.
std::vector<size_t> BruteForceRanks(const EmbeddingSet& o, const EmbeddingSet& p) {
  std::vector<size_t> ranks;
  const size_t n = o.size();
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, size_t>> order;
    for (size_t j = 0; j < n; ++j) {
      order.emplace_back(Cosine(o.vectors.row(i), p.vectors.row(j)), j);
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
      return a.first > b.first;
    });
    for (size_t r = 0; r < n; ++r) {
      if (order[r].second == i) ranks.push_back(r + 1);
    }
  }
  return ranks;
}

TEST(SemanticSimilarityTest, MeanCosine) {
  EmbeddingSet a = RandomSet(30, 6, 1), b = RandomSet(30, 6, 2);
  double expected = 0;
  for (size_t i = 0; i < 30; ++i) {
    expected += Cosine(a.vectors.row(i), b.vectors.row(i));
  }
  EXPECT_NEAR(*SemanticSimilarity(a, b), expected / 30, 1e-12);
  EXPECT_NEAR(*SemanticSimilarity(a, a), 1.0, 1e-12);
  b.doc_ids[3] = "other";
  EXPECT_FALSE(SemanticSimilarity(a, b).ok());
}

TEST(IndistinguishabilityTest, MatchesBruteForceOracle) {
  for (uint64_t s = 0; s < 10; ++s) {
    EmbeddingSet o = RandomSet(60, 5, 100 + s);
    EmbeddingSet p = RandomSet(60, 5, 200 + s);
    p.vectors = 0.6 * o.vectors + 0.8 * p.vectors;
    auto ranks = CounterpartRanks(o, p);
    ASSERT_TRUE(ranks.ok());
    EXPECT_EQ(*ranks, BruteForceRanks(o, p));
    double expected = 0;
    for (size_t k : *ranks) expected += double(k - 1) / 59.0;
    EXPECT_DOUBLE_EQ(*Indistinguishability(o, p), expected / 60);
  }
}

TEST(IndistinguishabilityTest, IdentityScoresZero) {
  EmbeddingSet o = RandomSet(40, 8, 3);
  EXPECT_EQ(*Indistinguishability(o, o), 0.0);
}

TEST(IndistinguishabilityTest, TiesGoToEarlierRow) {
  EmbeddingSet o = RandomSet(3, 2, 1);
  EmbeddingSet p = o;
  p.vectors.row(0) = Eigen::RowVector2d(1, 0);
  p.vectors.row(1) = Eigen::RowVector2d(1, 0);
  p.vectors.row(2) = Eigen::RowVector2d(1, 0);
  auto ranks = CounterpartRanks(o, p);
  EXPECT_EQ(*ranks, (std::vector<size_t>{1, 2, 3}));
  EXPECT_EQ(*Indistinguishability(o, p), 0.5);
}

TEST(IndistinguishabilityTest, InvariantUnderRotationAndScaling) {
  EmbeddingSet o = RandomSet(50, 4, 5), p = RandomSet(50, 4, 6);
  Eigen::MatrixXd q = Eigen::MatrixXd(RandomSet(4, 4, 7).vectors).householderQr().householderQ();
  EmbeddingSet o2 = o, p2 = p;
  o2.vectors = o.vectors * q * 3.0;
  p2.vectors = p.vectors * q;
  EXPECT_EQ(*CounterpartRanks(o, p), *CounterpartRanks(o2, p2));
  EXPECT_NEAR(*SemanticSimilarity(o, p), *SemanticSimilarity(o2, p2), 1e-12);
}

TEST(IndistinguishabilityTest, NeedsTwoDocuments) {
  EXPECT_FALSE(Indistinguishability(RandomSet(1, 3, 1), RandomSet(1, 3, 2)).ok());
}

TEST(EmbeddingSetTest, CsvRoundTrip) {
  TempDir dir;
  EmbeddingSet set = RandomSet(5, 3, 9);
  ASSERT_TRUE(set.Save(dir / "e.csv").ok());
  auto loaded = EmbeddingSet::Load(dir / "e.csv");
  ASSERT_TRUE(loaded.ok()) << loaded.status();
  EXPECT_EQ(loaded->doc_ids, set.doc_ids);
  EXPECT_EQ(loaded->vectors, set.vectors);
  EXPECT_FALSE(EmbeddingSet::FromCsv("doc_id,e0\nx,notanumber\n").ok());
}

TEST(QuantileTest, MatchesLinearInterpolation) {
  const std::vector<double> v = {1, 2, 3, 4, 10};
  EXPECT_DOUBLE_EQ(Quantile(v, 0.05), 1.2);
  EXPECT_DOUBLE_EQ(Quantile(v, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(Quantile(v, 0.5), 3.0);
  EXPECT_DOUBLE_EQ(Quantile(v, 0.95), 8.8);
  EXPECT_DOUBLE_EQ(Quantile({7}, 0.3), 7.0);
}

TEST(TokenShiftTest, SummaryAndOutliers) {
  auto s = SummarizeShifts({"a", "b", "c", "d", "e"}, {1, 2, 3, 4, 10});
  ASSERT_TRUE(s.ok());
  EXPECT_EQ(s->n, 5u);
  EXPECT_DOUBLE_EQ(s->lower_fence, -1.0);
  EXPECT_DOUBLE_EQ(s->upper_fence, 7.0);
  ASSERT_EQ(s->outliers.size(), 1u);
  EXPECT_EQ(s->outliers[0].first, "e");
  EXPECT_DOUBLE_EQ(s->mean, 2.5);
  EXPECT_DOUBLE_EQ(s->p95, 8.8);
}

TEST(TokenShiftTest, FromCorpora) {
  Corpus p, r;
  p.documents.push_back(MakeDocument("x", "a", std::nullopt, "one two three"));
  p.documents.push_back(MakeDocument("y", "a", std::nullopt, "one two"));
  r.documents.push_back(MakeDocument("x", "a", std::nullopt, "one two three four"));
  r.documents.push_back(MakeDocument("y", "a", std::nullopt, "one"));
  auto s = TokenShift(p, r);
  ASSERT_TRUE(s.ok());
  EXPECT_DOUBLE_EQ(s->mean, 0.0);
  EXPECT_DOUBLE_EQ(s->p50, 0.0);
  r.documents.pop_back();
  EXPECT_FALSE(TokenShift(p, r).ok());
}

TEST(TradeoffTest, PublishedAnchors) {
  EXPECT_NEAR(*Tradeoff({.u_o = 71.83, .u_p = 63.4, .p_o = 23.94, .p_p = 23.9}), -0.12, 0.005);
  EXPECT_NEAR(*Tradeoff({.u_o = 95.68, .u_p = 93.2, .p_o = 95.03, .p_p = 43.24}), 0.52, 0.005);
}

TEST(TradeoffTest, ReproducesPublishedTables) {
  std::ifstream in(DataPath("tradeoff_reference.csv"));
  std::string line;
  std::getline(in, line);
  int matched = 0, total = 0;
  while (std::getline(in, line)) {
    auto f = Split(line, ',');
    ASSERT_EQ(f.size(), 8u);
    double u_p, u_o, p_p, p_o, to;
    ParseNumber(f[3], &u_p);
    ParseNumber(f[4], &u_o);
    ParseNumber(f[5], &p_p);
    ParseNumber(f[6], &p_o);
    ParseNumber(f[7], &to);
    ++total;
    matched += std::abs(*Tradeoff({u_o, u_p, p_o, p_p, 0.0}) - to) <= 0.015;
  }
  EXPECT_EQ(total, 72);
  EXPECT_GE(matched, 20);
}

TEST(TradeoffTest, MajorityAdjustmentAndMonotonicity) {
  TradeoffInputs base{.u_o = 80, .u_p = 70, .p_o = 60, .p_p = 30, .u_mg = 20};
  EXPECT_NEAR(*Tradeoff(base), 50.0 / 60.0 - 0.5, 1e-12);
  auto better_utility = base;
  better_utility.u_p = 75;
  EXPECT_GT(*Tradeoff(better_utility), *Tradeoff(base));
  auto stronger_attack = base;
  stronger_attack.p_p = 40;
  EXPECT_LT(*Tradeoff(stronger_attack), *Tradeoff(base));
  EXPECT_FALSE(Tradeoff({.u_o = 20, .u_p = 10, .p_o = 5, .p_p = 1, .u_mg = 20}).ok());
  EXPECT_FALSE(Tradeoff({.u_o = 20, .u_p = 10, .p_o = 0, .p_p = 1}).ok());
}

class ConstantScorer : public PerplexityScorer {
 public:
  absl::StatusOr<std::vector<double>> Score(const std::vector<std::string>& t) override {
    std::vector<double> out;
    for (const auto& s : t) out.push_back(static_cast<double>(s.size()));
    return out;
  }
};

TEST(PerplexityTest, MeanOfScores) {
  ConstantScorer scorer;
  EXPECT_DOUBLE_EQ(*MeanPerplexity({"ab", "abcd"}, scorer), 3.0);
  EXPECT_FALSE(MeanPerplexity({}, scorer).ok());
}

TEST(ProjectionTest, PcaAlignsWithDominantAxis) {
  EmbeddingSet set = RandomSet(200, 3, 11);
  set.vectors.col(1) *= 10.0;
  auto xy = ProjectTo2d(set);
  ASSERT_TRUE(xy.ok()) << xy.status();
  ASSERT_EQ(xy->rows(), 200);
  ASSERT_EQ(xy->cols(), 2);
  Eigen::VectorXd centered = set.vectors.col(1).array() - set.vectors.col(1).mean();
  const double corr = std::abs(Cosine(xy->col(0), centered));
  EXPECT_GT(corr, 0.99);
  EXPECT_NEAR(xy->col(0).mean(), 0.0, 1e-9);
  const std::string csv = ProjectionCsv(set, *xy, std::vector<std::string>(200, "a"), "clean");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "doc_id,author,stage,x,y");
  auto again = ProjectTo2d(set);
  EXPECT_EQ(*again, *xy);
}

}  // namespace
}  // namespace dptext
