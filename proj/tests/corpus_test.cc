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

#include "dptext/corpus.h"

#include <fstream>
#include <map>

#include "gtest/gtest.h"
#include "json.hpp"
#include "test_support.h"

namespace dptext {
namespace {

using ::dptext::testing::DataPath;
using ::dptext::testing::TempDir;

TEST(TokenizerTest, MatchesTreebankReference) {
  std::ifstream in(DataPath("tokenizer_conformance.jsonl"));
  ASSERT_TRUE(in.good());
  std::string line;
  size_t cases = 0, agree = 0;
  while (std::getline(in, line)) {
    auto row = nlohmann::json::parse(line);
    const auto expected = row["tokens"].get<std::vector<std::string>>();
    const auto got = Surfaces(Tokenize(row["text"].get<std::string>()));
    ++cases;
    if (got == expected) {
      ++agree;
    } else {
      ADD_FAILURE() << row["text"] << "\n got: " << nlohmann::json(got).dump()
                    << "\nwant: " << row["tokens"].dump();
    }
  }
  EXPECT_EQ(cases, 500u);
  EXPECT_EQ(agree, cases);
}

TEST(TokenizerTest, ClassifiesKinds) {
  EXPECT_EQ(ClassifyToken("word"), TokenKind::kWord);
  EXPECT_EQ(ClassifyToken("n't"), TokenKind::kWord);
  EXPECT_EQ(ClassifyToken(","), TokenKind::kPunctuation);
  EXPECT_EQ(ClassifyToken("3.5"), TokenKind::kNumeric);
  EXPECT_EQ(ClassifyToken("1,000"), TokenKind::kNumeric);
}

TEST(TokenizerTest, RoundTripIsStable) {
  for (const char* text :
       {"I don't like it, really!", "Prices: $5 (or 10%) & more...",
        "x-ray at 3.5 o'clock; fine", "  spaced   out \t text \n"}) {
    auto tokens = Tokenize(text);
    EXPECT_EQ(Tokenize(Detokenize(tokens)), tokens) << text;
  }
}

TEST(TokenizerTest, EmptyInput) {
  EXPECT_TRUE(Tokenize("").empty());
  EXPECT_TRUE(Tokenize("   \n").empty());
  EXPECT_EQ(Detokenize(std::vector<Token>{}), "");
}

TEST(CorpusIoTest, SaveLoadRoundTrip) {
  TempDir dir;
  Corpus corpus;
  corpus.name = "c";
  corpus.documents.push_back(MakeDocument("d1", "a1", "pos", "Hello there, world."));
  corpus.documents.push_back(MakeDocument("d2", "a2", std::nullopt, "Bye."));
  corpus.documents[1].extra["sanitized"] = true;
  ASSERT_TRUE(SaveCorpus(corpus, dir / "c.jsonl").ok());
  auto loaded = LoadCorpus(dir / "c.jsonl");
  ASSERT_TRUE(loaded.ok()) << loaded.status();
  EXPECT_EQ(loaded->documents, corpus.documents);
}

TEST(CorpusIoTest, TokensFieldOverridesText) {
  auto corpus = ParseCorpus(
      R"({"id":"x","author":"a","text":"a b","tokens":["a","b","c"]})", "t");
  ASSERT_TRUE(corpus.ok()) << corpus.status();
  EXPECT_EQ(corpus->documents[0].tokens.size(), 3u);
}

TEST(CorpusIoTest, MalformedLinesReported) {
  LoadReport report;
  auto corpus = ParseCorpus(
      "{\"id\":\"x\",\"author\":\"a\",\"text\":\"ok\"}\n"
      "not json\n"
      "{\"id\":\"y\",\"text\":\"missing author\"}\n"
      "{\"id\":\"z\",\"author\":\"a\",\"text\":\"fine\"}\n",
      "t", &report);
  ASSERT_TRUE(corpus.ok());
  EXPECT_EQ(corpus->size(), 2u);
  ASSERT_EQ(report.errors.size(), 2u);
  EXPECT_EQ(report.errors[0].line, 2u);
  EXPECT_EQ(report.errors[1].line, 3u);
}

TEST(CorpusIoTest, DuplicateIdsAndEmptyRejected) {
  EXPECT_FALSE(ParseCorpus("{\"id\":\"x\",\"author\":\"a\",\"text\":\"1\"}\n"
                           "{\"id\":\"x\",\"author\":\"a\",\"text\":\"2\"}\n",
                           "t")
                   .ok());
  EXPECT_FALSE(ParseCorpus("", "t").ok());
  EXPECT_EQ(LoadCorpus("/nonexistent/file.jsonl").status().code(),
            absl::StatusCode::kNotFound);
}

Corpus AuthorsCorpus(const std::map<std::string, int>& per_author) {
  Corpus c;
  for (const auto& [author, n] : per_author) {
    for (int i = 0; i < n; ++i) {
      c.documents.push_back(MakeDocument(author + std::to_string(i), author,
                                         std::nullopt, "text"));
    }
  }
  return c;
}

TEST(SplitTest, StratifiedAndDeterministic) {
  Corpus c = AuthorsCorpus({{"a", 20}, {"b", 10}, {"c", 30}});
  auto split = SplitTrainTest(c, 0.2, 9);
  ASSERT_TRUE(split.ok());
  auto& [train, test] = *split;
  EXPECT_EQ(train.size() + test.size(), 60u);
  EXPECT_EQ(test.size(), 12u);
  std::map<std::string, int> test_counts;
  for (const auto& d : test.documents) test_counts[d.author_id]++;
  EXPECT_EQ(test_counts["a"], 4);
  EXPECT_EQ(test_counts["b"], 2);
  EXPECT_EQ(test_counts["c"], 6);
  auto again = SplitTrainTest(c, 0.2, 9);
  EXPECT_EQ(Ids(again->second), Ids(test));
  auto other = SplitTrainTest(c, 0.2, 10);
  EXPECT_NE(Ids(other->second), Ids(test));
}

TEST(SplitTest, RejectsBadFraction) {
  Corpus c = AuthorsCorpus({{"a", 4}});
  EXPECT_FALSE(SplitTrainTest(c, 0.0, 1).ok());
  EXPECT_FALSE(SplitTrainTest(c, 1.0, 1).ok());
}

TEST(HoldoutTest, TakesLeadingDocuments) {
  Corpus c = AuthorsCorpus({{"a", 5}});
  auto h = HoldoutFewShot(c, 3);
  ASSERT_TRUE(h.ok());
  EXPECT_EQ(h->held.size(), 3u);
  EXPECT_EQ(h->rest.size(), 2u);
  EXPECT_EQ(h->held[0].id, "a0");
  EXPECT_FALSE(HoldoutFewShot(c, 6).ok());
}

}  // namespace
}  // namespace dptext
