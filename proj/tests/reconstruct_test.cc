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

#include "dptext/reconstruct.h"

#include <mutex>
#include <set>

#include "dptext/strings.h"
#include "gtest/gtest.h"
#include "test_support.h"

namespace dptext {
namespace {

using ::dptext::testing::DataPath;
using ::dptext::testing::TempDir;

std::vector<FewShotPair> GoldenPairs() {
  return {{"p1", "teh fod was gret .", "the food was great ."},
          {"p2", "i lov thsi plce !", "i love this place !"},
          {"p3", "servise slow , prices hihg", "service slow , prices high"}};
}

TEST(PromptTest, MatchesGolden) {
  auto expected = ReadFile(DataPath("prompt_golden.txt"));
  ASSERT_TRUE(expected.ok());
  auto prompt = BuildPrompt(GoldenPairs(), "waiter brougt colds soup");
  ASSERT_TRUE(prompt.ok()) << prompt.status();
  EXPECT_EQ(*prompt, *expected);
}

TEST(PromptTest, RequiresExactPairCount) {
  EXPECT_EQ(BuildPrompt({}, "x").status().code(),
            absl::StatusCode::kInvalidArgument);
  auto two = GoldenPairs();
  two.pop_back();
  EXPECT_FALSE(BuildPrompt(two, "x").ok());
  EXPECT_TRUE(BuildPrompt(two, "x", 2).ok());
}

TEST(ParseTest, TakesTextAfterLastMarker) {
  EXPECT_EQ(*ParseCleanText("Output:::\nClean Text: hello world \n"), "hello world");
  EXPECT_EQ(*ParseCleanText("Clean Text: a\nClean Text:  b  "), "b");
  EXPECT_EQ(*ParseCleanText("Clean Text:"), "");
  EXPECT_FALSE(ParseCleanText("no marker here").ok());
  EXPECT_FALSE(ParseCleanText("clean text: lowercase marker").ok());
}

TEST(ParseTest, GeneratedAdversarialResponses) {
  const std::vector<std::string> junk = {
      "Sure! Here is the cleaned text.\n", "Output:::\n", "Clean Text: decoy\n",
      "noisy_text: x y z\n\n", "Clean Text:\n\n", "   \t", "Output:::Clean Text:"};
  const std::vector<std::string> bodies = {
      "the food was great .", "Clean-ish text, with: colons", "multi\nline\nbody",
      "unicode caf\xc3\xa9 na\xc3\xafve", "Output::: inside body"};
  Rng rng = NamedRng(1, "parse");
  for (int i = 0; i < 100; ++i) {
    std::string raw;
    const size_t n_junk = rng.NextIndex(4);
    for (size_t j = 0; j < n_junk; ++j) raw += junk[rng.NextIndex(junk.size())];
    const std::string& body = bodies[rng.NextIndex(bodies.size())];
    const std::string pad_before[] = {"", " ", "\n", "  \n\t"};
    const std::string pad_after[] = {"", "\n", "   ", "\n\n"};
    raw += "Clean Text:" + pad_before[rng.NextIndex(4)] + body +
           pad_after[rng.NextIndex(4)];
    auto parsed = ParseCleanText(raw);
    ASSERT_TRUE(parsed.ok()) << raw;
    EXPECT_EQ(*parsed, body) << raw;
  }
}

TEST(FewShotPairsTest, BuildSaveLoad) {
  TempDir dir;
  Corpus originals, sanitized;
  originals.documents.push_back(MakeDocument("h1", "a", std::nullopt, "the food"));
  originals.documents.push_back(MakeDocument("h2", "a", std::nullopt, "was good"));
  sanitized.documents.push_back(MakeDocument("h2", "a", std::nullopt, "is fine"));
  sanitized.documents.push_back(MakeDocument("h1", "a", std::nullopt, "a meal"));
  auto pairs = MakeFewShotPairs(originals, sanitized);
  ASSERT_TRUE(pairs.ok()) << pairs.status();
  ASSERT_EQ(pairs->size(), 2u);
  EXPECT_EQ((*pairs)[0].doc_id, "h1");
  EXPECT_EQ((*pairs)[0].noisy, "a meal");
  EXPECT_EQ((*pairs)[0].clean, "the food");
  ASSERT_TRUE(SaveFewShotPairs(*pairs, dir / "pairs.jsonl").ok());
  auto loaded = LoadFewShotPairs(dir / "pairs.jsonl");
  ASSERT_TRUE(loaded.ok());
  EXPECT_EQ((*loaded)[1].noisy, "is fine");
  sanitized.documents.pop_back();
  EXPECT_FALSE(MakeFewShotPairs(originals, sanitized).ok());
}

TEST(EndpointConfigTest, ParsesAndRejectsSecrets) {
  auto cfg = EndpointConfig::FromJson(
      {{"base_url", "http://localhost:1/v1"}, {"model", "m"}, {"max_retries", 2}});
  ASSERT_TRUE(cfg.ok()) << cfg.status();
  EXPECT_EQ(cfg->max_retries, 2);
  EXPECT_EQ(EndpointConfig::FromJson(cfg->ToJson())->ToJson(), cfg->ToJson());
  EXPECT_FALSE(EndpointConfig::FromJson(
                   {{"base_url", "http://x"}, {"model", "m"}, {"api_key", "sk-123"}})
                   .ok());
  EXPECT_FALSE(EndpointConfig::FromJson({{"base_url", "ftp://x"}, {"model", "m"}}).ok());
  EXPECT_FALSE(EndpointConfig::FromJson({{"base_url", "http://x"}, {"model", ""}}).ok());
  EXPECT_FALSE(EndpointConfig::FromJson({{"base_url", "http://x"}, {"model", "m"},
                                         {"max_retries", -1}})
                   .ok());
}

// Answers from a table keyed by request id.
class ScriptedClient : public ChatClient {
 public:
  std::map<std::string, absl::StatusOr<std::string>> script;
  std::mutex mutex;
  std::vector<std::string> prompts;

  absl::StatusOr<std::string> Complete(std::string_view request_id,
                                       const std::string& prompt) override {
    std::lock_guard lock(mutex);
    prompts.push_back(prompt);
    auto it = script.find(std::string(request_id));
    if (it == script.end()) return std::string("Clean Text: fixed ") + std::string(request_id);
    return it->second;
  }
};

Corpus SanitizedCorpus(int n) {
  Corpus c;
  for (int i = 0; i < n; ++i) {
    Document d = MakeDocument(StrCat("s", i), "a", "l", StrCat("noisy words ", i));
    d.extra["sanitized"] = true;
    c.documents.push_back(d);
  }
  return c;
}

TEST(ReconstructCorpusTest, PartialFailureKeepsSanitizedText) {
  ScriptedClient client;
  client.script.emplace("s1", absl::UnavailableError("gave up"));
  client.script.emplace("s2", std::string("no marker"));
  Corpus input = SanitizedCorpus(4);
  auto run = ReconstructCorpus(input, GoldenPairs(), client, {.concurrency = 3});
  ASSERT_TRUE(run.ok()) << run.status();
  EXPECT_EQ(run->failures, 2u);
  const auto& docs = run->output.documents;
  ASSERT_EQ(docs.size(), 4u);
  EXPECT_EQ(docs[0].text, "fixed s0");
  EXPECT_TRUE(docs[0].extra["reconstructed"].get<bool>());
  EXPECT_EQ(docs[1].text, input.documents[1].text);
  EXPECT_TRUE(docs[1].extra["reconstruction_failed"].get<bool>());
  EXPECT_TRUE(docs[2].extra.contains("reconstruction_error"));
  EXPECT_EQ(docs[3].text, "fixed s3");
  EXPECT_EQ(docs[3].label, "l");
}

TEST(ReconstructCorpusTest, FatalErrorAborts) {
  ScriptedClient client;
  client.script.emplace("s2", absl::UnauthenticatedError("401"));
  auto run = ReconstructCorpus(SanitizedCorpus(5), GoldenPairs(), client);
  EXPECT_EQ(run.status().code(), absl::StatusCode::kUnauthenticated);
}

TEST(ReconstructCorpusTest, RejectsPairLeakAndMissingPairs) {
  ScriptedClient client;
  auto pairs = GoldenPairs();
  pairs[0].doc_id = "s0";
  EXPECT_FALSE(ReconstructCorpus(SanitizedCorpus(2), pairs, client).ok());
  EXPECT_FALSE(ReconstructCorpus(SanitizedCorpus(2), {}, client).ok());
  EXPECT_TRUE(client.prompts.empty());
}

TEST(ReconstructCorpusTest, PromptsCarryTargetText) {
  ScriptedClient client;
  auto run = ReconstructCorpus(SanitizedCorpus(1), GoldenPairs(), client);
  ASSERT_TRUE(run.ok());
  ASSERT_EQ(client.prompts.size(), 1u);
  EXPECT_EQ(client.prompts[0], *BuildPrompt(GoldenPairs(), "noisy words 0"));
}

}  // namespace
}  // namespace dptext
