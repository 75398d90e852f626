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

#include "dptext/rng.h"

#include <set>

#include "gtest/gtest.h"

namespace dptext {
namespace {

TEST(PhiloxTest, MatchesPublishedZeroVector) {
  Philox4x32 rng(0, 0);
  EXPECT_EQ(rng(), 0x6627e8d5u);
  EXPECT_EQ(rng(), 0xe169c58du);
  EXPECT_EQ(rng(), 0xbc57ac4cu);
  EXPECT_EQ(rng(), 0x9b00dbd8u);
}

TEST(PhiloxTest, StreamsAreDistinct) {
  Philox4x32 a(7, 0), b(7, 1);
  int same = 0;
  for (int i = 0; i < 64; ++i) same += a() == b();
  EXPECT_LT(same, 2);
}

TEST(PhiloxTest, NextDoubleInUnitInterval) {
  Rng rng = NamedRng(1, "unit");
  double sum = 0;
  for (int i = 0; i < 100000; ++i) {
    double u = rng.NextDouble();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 0.01);
}

TEST(PhiloxTest, NextIndexCoversRangeUniformly) {
  Rng rng = NamedRng(2, "index");
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) counts[rng.NextIndex(7)]++;
  for (int c : counts) EXPECT_NEAR(c, 10000, 500);
}

TEST(TokenRngTest, DependsOnEveryInput) {
  auto first = [](Rng r) { return r(); };
  const uint32_t base = first(TokenRng(1, "doc", 0));
  EXPECT_EQ(base, first(TokenRng(1, "doc", 0)));
  std::set<uint32_t> variants = {base, first(TokenRng(2, "doc", 0)),
                                 first(TokenRng(1, "doc2", 0)),
                                 first(TokenRng(1, "doc", 1))};
  EXPECT_EQ(variants.size(), 4u);
}

TEST(NamedRngTest, PurposeSeparatesStreams) {
  EXPECT_NE(NamedRng(5, "split")(), NamedRng(5, "classifier/epoch")());
  EXPECT_EQ(NamedRng(5, "split", 3)(), NamedRng(5, "split", 3)());
}

TEST(HashTest, FnvKnownValues) {
  EXPECT_EQ(Fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(Fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

}  // namespace
}  // namespace dptext
