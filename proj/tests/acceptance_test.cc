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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
// fails. Slow by design (about a million samples per mechanism check).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "dptext/attack.h"
#include "dptext/budget.h"
#include "dptext/cli.h"
#include "dptext/corpus.h"
#include "dptext/mechanisms.h"
#include "dptext/metrics.h"
#include "dptext/pipeline.h"
#include "dptext/reconstruct.h"
#include "dptext/rng.h"
#include "dptext/strings.h"
#include "json.hpp"
#include "test_support.h"

namespace dptext {
namespace {

namespace fs = std::filesystem;
using ::dptext::testing::CountViolations;
using ::dptext::testing::DataPath;
using ::dptext::testing::SampleOutputs;
using ::dptext::testing::ToyStore;

// Outcome of one criterion. `detail` says what was measured.
struct Verdict {
  bool pass = true;
  std::string detail;

  void Require(bool ok, const std::string& why) {
    if (!ok && pass) {
      pass = false;
      detail = why;
    }
  }
};

Verdict BudgetReproduction() {
  struct Cell {
    double avg_words, base_eps;
    int64_t expected;
  };
  // Every distinct document budget the published table lists.
  const Cell cells[] = {
      {208.62, 1, 208},   {208.62, 2, 417},   {208.62, 3, 625},
      {304.92, 1, 304},   {304.92, 2, 609},   {304.92, 3, 914},
      {77.06, 1, 77},     {77.06, 2, 154},    {77.06, 3, 231},
      {208.62, 10, 2086}, {208.62, 20, 4172}, {304.92, 10, 3049},
      {304.92, 20, 6098}, {77.06, 10, 770},   {77.06, 20, 1541},
      {208.62, 0.1, 20},  {304.92, 0.1, 30},  {77.06, 0.1, 7},
  };
  Verdict v;
  for (const Cell& c : cells) {
    const int64_t got = DocBudget(c.base_eps, c.avg_words);
    v.Require(got == c.expected, StrCat("eps ", c.base_eps, " avg ", c.avg_words, ": got ",
                                        got, ", want ", c.expected));
  }
  if (v.pass) v.detail = StrCat(std::size(cells), "/", std::size(cells), " budgets exact");
  return v;
}

Verdict TradeoffReproduction() {
  Verdict v;
  const double yr = *Tradeoff({.u_o = 95.68, .u_p = 93.2, .p_o = 95.03, .p_p = 43.24});
  const double mhb = *Tradeoff({.u_o = 71.83, .u_p = 63.4, .p_o = 23.94, .p_p = 23.9});
  v.Require(std::abs(yr - 0.52) <= 0.015, StrCat("YR SanText TO(s) = ", yr));
  v.Require(std::abs(mhb + 0.12) <= 0.015, StrCat("MHB MLDP TO(a) = ", mhb));
  std::ifstream in(DataPath("tradeoff_reference.csv"));
  std::string line;
  std::getline(in, line);
  int matched = 0, total = 0;
  while (std::getline(in, line)) {
    auto f = Split(line, ',');
    if (f.size() != 8) {
      v.Require(false, StrCat("bad reference row: ", line));
      break;
    }
    double u_p = 0, u_o = 0, p_p = 0, p_o = 0, to = 0;
    const bool parsed = ParseNumber(f[3], &u_p) && ParseNumber(f[4], &u_o) &&
                        ParseNumber(f[5], &p_p) && ParseNumber(f[6], &p_o) &&
                        ParseNumber(f[7], &to);
    v.Require(parsed, StrCat("bad reference row: ", line));
    ++total;
    auto got = Tradeoff({u_o, u_p, p_o, p_p, 0.0});
    matched += got.ok() && std::abs(*got - to) <= 0.015;
  }
  v.Require(matched >= 20, StrCat("only ", matched, "/", total, " published values"));
  if (v.pass) {
    v.detail = StrCat(matched, "/", total, " published values within 0.015; anchors ",
                      fmt::format("{:.3f}", yr), " and ", fmt::format("{:.3f}", mhb));
  }
  return v;
}

// Checks every ordered pair of vocabulary words against every output.
Verdict RatioSuite() {
  constexpr int64_t kSamples = 1000000;
  Verdict v;
  auto store = ToyStore();
  const size_t n = store->size();
  auto cov = ComputeCovariance(*store, 0.2);
  auto lists = BuildDiffractorLists(*store, 1, 0);
  if (!cov.ok() || !lists.ok()) {
    v.Require(false, "cannot build covariance or lists");
    return v;
  }
  struct Case {
    std::string name;
    std::unique_ptr<WordMechanism> mechanism;
    std::function<double(size_t, size_t)> distance;
  };
  std::vector<Case> cases;
  cases.push_back({"cmp", std::make_unique<CmpMechanism>(store),
                   [&](size_t a, size_t b) { return store->Distance(a, b); }});
  cases.push_back({"mahalanobis", std::make_unique<MahalanobisMechanism>(store, *cov),
                   [&](size_t a, size_t b) {
                     return cov->MahalanobisDistance(store->Vector(a), store->Vector(b));
                   }});
  cases.push_back({"diffractor", std::make_unique<DiffractorMechanism>(store, *lists),
                   [&](size_t a, size_t b) {
                     return std::abs(double(lists->position[0][a]) -
                                     double(lists->position[0][b]));
                   }});
  size_t triples = 0;
  for (const Case& c : cases) {
    for (double eps : {0.5, 1.0, 2.0}) {
      std::vector<std::map<std::string, int64_t>> counts;
      for (size_t i = 0; i < n; ++i) {
        counts.push_back(SampleOutputs(*c.mechanism, store->word(i), eps, kSamples,
                                       Fnv1a64(StrCat(c.name, eps))));
      }
      for (size_t a = 0; a < n; ++a) {
        for (size_t b = a + 1; b < n; ++b) {
          auto bad = CountViolations(store->word(a), counts[a], store->word(b), counts[b],
                                     kSamples, c.distance(a, b), eps);
          triples += 2 * n;
          v.Require(bad.empty(), StrCat(c.name, " eps ", eps, ": ",
                                        bad.empty() ? "" : bad.front()));
        }
      }
    }
  }
  SanTextParams params;
  params.candidate_k = 5;
  SanTextMechanism santext(store, params);
  double worst_tv = 0;
  for (const std::string& word : {std::string("good"), std::string("table")}) {
    const auto& cand = santext.CandidatesOf(*store->IndexOf(word));
    for (double eps : {0.5, 1.0, 2.0}) {
      auto probs = ExponentialMechanismProbabilities(cand.distances, eps, true);
      auto counts = SampleOutputs(santext, word, eps, kSamples, 99);
      double tv = 0;
      for (size_t j = 0; j < probs.size(); ++j) {
        const std::string& out = store->word(cand.indices[j]);
        tv += std::abs((counts.count(out) ? counts[out] : 0) / double(kSamples) - probs[j]);
      }
      worst_tv = std::max(worst_tv, tv / 2);
    }
  }
  v.Require(worst_tv < 0.01, StrCat("SanText TV distance ", worst_tv));
  if (v.pass) {
    v.detail = StrCat(triples, " (x, x', z) checks at 1e6 samples hold; SanText TV ",
                      fmt::format("{:.5f}", worst_tv));
  }
  return v;
}

Verdict MechanismLimits() {
  Verdict v;
  auto store = ToyStore();
  double worst = 1.0;
  // SanText+ needs reference counts; half the vocabulary is frequent.
  testing::TempDir tmp;
  std::string freq;
  for (size_t i = 0; i < store->size(); ++i) {
    freq += StrCat(store->word(i), " ", i % 2 == 0 ? 1000 : 1, "\n");
  }
  if (!WriteFileAtomic(tmp / "freq.txt", freq).ok()) {
    v.Require(false, "cannot write frequency file");
    return v;
  }
  for (const char* name : {"cmp", "mahalanobis", "diffractor", "santext", "santext_plus"}) {
    nlohmann::json json = {{"id", name}};
    if (std::string(name) == "santext_plus") json["freq_file"] = (tmp / "freq.txt").string();
    auto mech = CreateMechanism(*MechanismConfig::FromJson(json), store);
    if (!mech.ok()) {
      v.Require(false, StrCat(name, ": ", mech.status().message()));
      continue;
    }
    for (const std::string& word : store->words()) {
      auto counts = SampleOutputs(**mech, word, 1e6, 10000, 5);
      const double p = counts[word] / 10000.0;
      worst = std::min(worst, p);
      v.Require(p > 0.99, StrCat(name, " keeps '", word, "' with p = ", p));
    }
  }
  SanTextParams params;
  params.candidate_k = 1;
  SanTextMechanism single(store, params);
  for (const std::string& word : store->words()) {
    for (double eps : {1e-6, 0.1, 1.0, 10.0}) {
      auto counts = SampleOutputs(single, word, eps, 2000, 6);
      v.Require(counts.size() == 1 && counts[word] == 2000,
                StrCat("candidate_k = 1 changed '", word, "' at eps ", eps));
    }
  }
  if (v.pass) {
    v.detail = StrCat("min P(identity) at eps 1e6 = ", worst,
                      " over 5 mechanisms; candidate_k = 1 is exact identity");
  }
  return v;
}

Verdict LengthPreservation() {
  Verdict v;
  auto store = testing::RandomStore(300, 8, 23);
  Rng rng = NamedRng(17, "acceptance/docs");
  const std::vector<std::string> extras = {",", ".", "!", "zzqx", "Don't", "e-mail", "(", ")"};
  Corpus corpus;
  for (int d = 0; d < 1000; ++d) {
    std::string text;
    const size_t len = 1 + rng.NextIndex(40);
    for (size_t i = 0; i < len; ++i) {
      if (!text.empty()) text += ' ';
      text += rng.NextIndex(5) == 0 ? extras[rng.NextIndex(extras.size())]
                                    : store->word(rng.NextIndex(store->size()));
    }
    corpus.documents.push_back(MakeDocument(StrCat("d", d), StrCat("a", d % 7), std::nullopt,
                                            text));
  }
  auto policy = BudgetPolicy::Create(1.0, BudgetMode::kUnbounded, 1.0);
  size_t compared = 0;
  for (const char* name : {"cmp", "mahalanobis", "diffractor", "santext"}) {
    auto mech = CreateMechanism(*MechanismConfig::FromJson({{"id", name}}), store);
    if (!mech.ok()) {
      v.Require(false, StrCat(name, ": ", mech.status().message()));
      continue;
    }
    auto run = SanitizeCorpus(corpus, **mech, *policy, {.seed = 3, .workers = 2});
    if (!run.ok()) {
      v.Require(false, StrCat(name, ": ", run.status().message()));
      continue;
    }
    for (size_t i = 0; i < corpus.size(); ++i) {
      const Document& in = corpus.documents[i];
      const Document& out = run->output.documents[i];
      v.Require(out.tokens.size() == in.tokens.size() &&
                    Tokenize(out.text).size() == in.tokens.size(),
                StrCat(name, " ", in.id, ": ", in.tokens.size(), " -> ", out.tokens.size()));
      ++compared;
    }
  }
  if (v.pass) v.detail = StrCat(compared, " documents keep their token count");
  return v;
}

Verdict IndistinguishabilityOracle() {
  Verdict v;
  const size_t n = 100, dim = 8;
  for (uint64_t s = 0; s < 50; ++s) {
    Rng rng = NamedRng(s, "acceptance/in");
    std::normal_distribution<double> normal(0.0, 1.0);
    EmbeddingSet o, p;
    o.vectors.resize(n, dim);
    p.vectors.resize(n, dim);
    for (size_t i = 0; i < n; ++i) {
      o.doc_ids.push_back(StrCat("d", i));
      for (size_t j = 0; j < dim; ++j) o.vectors(i, j) = normal(rng);
    }
    p.doc_ids = o.doc_ids;
    const double mix = 0.2 + 0.015 * s;
    for (size_t i = 0; i < n; ++i) {
      for (size_t j = 0; j < dim; ++j) {
        p.vectors(i, j) = mix * o.vectors(i, j) + normal(rng);
      }
    }
    // Full sort per row, descending cosine, earlier row first on ties.
    double sum = 0;
    std::vector<size_t> oracle;
    for (size_t i = 0; i < n; ++i) {
      std::vector<std::pair<double, size_t>> order;
      for (size_t j = 0; j < n; ++j) {
        const Eigen::VectorXd a = o.vectors.row(i), b = p.vectors.row(j);
        order.emplace_back(a.dot(b) / (a.norm() * b.norm()), j);
      }
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& x, const auto& y) { return x.first > y.first; });
      for (size_t r = 0; r < n; ++r) {
        if (order[r].second == i) oracle.push_back(r + 1);
      }
    }
    for (size_t k : oracle) sum += double(k - 1) / double(n - 1);
    auto ranks = CounterpartRanks(o, p);
    auto in = Indistinguishability(o, p);
    v.Require(ranks.ok() && *ranks == oracle, StrCat("set ", s, ": ranks differ"));
    v.Require(in.ok() && *in == sum / n, StrCat("set ", s, ": In differs from oracle"));
    auto self = Indistinguishability(o, o);
    v.Require(self.ok() && *self == 0.0, StrCat("set ", s, ": identity In != 0"));
  }
  if (v.pass) v.detail = "50 sets x 100 docs equal the full-sort oracle; identity = 0";
  return v;
}

Verdict PromptAndParser() {
  Verdict v;
  const std::vector<FewShotPair> pairs = {
      {"p1", "teh fod was gret .", "the food was great ."},
      {"p2", "i lov thsi plce !", "i love this place !"},
      {"p3", "servise slow , prices hihg", "service slow , prices high"}};
  auto golden = ReadFile(DataPath("prompt_golden.txt"));
  auto prompt = BuildPrompt(pairs, "waiter brougt colds soup");
  v.Require(golden.ok() && prompt.ok() && *golden == *prompt,
            "prompt differs from the golden file");

  const std::vector<std::string> junk = {
      "Sure! Here is the cleaned text.\n", "Output:::\n", "Clean Text: decoy\n",
      "noisy_text: x y z\n\n", "Clean Text:\n\n", "   \t", "Output:::Clean Text:"};
  const std::vector<std::string> bodies = {
      "the food was great .", "Clean-ish text, with: colons", "multi\nline\nbody",
      "unicode caf\xc3\xa9 na\xc3\xafve", "Output::: inside body"};
  Rng rng = NamedRng(2, "acceptance/parse");
  int recovered = 0, double_marker = 0;
  for (int i = 0; i < 100; ++i) {
    std::string raw;
    // Every fourth response repeats the marker before the real body.
    if (i % 4 == 0) raw += "Output:::\nClean Text: first draft\n";
    const size_t n_junk = rng.NextIndex(4);
    for (size_t j = 0; j < n_junk; ++j) raw += junk[rng.NextIndex(junk.size())];
    const std::string& body = bodies[rng.NextIndex(bodies.size())];
    const std::string before[] = {"", " ", "\n", "  \n\t"};
    const std::string after[] = {"", "\n", "   ", "\n\n"};
    raw += "Clean Text:" + before[rng.NextIndex(4)] + body + after[rng.NextIndex(4)];
    double_marker += raw.find("Clean Text:") != raw.rfind("Clean Text:");
    auto parsed = ParseCleanText(raw);
    if (parsed.ok() && *parsed == body) ++recovered;
  }
  v.Require(recovered == 100, StrCat("recovered ", recovered, "/100 planted texts"));
  v.Require(double_marker >= 25, "too few double-marker responses generated");
  if (v.pass) {
    v.detail = StrCat("golden prompt byte-identical; 100/100 planted texts recovered (",
                      double_marker, " with repeated markers)");
  }
  return v;
}

Verdict AttackDirection() {
  Verdict v;
  auto world = testing::MakeAuthorWorld(3, 60, 15, 21);
  auto split = SplitTrainTest(world.corpus, 0.3, 5);
  CmpMechanism mech(world.store);
  auto policy = BudgetPolicy::Create(1.0, BudgetMode::kBounded, *DatasetAvgWords(world.corpus));
  auto clean = RunStaticAttack(split->first, split->second, {});
  auto sanitized = SanitizeCorpus(split->second, mech, *policy, {.seed = 1});
  if (!clean.ok() || !sanitized.ok()) {
    v.Require(false, "attack setup failed");
    return v;
  }
  auto stat = RunStaticAttack(split->first, sanitized->output, {});
  auto adaptive = RunAdaptiveAttack(split->first, sanitized->output, mech, *policy, 1, {});
  if (!stat.ok() || !adaptive.ok()) {
    v.Require(false, "attack failed");
    return v;
  }
  v.Require(clean->micro_f1 >= 95, StrCat("clean F1 ", clean->micro_f1));
  v.Require(clean->micro_f1 - stat->micro_f1 >= 30,
            StrCat("P(s) only dropped to ", stat->micro_f1));
  v.Require(adaptive->micro_f1 >= stat->micro_f1 - 2,
            StrCat("P(a) ", adaptive->micro_f1, " < P(s) ", stat->micro_f1, " - 2"));
  v.detail = fmt::format("clean {:.2f}, P(s) {:.2f}, P(a) {:.2f}", clean->micro_f1,
                         stat->micro_f1, adaptive->micro_f1) +
             (v.pass ? "" : "; " + v.detail);
  return v;
}

Verdict Determinism() {
  Verdict v;
  testing::MockServer chat, sidecar;
  testing::InstallEchoChat(chat.server());
  testing::InstallFakeSidecar(sidecar.server());
  chat.Start();
  sidecar.Start();
  const nlohmann::json patch = {
      {"base_eps", {1.0, 3.0}},
      {"endpoint", {{"base_url", chat.url() + "/v1"}, {"model", "echo"}, {"rate_limit", 0}}},
      {"evaluation", {{"embedder", "sidecar"},
                      {"scorer", "sidecar"},
                      {"sidecar", {{"base_url", sidecar.url()}}}}}};
  testing::TempDir first, second;
  std::map<std::string, std::string> trees[2];
  int i = 0;
  for (const testing::TempDir* dir : {&first, &second}) {
    const fs::path config = testing::WriteWorkspace(
        dir->path(), testing::MakeAuthorWorld(3, 20, 12, 8), patch);
    std::string err;
    const int code = testing::Cli({"pipeline", "-c", config.string()}, nullptr, &err);
    v.Require(code == kExitOk, StrCat("pipeline exited ", code, ": ", err));
    trees[i++] = testing::ReadTree(dir->path() / "out");
  }
  v.Require(!trees[0].empty(), "no output written");
  for (const auto& [name, content] : trees[0]) {
    auto other = trees[1].find(name);
    v.Require(other != trees[1].end() && other->second == content,
              StrCat(name, " differs between runs"));
  }
  v.Require(trees[0].size() == trees[1].size(), "different file sets");
  if (v.pass) v.detail = StrCat(trees[0].size(), " files byte-identical across two runs");
  return v;
}

}  // namespace
}  // namespace dptext

int main() {
  using Clock = std::chrono::steady_clock;
  struct Criterion {
    const char* name;
    std::function<dptext::Verdict()> run;
    double limit_seconds;  // 0: no runtime limit
  };
  const Criterion criteria[] = {
      {"budget-reproduction", dptext::BudgetReproduction, 1},
      {"tradeoff-reproduction", dptext::TradeoffReproduction, 1},
      {"mldp-ratio-suite", dptext::RatioSuite, 600},
      {"mechanism-limits", dptext::MechanismLimits, 0},
      {"length-preservation", dptext::LengthPreservation, 0},
      {"indistinguishability-oracle", dptext::IndistinguishabilityOracle, 0},
      {"prompt-golden-and-parser", dptext::PromptAndParser, 0},
      {"attack-direction", dptext::AttackDirection, 300},
      {"determinism", dptext::Determinism, 0},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = Clock::now();
    dptext::Verdict verdict = c.run();
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (c.limit_seconds > 0 && seconds > c.limit_seconds) {
      verdict.Require(false, fmt::format("took {:.1f}s, limit {:.0f}s", seconds,
                                         c.limit_seconds));
    }
    failed += !verdict.pass;
    std::cout << (verdict.pass ? "PASS " : "FAIL ") << c.name << ": " << verdict.detail
              << fmt::format(" [{:.2f}s]", seconds) << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : fmt::format("{} criteria failed", failed))
            << std::endl;
  return failed == 0 ? 0 : 1;
}
