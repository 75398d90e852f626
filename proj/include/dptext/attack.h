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

#ifndef DPTEXT_ATTACK_H_
#define DPTEXT_ATTACK_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/statusor.h"
#include "dptext/budget.h"
#include "dptext/classifier.h"
#include "dptext/corpus.h"
#include "dptext/mechanisms.h"
#include "json.hpp"

namespace dptext {

// Where a corpus sits in the release pipeline, read from the `sanitized`
// and `reconstructed` document flags.
enum class Stage { kClean, kSanitized, kReconstructed };

std::string_view StageName(Stage stage);
// Error when documents disagree.
absl::StatusOr<Stage> CorpusStage(const Corpus& corpus);

enum class AttackMode { kStatic, kAdaptive };
std::string_view AttackModeName(AttackMode mode);

struct AttackReport {
  AttackMode mode = AttackMode::kStatic;
  Stage train_stage = Stage::kClean;
  Stage test_stage = Stage::kClean;
  double micro_f1 = 0.0;
  std::map<std::string, double> per_class_f1;
  size_t n_train = 0;
  size_t n_test = 0;

  nlohmann::ordered_json ToJson() const;
};

// Authorship attacker trained on clean text. A clean test split gives the
// baseline P_o.
absl::StatusOr<AttackReport> RunStaticAttack(const Corpus& train_clean,
                                             const Corpus& test,
                                             const ClassifierConfig& config);

// Authorship attacker that knows the mechanism and budget: the clean train
// split is sanitized with them before training. The test split must not be
// clean.
absl::StatusOr<AttackReport> RunAdaptiveAttack(
    const Corpus& train_clean, const Corpus& test_sanitized,
    const WordMechanism& mechanism, const BudgetPolicy& policy, uint64_t seed,
    const ClassifierConfig& config, size_t workers = 1);

// Adaptive attacker whose train split already went through the same
// transformation as the test split (used for reconstructed releases).
absl::StatusOr<AttackReport> RunAdaptiveAttackOnPrepared(
    const Corpus& train_transformed, const Corpus& test,
    const ClassifierConfig& config);

struct UtilityResult {
  double mean = 0.0;
  // Population standard deviation over the runs.
  double std = 0.0;
  std::vector<double> runs;
};

inline constexpr int kUtilityRepeats = 3;

// Label classifier trained on `train` and scored on `test`, repeated with
// seeds config.seed, config.seed + 1, ...
absl::StatusOr<UtilityResult> RunUtilityEval(const Corpus& train,
                                             const Corpus& test,
                                             const ClassifierConfig& config,
                                             int repeats = kUtilityRepeats);

}  // namespace dptext

#endif  // DPTEXT_ATTACK_H_
