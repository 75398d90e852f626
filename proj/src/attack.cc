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
#include <set>

#include "dptext/pipeline.h"
#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

bool Flag(const Document& doc, const char* key) {
  auto it = doc.extra.find(key);
  return it != doc.extra.end() && it->is_boolean() && it->get<bool>();
}

Stage DocumentStage(const Document& doc) {
  if (Flag(doc, "reconstructed")) return Stage::kReconstructed;
  if (Flag(doc, "sanitized")) return Stage::kSanitized;
  return Stage::kClean;
}

absl::Status CheckAuthorOverlap(const Corpus& train, const Corpus& test) {
  std::set<std::string_view> authors;
  for (const Document& doc : train.documents) authors.insert(doc.author_id);
  for (const Document& doc : test.documents) {
    if (authors.count(doc.author_id) != 0) return absl::OkStatus();
  }
  return absl::FailedPreconditionError(
      "train and test splits share no authors");
}

absl::StatusOr<AttackReport> Attribute(const Corpus& train, const Corpus& test,
                                       const ClassifierConfig& config) {
  if (train.documents.empty() || test.documents.empty()) {
    return absl::InvalidArgumentError("attack needs non-empty train and test splits");
  }
  RETURN_IF_ERROR(CheckAuthorOverlap(train, test));
  ASSIGN_OR_RETURN(TextClassifier model,
                   TextClassifier::TrainOnCorpus(train, LabelTarget::kAuthor, config));
  ASSIGN_OR_RETURN(std::vector<std::string> truth,
                   TargetLabels(test, LabelTarget::kAuthor));
  std::vector<std::string> predicted = model.PredictCorpus(test);
  AttackReport report;
  ASSIGN_OR_RETURN(report.micro_f1, MicroF1(predicted, truth));
  ASSIGN_OR_RETURN(report.per_class_f1, PerClassF1(predicted, truth));
  report.n_train = train.size();
  report.n_test = test.size();
  return report;
}

}  // namespace

std::string_view StageName(Stage stage) {
  switch (stage) {
    case Stage::kClean: return "clean";
    case Stage::kSanitized: return "sanitized";
    case Stage::kReconstructed: return "reconstructed";
  }
  return "unknown";
}

absl::StatusOr<Stage> CorpusStage(const Corpus& corpus) {
  if (corpus.documents.empty()) return absl::InvalidArgumentError("empty corpus");
  const Stage first = DocumentStage(corpus.documents.front());
  for (const Document& doc : corpus.documents) {
    if (DocumentStage(doc) != first) {
      return absl::InvalidArgumentError(StrCat(
          "corpus mixes stages: '", corpus.documents.front().id, "' is ",
          StageName(first), ", '", doc.id, "' is ", StageName(DocumentStage(doc))));
    }
  }
  return first;
}

std::string_view AttackModeName(AttackMode mode) {
  return mode == AttackMode::kStatic ? "static" : "adaptive";
}

nlohmann::ordered_json AttackReport::ToJson() const {
  nlohmann::ordered_json per_class = nlohmann::ordered_json::object();
  for (const auto& [label, f1] : per_class_f1) per_class[label] = f1;
  return {{"mode", AttackModeName(mode)},
          {"train_stage", StageName(train_stage)},
          {"test_stage", StageName(test_stage)},
          {"micro_f1", micro_f1},
          {"per_class_f1", per_class},
          {"n_train", n_train},
          {"n_test", n_test}};
}

absl::StatusOr<AttackReport> RunStaticAttack(const Corpus& train_clean,
                                             const Corpus& test,
                                             const ClassifierConfig& config) {
  ASSIGN_OR_RETURN(Stage train_stage, CorpusStage(train_clean));
  if (train_stage != Stage::kClean) {
    return absl::FailedPreconditionError(StrCat(
        "static attacker trains on clean text, got a ", StageName(train_stage),
        " train split"));
  }
  ASSIGN_OR_RETURN(Stage test_stage, CorpusStage(test));
  ASSIGN_OR_RETURN(AttackReport report, Attribute(train_clean, test, config));
  report.mode = AttackMode::kStatic;
  report.train_stage = train_stage;
  report.test_stage = test_stage;
  return report;
}

absl::StatusOr<AttackReport> RunAdaptiveAttackOnPrepared(
    const Corpus& train_transformed, const Corpus& test,
    const ClassifierConfig& config) {
  ASSIGN_OR_RETURN(Stage train_stage, CorpusStage(train_transformed));
  ASSIGN_OR_RETURN(Stage test_stage, CorpusStage(test));
  if (test_stage == Stage::kClean) {
    return absl::FailedPreconditionError(
        "adaptive attacker is evaluated on private text, got a clean test split");
  }
  if (train_stage == Stage::kClean) {
    return absl::FailedPreconditionError(
        "adaptive attacker trains on transformed text, got a clean train split");
  }
  ASSIGN_OR_RETURN(AttackReport report, Attribute(train_transformed, test, config));
  report.mode = AttackMode::kAdaptive;
  report.train_stage = train_stage;
  report.test_stage = test_stage;
  return report;
}

absl::StatusOr<AttackReport> RunAdaptiveAttack(
    const Corpus& train_clean, const Corpus& test_sanitized,
    const WordMechanism& mechanism, const BudgetPolicy& policy, uint64_t seed,
    const ClassifierConfig& config, size_t workers) {
  ASSIGN_OR_RETURN(Stage train_stage, CorpusStage(train_clean));
  if (train_stage != Stage::kClean) {
    return absl::FailedPreconditionError(
        "adaptive attacker starts from the clean train split");
  }
  SanitizeOptions options;
  options.seed = seed;
  options.workers = workers;
  ASSIGN_OR_RETURN(SanitizationRun run,
                   SanitizeCorpus(train_clean, mechanism, policy, options));
  return RunAdaptiveAttackOnPrepared(run.output, test_sanitized, config);
}

absl::StatusOr<UtilityResult> RunUtilityEval(const Corpus& train,
                                             const Corpus& test,
                                             const ClassifierConfig& config,
                                             int repeats) {
  if (repeats <= 0) return absl::InvalidArgumentError("repeats must be > 0");
  ASSIGN_OR_RETURN(std::vector<std::string> truth,
                   TargetLabels(test, LabelTarget::kLabel));
  RETURN_IF_ERROR(TargetLabels(train, LabelTarget::kLabel).status());
  UtilityResult result;
  for (int r = 0; r < repeats; ++r) {
    ClassifierConfig run_config = config;
    run_config.seed = config.seed + static_cast<uint64_t>(r);
    ASSIGN_OR_RETURN(TextClassifier model,
                     TextClassifier::TrainOnCorpus(train, LabelTarget::kLabel,
                                                   run_config));
    ASSIGN_OR_RETURN(double f1, MicroF1(model.PredictCorpus(test), truth));
    result.runs.push_back(f1);
  }
  double sum = 0.0;
  for (double v : result.runs) sum += v;
  result.mean = sum / static_cast<double>(repeats);
  double sq = 0.0;
  for (double v : result.runs) sq += (v - result.mean) * (v - result.mean);
  result.std = std::sqrt(sq / static_cast<double>(repeats));
  return result;
}

}  // namespace dptext
