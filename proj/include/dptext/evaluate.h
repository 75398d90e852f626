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

#ifndef DPTEXT_EVALUATE_H_
#define DPTEXT_EVALUATE_H_

#include <optional>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "dptext/attack.h"
#include "dptext/classifier.h"
#include "dptext/corpus.h"
#include "dptext/metrics.h"
#include "dptext/sidecar_client.h"
#include "json.hpp"

namespace dptext {

// One line of the comparison table. Missing metrics stay empty.
struct EvalRow {
  std::string dataset;
  std::string mechanism;
  std::string mode;
  double eps = 0.0;
  // original | mldp | reconstructed
  std::string stage;
  std::optional<double> util, util_std, ss, co, p_s, p_a, in, to_s, to_a;

  nlohmann::ordered_json ToJson() const;
  static absl::StatusOr<EvalRow> FromJson(const nlohmann::json& json);
};

std::string EvalCsvHeader();
std::string EvalCsvLine(const EvalRow& row);
std::string EvalRowsToCsv(const std::vector<EvalRow>& rows);

struct EvalReport {
  std::vector<EvalRow> rows;
  std::optional<TokenShiftSummary> token_shift;
  // Metrics left empty because no embedder or scorer was configured.
  std::vector<std::string> skipped;

  nlohmann::ordered_json ToJson() const;
  std::string ToCsv() const { return EvalRowsToCsv(rows); }
};

// Train and test splits of one release stage.
struct StageSplits {
  Corpus train;
  Corpus test;
};

struct EvalInputs {
  std::string dataset;
  std::string mechanism;
  std::string mode;
  double eps = 0.0;
  StageSplits clean;
  std::optional<StageSplits> mldp;
  std::optional<StageSplits> reconstructed;
  // Null leaves SS and In (embedder) or Co (scorer) empty.
  TextEmbedder* embedder = nullptr;
  PerplexityScorer* scorer = nullptr;
  ClassifierConfig classifier;
  double u_mg = 0.0;
};

// Rows for the original data and for every stage present. The adaptive
// attacker trains on the stage's own train split, which the pipeline
// produced with the same mechanism, budget and seed as the test split.
absl::StatusOr<EvalReport> Evaluate(const EvalInputs& inputs);

}  // namespace dptext

#endif  // DPTEXT_EVALUATE_H_
