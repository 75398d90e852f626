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

#ifndef DPTEXT_METRICS_H_
#define DPTEXT_METRICS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "Eigen/Core"
#include "absl/status/statusor.h"
#include "dptext/corpus.h"
#include "dptext/sidecar_client.h"
#include "json.hpp"

namespace dptext {

// Sentence embeddings, one row per document, rows in id order.
struct EmbeddingSet {
  std::vector<std::string> doc_ids;
  Eigen::MatrixXd vectors;

  size_t size() const { return doc_ids.size(); }
  absl::Status Validate() const;
  // Header `doc_id,e0,...,e{m-1}`.
  std::string ToCsv() const;
  static absl::StatusOr<EmbeddingSet> FromCsv(std::string_view csv);
  static absl::StatusOr<EmbeddingSet> Load(const std::filesystem::path& path);
  absl::Status Save(const std::filesystem::path& path) const;
};

absl::StatusOr<EmbeddingSet> EmbedCorpus(const Corpus& corpus,
                                         TextEmbedder& embedder);

// Mean cosine between matching rows.
absl::StatusOr<double> SemanticSimilarity(const EmbeddingSet& original,
                                          const EmbeddingSet& privatized);

// 1-based rank of each private counterpart among all private vectors,
// ordered by descending cosine to the original; ties go to the earlier row.
absl::StatusOr<std::vector<size_t>> CounterpartRanks(
    const EmbeddingSet& original, const EmbeddingSet& privatized);

// Mean of (k_i - 1) / (n - 1) over the CounterpartRanks.
absl::StatusOr<double> Indistinguishability(const EmbeddingSet& original,
                                            const EmbeddingSet& privatized);

// Type-7 (linear interpolation) quantile of ascending `sorted` data.
double Quantile(const std::vector<double>& sorted, double q);

struct TokenShiftSummary {
  size_t n = 0;
  // Mean over shifts inside the 1.5 IQR fences.
  double mean = 0.0;
  double p5 = 0.0, p25 = 0.0, p50 = 0.0, p75 = 0.0, p95 = 0.0;
  double lower_fence = 0.0, upper_fence = 0.0;
  std::vector<std::pair<std::string, int64_t>> outliers;

  nlohmann::ordered_json ToJson() const;
};

// Per-document shift = tokens(reconstructed) - tokens(private). Quantiles
// cover every document.
absl::StatusOr<TokenShiftSummary> TokenShift(const Corpus& privatized,
                                             const Corpus& reconstructed);
absl::StatusOr<TokenShiftSummary> SummarizeShifts(
    const std::vector<std::string>& doc_ids, const std::vector<int64_t>& shifts);

absl::StatusOr<double> MeanPerplexity(const std::vector<std::string>& texts,
                                      PerplexityScorer& scorer);

struct TradeoffInputs {
  double u_o = 0.0;
  double u_p = 0.0;
  double p_o = 0.0;
  double p_p = 0.0;
  // Majority-guess utility subtracted from both utility scores.
  double u_mg = 0.0;
};

// (U_p - U_mg) / (U_o - U_mg) - P_p / P_o
absl::StatusOr<double> Tradeoff(const TradeoffInputs& in);

// First two principal components of the rows. Component signs are fixed so
// the largest-magnitude loading is positive.
absl::StatusOr<Eigen::MatrixXd> ProjectTo2d(const EmbeddingSet& set);

// `doc_id,author,stage,x,y` rows.
std::string ProjectionCsv(const EmbeddingSet& set, const Eigen::MatrixXd& xy,
                          const std::vector<std::string>& authors,
                          std::string_view stage);

}  // namespace dptext

#endif  // DPTEXT_METRICS_H_
