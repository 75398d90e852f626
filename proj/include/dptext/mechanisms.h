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

#ifndef DPTEXT_MECHANISMS_H_
#define DPTEXT_MECHANISMS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "Eigen/Core"
#include "absl/status/statusor.h"
#include "dptext/embedding_store.h"
#include "dptext/rng.h"
#include "json.hpp"

namespace dptext {

enum class MechanismId { kCmp, kMahalanobis, kDiffractor, kSanText, kSanTextPlus };

std::string_view MechanismName(MechanismId id);
absl::StatusOr<MechanismId> ParseMechanismId(std::string_view name);

struct CmpParams {
  // L2-normalize embedding rows before perturbation.
  bool normalize = false;
};

struct MahalanobisParams {
  double lambda = 0.2;
};

struct DiffractorParams {
  size_t num_lists = 1;
  uint64_t projection_seed = 0;
};

struct SanTextParams {
  size_t candidate_k = 20;
  // SanText+ only: words whose reference frequency falls below this
  // percentile of the reference vocabulary are sensitive.
  double sensitive_percentile = 0.9;
  // SanText+ only: probability of sanitizing a non-sensitive word.
  double p_nonsensitive = 0.3;
  // SanText+ only: two-column `word count` reference file.
  std::string freq_file;
  bool lowercase = true;
  // Divide distances by the largest distance in the candidate set so the
  // utility lies in [-1, 0] (sensitivity 1).
  bool normalize_utility = true;
};

struct MechanismConfig {
  MechanismId id = MechanismId::kCmp;
  CmpParams cmp;
  MahalanobisParams mahalanobis;
  DiffractorParams diffractor;
  SanTextParams santext;

  absl::Status Validate() const;
  // {"id": "cmp", ...mechanism-specific keys}. Unknown keys are rejected.
  static absl::StatusOr<MechanismConfig> FromJson(const nlohmann::json& json);
  nlohmann::ordered_json ToJson() const;
};

struct SanitizeResult {
  std::string output;
  // Input missing from the vocabulary and released unchanged.
  bool oov = false;
  // A randomized release took place (false for OOV and SanText+ keeps).
  bool invoked = false;
};

// Word-in/word-out metric-LDP mechanism. Read-only after construction and
// safe to call concurrently; all randomness comes from `rng`.
class WordMechanism {
 public:
  virtual ~WordMechanism() = default;
  virtual MechanismId id() const = 0;
  virtual absl::StatusOr<SanitizeResult> Sanitize(std::string_view word,
                                                  double eps,
                                                  Rng& rng) const = 0;
};

// z = r * u, u uniform on the unit sphere, r ~ Gamma(dim, 1/eps); the
// density of z is proportional to exp(-eps * ||z||).
Eigen::VectorXd CmpNoise(size_t dim, double eps, Rng& rng);

class CmpMechanism : public WordMechanism {
 public:
  explicit CmpMechanism(std::shared_ptr<const EmbeddingStore> store)
      : store_(std::move(store)) {}

  MechanismId id() const override { return MechanismId::kCmp; }
  absl::StatusOr<SanitizeResult> Sanitize(std::string_view word, double eps,
                                          Rng& rng) const override;
  const EmbeddingStore& store() const { return *store_; }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
};

// Noise z = sqrt_sigma * (r * u) with r ~ Gamma(dim, 1/eps): density
// proportional to exp(-eps * ||sigma^{-1/2} z||).
class MahalanobisMechanism : public WordMechanism {
 public:
  MahalanobisMechanism(std::shared_ptr<const EmbeddingStore> store,
                       CovarianceModel covariance)
      : store_(std::move(store)), covariance_(std::move(covariance)) {}

  MechanismId id() const override { return MechanismId::kMahalanobis; }
  absl::StatusOr<SanitizeResult> Sanitize(std::string_view word, double eps,
                                          Rng& rng) const override;
  Eigen::VectorXd Noise(double eps, Rng& rng) const;
  const EmbeddingStore& store() const { return *store_; }
  const CovarianceModel& covariance() const { return covariance_; }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  CovarianceModel covariance_;
};

// One-dimensional orderings of the vocabulary.
struct DiffractorLists {
  // order[l][p] = vocabulary index at position p of list l.
  std::vector<std::vector<uint32_t>> order;
  // position[l][i] = position of vocabulary index i in list l.
  std::vector<std::vector<uint32_t>> position;
  std::vector<Eigen::VectorXd> projections;

  size_t num_lists() const { return order.size(); }
  size_t vocab_size() const { return order.empty() ? 0 : order[0].size(); }
};

// Each list sorts the vocabulary by its projection onto a Gaussian direction
// drawn from NamedRng(seed, "diffractor/projection", list); ties by index.
absl::StatusOr<DiffractorLists> BuildDiffractorLists(const EmbeddingStore& store,
                                                     size_t num_lists,
                                                     uint64_t seed = 0);

// Two-sided geometric offset: Pr[k] = (1-a)/(1+a) * a^|k|, a = exp(-eps).
int64_t SampleTwoSidedGeometric(double eps, Rng& rng);
double TwoSidedGeometricPmf(int64_t k, double eps);

class DiffractorMechanism : public WordMechanism {
 public:
  DiffractorMechanism(std::shared_ptr<const EmbeddingStore> store,
                      DiffractorLists lists)
      : store_(std::move(store)), lists_(std::move(lists)) {}

  MechanismId id() const override { return MechanismId::kDiffractor; }
  absl::StatusOr<SanitizeResult> Sanitize(std::string_view word, double eps,
                                          Rng& rng) const override;
  const DiffractorLists& lists() const { return lists_; }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  DiffractorLists lists_;
};

// Reference word frequencies for the SanText+ sensitivity gate.
class FrequencyTable {
 public:
  static absl::StatusOr<FrequencyTable> FromCounts(
      std::unordered_map<std::string, int64_t> counts,
      double sensitive_percentile);
  static absl::StatusOr<FrequencyTable> Load(const std::filesystem::path& path,
                                             double sensitive_percentile);

  int64_t count(std::string_view word) const;
  // Count threshold: words with a count strictly below it are sensitive.
  double cutoff() const { return cutoff_; }
  bool IsSensitive(std::string_view word) const;
  size_t size() const { return counts_.size(); }

 private:
  std::unordered_map<std::string, int64_t> counts_;
  double cutoff_ = 0.0;
};

enum class GateDecision { kSanitize, kKeep };

// Sensitive words (including unseen ones) are always sanitized;
// non-sensitive words with probability p_nonsensitive.
GateDecision SanTextPlusGate(std::string_view word, const FrequencyTable& table,
                             const SanTextParams& params, Rng& rng);

// Exponential-mechanism probabilities over a candidate set with the given
// distances: Pr[j] proportional to exp(eps * u_j / 2), u_j = -distance_j
// (divided by the largest distance when normalize_utility is set).
std::vector<double> ExponentialMechanismProbabilities(
    std::span<const double> distances, double eps, bool normalize_utility);

class SanTextMechanism : public WordMechanism {
 public:
  SanTextMechanism(std::shared_ptr<const EmbeddingStore> store,
                   SanTextParams params,
                   std::shared_ptr<const FrequencyTable> frequencies = nullptr);

  MechanismId id() const override {
    return frequencies_ ? MechanismId::kSanTextPlus : MechanismId::kSanText;
  }
  absl::StatusOr<SanitizeResult> Sanitize(std::string_view word, double eps,
                                          Rng& rng) const override;

  struct Candidates {
    std::vector<size_t> indices;  // self first
    std::vector<double> distances;
  };
  // candidate_k nearest vocabulary words of row `index`; memoized.
  const Candidates& CandidatesOf(size_t index) const;
  const EmbeddingStore& store() const { return *store_; }

 private:
  std::shared_ptr<const EmbeddingStore> store_;
  SanTextParams params_;
  std::shared_ptr<const FrequencyTable> frequencies_;
  mutable std::shared_mutex cache_mutex_;
  mutable std::unordered_map<size_t, std::unique_ptr<Candidates>> cache_;
};

// Builds the configured mechanism, loading its auxiliary resources
// (covariance, 1-D lists, frequency file).
absl::StatusOr<std::unique_ptr<WordMechanism>> CreateMechanism(
    const MechanismConfig& config, std::shared_ptr<const EmbeddingStore> store);

}  // namespace dptext

#endif  // DPTEXT_MECHANISMS_H_
