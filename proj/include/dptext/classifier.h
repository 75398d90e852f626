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

#ifndef DPTEXT_CLASSIFIER_H_
#define DPTEXT_CLASSIFIER_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "dptext/corpus.h"
#include "json.hpp"

namespace dptext {

inline constexpr uint32_t kFeatureBuckets = 1u << 18;

// (bucket, value) pairs sorted by bucket.
using SparseFeatures = std::vector<std::pair<uint32_t, float>>;

// Lowercased unigrams and bigrams hashed into kFeatureBuckets buckets,
// weighted log(1 + count) and scaled to unit L2 norm.
SparseFeatures ExtractFeatures(std::span<const Token> tokens);
uint32_t FeatureBucket(std::string_view feature);

enum class LabelTarget { kAuthor, kLabel };

struct ClassifierConfig {
  int epochs = 20;
  double learning_rate = 0.5;
  uint64_t seed = 0;

  static absl::StatusOr<ClassifierConfig> FromJson(const nlohmann::json& json);
  nlohmann::ordered_json ToJson() const;
};

// Multiclass softmax regression over hashed features, trained with SGD.
// Training and inference are deterministic for a fixed seed.
class TextClassifier {
 public:
  static absl::StatusOr<TextClassifier> Train(
      const std::vector<SparseFeatures>& examples,
      const std::vector<std::string>& labels, const ClassifierConfig& config);
  static absl::StatusOr<TextClassifier> TrainOnCorpus(
      const Corpus& corpus, LabelTarget target, const ClassifierConfig& config);

  const std::vector<std::string>& classes() const { return classes_; }
  // Linear score per class, in classes() order.
  std::vector<double> Scores(const SparseFeatures& features) const;
  // Highest score; ties go to the earlier class.
  const std::string& Predict(const SparseFeatures& features) const;
  std::vector<std::string> PredictCorpus(const Corpus& corpus) const;

  float weight(size_t cls, uint32_t bucket) const {
    return weights_[cls * kFeatureBuckets + bucket];
  }
  double bias(size_t cls) const { return bias_[cls]; }

  // Binary snapshot: magic "DPTXCLF", u32 version, u32 buckets, u32 class
  // count, length-prefixed class names, f64 biases, f32 weights.
  absl::Status Save(const std::filesystem::path& path) const;
  static absl::StatusOr<TextClassifier> Load(const std::filesystem::path& path);

 private:
  std::vector<std::string> classes_;
  std::vector<double> bias_;
  std::vector<float> weights_;
};

absl::StatusOr<std::vector<std::string>> TargetLabels(const Corpus& corpus,
                                                      LabelTarget target);

// Micro-averaged F1 in percent.
absl::StatusOr<double> MicroF1(const std::vector<std::string>& predictions,
                               const std::vector<std::string>& truth);
// Per-class F1 in percent, over classes seen in either list.
absl::StatusOr<std::map<std::string, double>> PerClassF1(
    const std::vector<std::string>& predictions,
    const std::vector<std::string>& truth);

}  // namespace dptext

#endif  // DPTEXT_CLASSIFIER_H_
