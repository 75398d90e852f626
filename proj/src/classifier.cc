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

#include "dptext/classifier.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_map>

#include "dptext/rng.h"
#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

constexpr char kMagic[8] = {'D', 'P', 'T', 'X', 'C', 'L', 'F', '\0'};
constexpr uint32_t kVersion = 1;

template <typename T>
void Put(std::string& out, const T& value) {
  out.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool Get(std::string_view& in, T* value) {
  if (in.size() < sizeof(T)) return false;
  std::memcpy(value, in.data(), sizeof(T));
  in.remove_prefix(sizeof(T));
  return true;
}

}  // namespace

uint32_t FeatureBucket(std::string_view feature) {
  return static_cast<uint32_t>(Fnv1a64(feature) % kFeatureBuckets);
}

SparseFeatures ExtractFeatures(std::span<const Token> tokens) {
  std::unordered_map<uint32_t, float> counts;
  std::string prev;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const std::string word = ToLowerAscii(tokens[i].surface);
    counts[FeatureBucket(StrCat("u\x1f", word))] += 1.0f;
    if (i > 0) counts[FeatureBucket(StrCat("b\x1f", prev, "\x1f", word))] += 1.0f;
    prev = word;
  }
  SparseFeatures out(counts.begin(), counts.end());
  std::sort(out.begin(), out.end());
  double norm = 0.0;
  for (auto& [bucket, value] : out) {
    value = static_cast<float>(std::log1p(static_cast<double>(value)));
    norm += static_cast<double>(value) * value;
  }
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (auto& entry : out) entry.second = static_cast<float>(entry.second / norm);
  }
  return out;
}

absl::StatusOr<ClassifierConfig> ClassifierConfig::FromJson(
    const nlohmann::json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("classifier must be an object");
  ClassifierConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "epochs") cfg.epochs = value.get<int>();
      else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<uint64_t>();
      else return absl::InvalidArgumentError(StrCat("classifier: unknown key '", key, "'"));
    } catch (const nlohmann::json::exception& e) {
      return absl::InvalidArgumentError(StrCat("classifier.", key, ": ", e.what()));
    }
  }
  if (cfg.epochs <= 0) return absl::InvalidArgumentError("classifier.epochs must be > 0");
  if (!(cfg.learning_rate > 0.0)) {
    return absl::InvalidArgumentError("classifier.learning_rate must be > 0");
  }
  return cfg;
}

nlohmann::ordered_json ClassifierConfig::ToJson() const {
  return {{"epochs", epochs}, {"learning_rate", learning_rate}, {"seed", seed}};
}

absl::StatusOr<TextClassifier> TextClassifier::Train(
    const std::vector<SparseFeatures>& examples,
    const std::vector<std::string>& labels, const ClassifierConfig& config) {
  if (examples.size() != labels.size()) {
    return absl::InvalidArgumentError("one label per training example required");
  }
  std::set<std::string> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) {
    return absl::FailedPreconditionError(
        StrCat("training needs at least 2 classes, found ", distinct.size()));
  }
  TextClassifier model;
  model.classes_.assign(distinct.begin(), distinct.end());
  const size_t c = model.classes_.size();
  model.bias_.assign(c, 0.0);
  model.weights_.assign(c * kFeatureBuckets, 0.0f);
  std::vector<size_t> target(labels.size());
  for (size_t i = 0; i < labels.size(); ++i) {
    target[i] = static_cast<size_t>(
        std::lower_bound(model.classes_.begin(), model.classes_.end(), labels[i]) -
        model.classes_.begin());
  }

  std::vector<size_t> order(examples.size());
  std::vector<double> probs(c);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), size_t{0});
    Rng rng = NamedRng(config.seed, "classifier/epoch", static_cast<uint64_t>(epoch));
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.NextIndex(i)]);
    }
    const double lr = config.learning_rate / std::sqrt(1.0 + epoch);
    for (size_t idx : order) {
      const SparseFeatures& x = examples[idx];
      probs = model.Scores(x);
      const double top = *std::max_element(probs.begin(), probs.end());
      double total = 0.0;
      for (double& p : probs) {
        p = std::exp(p - top);
        total += p;
      }
      for (size_t k = 0; k < c; ++k) {
        const double grad = probs[k] / total - (k == target[idx] ? 1.0 : 0.0);
        if (grad == 0.0) continue;
        model.bias_[k] -= lr * grad;
        float* row = &model.weights_[k * kFeatureBuckets];
        for (const auto& [bucket, value] : x) {
          row[bucket] -= static_cast<float>(lr * grad * value);
        }
      }
    }
  }
  return model;
}

absl::StatusOr<std::vector<std::string>> TargetLabels(const Corpus& corpus,
                                                      LabelTarget target) {
  std::vector<std::string> labels;
  labels.reserve(corpus.size());
  for (const Document& doc : corpus.documents) {
    if (target == LabelTarget::kAuthor) {
      labels.push_back(doc.author_id);
    } else if (doc.label.has_value()) {
      labels.push_back(*doc.label);
    } else {
      return absl::FailedPreconditionError(
          StrCat("document '", doc.id, "' has no label"));
    }
  }
  return labels;
}

absl::StatusOr<TextClassifier> TextClassifier::TrainOnCorpus(
    const Corpus& corpus, LabelTarget target, const ClassifierConfig& config) {
  ASSIGN_OR_RETURN(std::vector<std::string> labels, TargetLabels(corpus, target));
  std::vector<SparseFeatures> examples;
  examples.reserve(corpus.size());
  for (const Document& doc : corpus.documents) {
    examples.push_back(ExtractFeatures(doc.tokens));
  }
  return Train(examples, labels, config);
}

std::vector<double> TextClassifier::Scores(const SparseFeatures& features) const {
  std::vector<double> scores(bias_);
  for (size_t k = 0; k < classes_.size(); ++k) {
    const float* row = &weights_[k * kFeatureBuckets];
    double s = 0.0;
    for (const auto& [bucket, value] : features) {
      s += static_cast<double>(row[bucket]) * value;
    }
    scores[k] += s;
  }
  return scores;
}

const std::string& TextClassifier::Predict(const SparseFeatures& features) const {
  const std::vector<double> scores = Scores(features);
  const size_t best = static_cast<size_t>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
  return classes_[best];
}

std::vector<std::string> TextClassifier::PredictCorpus(const Corpus& corpus) const {
  std::vector<std::string> out;
  out.reserve(corpus.size());
  for (const Document& doc : corpus.documents) {
    out.push_back(Predict(ExtractFeatures(doc.tokens)));
  }
  return out;
}

absl::Status TextClassifier::Save(const std::filesystem::path& path) const {
  std::string out(kMagic, sizeof(kMagic));
  Put(out, kVersion);
  Put(out, kFeatureBuckets);
  Put(out, static_cast<uint32_t>(classes_.size()));
  for (const std::string& name : classes_) {
    Put(out, static_cast<uint32_t>(name.size()));
    out += name;
  }
  for (double b : bias_) Put(out, b);
  out.append(reinterpret_cast<const char*>(weights_.data()),
             weights_.size() * sizeof(float));
  return WriteFileAtomic(path, out);
}

absl::StatusOr<TextClassifier> TextClassifier::Load(
    const std::filesystem::path& path) {
  ASSIGN_OR_RETURN(std::string content, ReadFile(path));
  std::string_view in(content);
  auto corrupt = [&](std::string_view what) {
    return absl::DataLossError(StrCat(path.string(), ": ", what));
  };
  if (in.size() < sizeof(kMagic) ||
      std::memcmp(in.data(), kMagic, sizeof(kMagic)) != 0) {
    return corrupt("not a classifier snapshot");
  }
  in.remove_prefix(sizeof(kMagic));
  uint32_t version = 0, buckets = 0, count = 0;
  if (!Get(in, &version) || version != kVersion) return corrupt("unsupported snapshot version");
  if (!Get(in, &buckets) || buckets != kFeatureBuckets) return corrupt("bucket count mismatch");
  if (!Get(in, &count) || count < 2) return corrupt("bad class count");
  TextClassifier model;
  for (uint32_t k = 0; k < count; ++k) {
    uint32_t len = 0;
    if (!Get(in, &len) || in.size() < len) return corrupt("truncated class names");
    model.classes_.emplace_back(in.substr(0, len));
    in.remove_prefix(len);
  }
  model.bias_.resize(count);
  for (double& b : model.bias_) {
    if (!Get(in, &b)) return corrupt("truncated biases");
  }
  const size_t n = static_cast<size_t>(count) * kFeatureBuckets;
  if (in.size() != n * sizeof(float)) return corrupt("weight block has the wrong size");
  model.weights_.resize(n);
  std::memcpy(model.weights_.data(), in.data(), n * sizeof(float));
  return model;
}

absl::StatusOr<double> MicroF1(const std::vector<std::string>& predictions,
                               const std::vector<std::string>& truth) {
  if (predictions.size() != truth.size() || truth.empty()) {
    return absl::InvalidArgumentError(
        StrCat("micro-F1 needs equal non-empty lists, got ", predictions.size(),
               " predictions and ", truth.size(), " labels"));
  }
  // Pooled over classes, TP + FP = TP + FN = n for single-label data.
  size_t tp = 0;
  for (size_t i = 0; i < truth.size(); ++i) tp += predictions[i] == truth[i];
  const double n = static_cast<double>(truth.size());
  const double precision = tp / n;
  const double recall = tp / n;
  if (precision + recall == 0.0) return 0.0;
  return 100.0 * 2.0 * precision * recall / (precision + recall);
}

absl::StatusOr<std::map<std::string, double>> PerClassF1(
    const std::vector<std::string>& predictions,
    const std::vector<std::string>& truth) {
  if (predictions.size() != truth.size() || truth.empty()) {
    return absl::InvalidArgumentError("per-class F1 needs equal non-empty lists");
  }
  std::map<std::string, std::array<size_t, 3>> counts;  // tp, fp, fn
  for (size_t i = 0; i < truth.size(); ++i) {
    if (predictions[i] == truth[i]) {
      ++counts[truth[i]][0];
    } else {
      ++counts[predictions[i]][1];
      ++counts[truth[i]][2];
    }
  }
  std::map<std::string, double> out;
  for (const auto& [label, c] : counts) {
    const double denom = 2.0 * c[0] + c[1] + c[2];
    out[label] = denom == 0.0 ? 0.0 : 100.0 * 2.0 * c[0] / denom;
  }
  return out;
}

}  // namespace dptext
