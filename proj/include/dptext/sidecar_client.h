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

#ifndef DPTEXT_SIDECAR_CLIENT_H_
#define DPTEXT_SIDECAR_CLIENT_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace dptext {

// Sentence embeddings for a batch of texts, one vector per text.
class TextEmbedder {
 public:
  virtual ~TextEmbedder() = default;
  virtual absl::StatusOr<std::vector<std::vector<double>>> Embed(
      const std::vector<std::string>& texts) = 0;
};

// Language-model perplexity for a batch of texts, one score per text.
class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  virtual absl::StatusOr<std::vector<double>> Score(
      const std::vector<std::string>& texts) = 0;
};

// Runs of whitespace collapse to one space; ends are trimmed.
std::string NormalizeWhitespace(std::string_view text);

struct SidecarHealth {
  std::string status;
  std::vector<std::string> models_loaded;
};

struct SidecarConfig {
  std::string base_url = "http://127.0.0.1:8765";
  std::string embed_model = "all-MiniLM-L12-v2";
  std::string perplexity_model = "gpt2";
  size_t batch_size = 32;
  double timeout_seconds = 300.0;
};

// JSON over HTTP: POST /embed, POST /perplexity, GET /health. A server that
// cannot be reached, or answers 503, gives Unavailable.
class SidecarClient : public TextEmbedder, public PerplexityScorer {
 public:
  explicit SidecarClient(SidecarConfig config) : config_(std::move(config)) {}

  absl::StatusOr<SidecarHealth> Health() const;
  absl::StatusOr<std::vector<std::vector<double>>> Embed(
      const std::vector<std::string>& texts) override;
  absl::StatusOr<std::vector<double>> Score(
      const std::vector<std::string>& texts) override;

 private:
  absl::StatusOr<std::string> Post(const std::string& route,
                                   const std::string& body) const;

  SidecarConfig config_;
};

// Replays responses recorded from the sidecar. Each JSONL line is
//   {"endpoint": "/embed", "request": {"texts": [...]},
//    "response": {"vectors": [...]}}
// or the "/perplexity" form with "scores". Texts are matched after
// whitespace normalization; an unrecorded text is NotFound.
class FixtureSidecar : public TextEmbedder, public PerplexityScorer {
 public:
  static absl::StatusOr<FixtureSidecar> Load(const std::filesystem::path& path);
  static absl::StatusOr<FixtureSidecar> Parse(std::string_view jsonl);

  void AddVector(std::string_view text, std::vector<double> vector);
  void AddScore(std::string_view text, double score);

  absl::StatusOr<std::vector<std::vector<double>>> Embed(
      const std::vector<std::string>& texts) override;
  absl::StatusOr<std::vector<double>> Score(
      const std::vector<std::string>& texts) override;

  size_t vector_count() const { return vectors_.size(); }
  size_t score_count() const { return scores_.size(); }

 private:
  std::unordered_map<std::string, std::vector<double>> vectors_;
  std::unordered_map<std::string, double> scores_;
};

}  // namespace dptext

#endif  // DPTEXT_SIDECAR_CLIENT_H_
