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

#ifndef DPTEXT_RECONSTRUCT_H_
#define DPTEXT_RECONSTRUCT_H_

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dptext/corpus.h"
#include "json.hpp"

namespace dptext {

// A held-out document in sanitized and original form, shown to the model
// as a worked example.
struct FewShotPair {
  std::string doc_id;
  std::string noisy;
  std::string clean;
};

// Pairs held-out originals with their sanitized versions by id.
absl::StatusOr<std::vector<FewShotPair>> MakeFewShotPairs(
    const Corpus& originals, const Corpus& sanitized);
absl::StatusOr<std::vector<FewShotPair>> LoadFewShotPairs(
    const std::filesystem::path& path);
absl::Status SaveFewShotPairs(const std::vector<FewShotPair>& pairs,
                              const std::filesystem::path& path);

inline constexpr size_t kDefaultFewShotCount = 3;

// Instruction block, the worked examples in order, then the target. Pure.
absl::StatusOr<std::string> BuildPrompt(const std::vector<FewShotPair>& pairs,
                                        std::string_view target,
                                        size_t required = kDefaultFewShotCount);

// Text after the last "Clean Text:" marker, whitespace-trimmed.
absl::StatusOr<std::string> ParseCleanText(std::string_view raw);

// OpenAI-compatible chat-completions endpoint. The key is never stored here,
// only the name of the environment variable that holds it.
struct EndpointConfig {
  std::string base_url;
  std::string model;
  double temperature = 1.0;
  int max_retries = 5;
  // Requests per minute; 0 disables limiting.
  double rate_limit = 60.0;
  std::string api_key_env = "OPENAI_API_KEY";
  int max_tokens = 1024;
  double timeout_seconds = 120.0;
  size_t concurrency = 4;
  double initial_backoff_seconds = 1.0;
  double max_backoff_seconds = 60.0;

  absl::Status Validate() const;
  static absl::StatusOr<EndpointConfig> FromJson(const nlohmann::json& json);
  nlohmann::ordered_json ToJson() const;
};

// Implementations must be safe to call from several threads.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  // Content of the first choice. Unauthenticated and PermissionDenied are
  // fatal for a run; any other error only fails this request.
  virtual absl::StatusOr<std::string> Complete(std::string_view request_id,
                                               const std::string& prompt) = 0;
};

bool IsFatalEndpointError(const absl::Status& status);

struct ReconstructOptions {
  size_t required_pairs = kDefaultFewShotCount;
  size_t concurrency = 4;
};

struct ReconstructionRun {
  Corpus output;
  size_t failures = 0;
};

// One reconstructed document per input, in input order. Failed documents
// keep their sanitized text and carry `reconstruction_failed`. Only fatal
// endpoint errors abort the run.
absl::StatusOr<ReconstructionRun> ReconstructCorpus(
    const Corpus& sanitized, const std::vector<FewShotPair>& pairs,
    ChatClient& client, const ReconstructOptions& options = {});

}  // namespace dptext

#endif  // DPTEXT_RECONSTRUCT_H_
