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

#ifndef DPTEXT_CLI_H_
#define DPTEXT_CLI_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "dptext/budget.h"
#include "dptext/classifier.h"
#include "dptext/mechanisms.h"
#include "dptext/reconstruct.h"
#include "dptext/sidecar_client.h"
#include "json.hpp"

namespace dptext {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissingDependency = 3;
inline constexpr int kExitRemoteFatal = 4;

enum class MetricSource { kNone, kSidecar, kFixture };

struct EvaluationConfig {
  double u_mg = 0.0;
  MetricSource embedder = MetricSource::kSidecar;
  std::filesystem::path embedder_fixture;
  MetricSource scorer = MetricSource::kSidecar;
  std::filesystem::path scorer_fixture;
  SidecarConfig sidecar;
  ClassifierConfig classifier;
  // Also write a 2-D PCA projection of the test-split embeddings.
  bool projection = false;
};

// Everything a run needs. Relative paths in a config file resolve against
// the file's directory.
struct RunConfig {
  std::string dataset;
  std::filesystem::path corpus;
  std::filesystem::path embeddings;
  size_t embedding_dim = 0;
  MechanismConfig mechanism;
  std::vector<double> base_eps;
  BudgetMode mode = BudgetMode::kBounded;
  uint64_t seed = 0;
  size_t workers = 1;
  std::filesystem::path output_dir;
  size_t fewshot = kDefaultFewShotCount;
  double test_fraction = 0.1;
  std::optional<EndpointConfig> endpoint;
  EvaluationConfig evaluation;

  static absl::StatusOr<RunConfig> FromJson(const nlohmann::json& json,
                                            const std::filesystem::path& base_dir);
  static absl::StatusOr<RunConfig> Load(const std::filesystem::path& path);
  // Paths are written as given, so the JSON does not depend on where the
  // output lands.
  nlohmann::ordered_json ToJson() const;
  // Field-level checks, including that referenced input files exist.
  absl::Status Validate(bool need_embeddings) const;
};

// Name of the run directory for one budget: <mechanism>_<mode>_eps<eps>.
std::string RunName(const RunConfig& config, double eps);

// Entry point shared by the executable and the tests. Returns the exit code.
int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err);

}  // namespace dptext

#endif  // DPTEXT_CLI_H_
