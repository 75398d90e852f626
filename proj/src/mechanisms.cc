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

#include "dptext/mechanisms.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

using ::nlohmann::json;

absl::Status CheckEps(double eps) {
  if (!(eps > 0.0) || std::isnan(eps)) {
    return absl::InvalidArgumentError(
        StrCat("epsilon must be positive, got ", eps));
  }
  return absl::OkStatus();
}

SanitizeResult PassThrough(std::string_view word) {
  return SanitizeResult{std::string(word), /*oov=*/true, /*invoked=*/false};
}

// Keeps the caller's surface form when the mechanism maps a word to itself.
SanitizeResult Released(std::string_view word, size_t input_index,
                        size_t output_index, const EmbeddingStore& store) {
  return SanitizeResult{output_index == input_index
                            ? std::string(word)
                            : store.word(output_index),
                        /*oov=*/false, /*invoked=*/true};
}

template <typename T>
absl::Status ReadKey(const json& object, std::string_view key, T* out) {
  auto it = object.find(std::string(key));
  if (it == object.end()) return absl::OkStatus();
  try {
    *out = it->get<T>();
  } catch (const json::exception&) {
    return absl::InvalidArgumentError(
        StrCat("mechanism field `", key, "` has the wrong type"));
  }
  return absl::OkStatus();
}

}  // namespace

std::string_view MechanismName(MechanismId id) {
  switch (id) {
    case MechanismId::kCmp:
      return "cmp";
    case MechanismId::kMahalanobis:
      return "mahalanobis";
    case MechanismId::kDiffractor:
      return "diffractor";
    case MechanismId::kSanText:
      return "santext";
    case MechanismId::kSanTextPlus:
      return "santext_plus";
  }
  return "unknown";
}

absl::StatusOr<MechanismId> ParseMechanismId(std::string_view name) {
  const std::string lower = ToLowerAscii(name);
  if (lower == "cmp" || lower == "madlib") return MechanismId::kCmp;
  if (lower == "mahalanobis" || lower == "maha") {
    return MechanismId::kMahalanobis;
  }
  if (lower == "diffractor" || lower == "1-diffractor") {
    return MechanismId::kDiffractor;
  }
  if (lower == "santext") return MechanismId::kSanText;
  if (lower == "santext_plus" || lower == "santext+") {
    return MechanismId::kSanTextPlus;
  }
  return absl::InvalidArgumentError(StrCat(
      "unknown mechanism '", name,
      "' (expected cmp, mahalanobis, diffractor, santext, santext_plus)"));
}

absl::Status MechanismConfig::Validate() const {
  if (!(mahalanobis.lambda >= 0.0 && mahalanobis.lambda <= 1.0)) {
    return absl::InvalidArgumentError("mahalanobis.lambda must lie in [0, 1]");
  }
  if (diffractor.num_lists < 1) {
    return absl::InvalidArgumentError("diffractor.num_lists must be >= 1");
  }
  if (santext.candidate_k < 1) {
    return absl::InvalidArgumentError("santext.candidate_k must be >= 1");
  }
  if (!(santext.sensitive_percentile >= 0.0 &&
        santext.sensitive_percentile <= 1.0)) {
    return absl::InvalidArgumentError(
        "santext.sensitive_percentile must lie in [0, 1]");
  }
  if (!(santext.p_nonsensitive >= 0.0 && santext.p_nonsensitive <= 1.0)) {
    return absl::InvalidArgumentError(
        "santext.p_nonsensitive must lie in [0, 1]");
  }
  if (id == MechanismId::kSanTextPlus && santext.freq_file.empty()) {
    return absl::InvalidArgumentError(
        "santext_plus requires a reference frequency file (freq_file)");
  }
  return absl::OkStatus();
}

absl::StatusOr<MechanismConfig> MechanismConfig::FromJson(const json& object) {
  if (!object.is_object() || !object.contains("id") ||
      !object["id"].is_string()) {
    return absl::InvalidArgumentError("mechanism must be an object with an `id`");
  }
  MechanismConfig config;
  ASSIGN_OR_RETURN(config.id, ParseMechanismId(object["id"].get<std::string>()));
  static const std::set<std::string> kKnown = {
      "id",          "normalize",      "lambda",
      "num_lists",   "projection_seed", "candidate_k",
      "plus",        "sensitive_percentile", "p_nonsensitive",
      "freq_file",   "lowercase",      "normalize_utility"};
  for (auto it = object.begin(); it != object.end(); ++it) {
    if (!kKnown.contains(it.key())) {
      return absl::InvalidArgumentError(
          StrCat("unknown mechanism field `", it.key(), "`"));
    }
  }
  RETURN_IF_ERROR(ReadKey(object, "normalize", &config.cmp.normalize));
  RETURN_IF_ERROR(ReadKey(object, "lambda", &config.mahalanobis.lambda));
  RETURN_IF_ERROR(ReadKey(object, "num_lists", &config.diffractor.num_lists));
  RETURN_IF_ERROR(
      ReadKey(object, "projection_seed", &config.diffractor.projection_seed));
  RETURN_IF_ERROR(ReadKey(object, "candidate_k", &config.santext.candidate_k));
  RETURN_IF_ERROR(ReadKey(object, "sensitive_percentile",
                          &config.santext.sensitive_percentile));
  RETURN_IF_ERROR(
      ReadKey(object, "p_nonsensitive", &config.santext.p_nonsensitive));
  RETURN_IF_ERROR(ReadKey(object, "freq_file", &config.santext.freq_file));
  RETURN_IF_ERROR(ReadKey(object, "lowercase", &config.santext.lowercase));
  RETURN_IF_ERROR(ReadKey(object, "normalize_utility",
                          &config.santext.normalize_utility));
  bool plus = false;
  RETURN_IF_ERROR(ReadKey(object, "plus", &plus));
  if (plus) {
    if (config.id != MechanismId::kSanText &&
        config.id != MechanismId::kSanTextPlus) {
      return absl::InvalidArgumentError("`plus` only applies to santext");
    }
    config.id = MechanismId::kSanTextPlus;
  }
  RETURN_IF_ERROR(config.Validate());
  return config;
}

nlohmann::ordered_json MechanismConfig::ToJson() const {
  nlohmann::ordered_json out;
  out["id"] = MechanismName(id);
  switch (id) {
    case MechanismId::kCmp:
      out["normalize"] = cmp.normalize;
      break;
    case MechanismId::kMahalanobis:
      out["lambda"] = mahalanobis.lambda;
      break;
    case MechanismId::kDiffractor:
      out["num_lists"] = diffractor.num_lists;
      out["projection_seed"] = diffractor.projection_seed;
      break;
    case MechanismId::kSanTextPlus:
      out["sensitive_percentile"] = santext.sensitive_percentile;
      out["p_nonsensitive"] = santext.p_nonsensitive;
      out["freq_file"] = santext.freq_file;
      [[fallthrough]];
    case MechanismId::kSanText:
      out["candidate_k"] = santext.candidate_k;
      out["lowercase"] = santext.lowercase;
      out["normalize_utility"] = santext.normalize_utility;
      break;
  }
  return out;
}

Eigen::VectorXd CmpNoise(size_t dim, double eps, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd direction(static_cast<Eigen::Index>(dim));
  double norm = 0.0;
  while (norm == 0.0) {
    for (Eigen::Index k = 0; k < direction.size(); ++k) {
      direction[k] = normal(rng);
    }
    norm = direction.norm();
  }
  std::gamma_distribution<double> magnitude(static_cast<double>(dim),
                                            1.0 / eps);
  return direction * (magnitude(rng) / norm);
}

absl::StatusOr<SanitizeResult> CmpMechanism::Sanitize(std::string_view word,
                                                      double eps,
                                                      Rng& rng) const {
  const std::optional<size_t> index = store_->Lookup(word);
  if (!index) return PassThrough(word);
  RETURN_IF_ERROR(CheckEps(eps));
  const Eigen::VectorXd query =
      store_->Vector(*index) + CmpNoise(store_->dim(), eps, rng);
  ASSIGN_OR_RETURN(size_t out, store_->NearestIndex(query));
  return Released(word, *index, out, *store_);
}

Eigen::VectorXd MahalanobisMechanism::Noise(double eps, Rng& rng) const {
  return covariance_.sqrt_sigma * CmpNoise(store_->dim(), eps, rng);
}

absl::StatusOr<SanitizeResult> MahalanobisMechanism::Sanitize(
    std::string_view word, double eps, Rng& rng) const {
  const std::optional<size_t> index = store_->Lookup(word);
  if (!index) return PassThrough(word);
  RETURN_IF_ERROR(CheckEps(eps));
  const Eigen::VectorXd query = store_->Vector(*index) + Noise(eps, rng);
  ASSIGN_OR_RETURN(size_t out, store_->NearestIndex(query));
  return Released(word, *index, out, *store_);
}

absl::StatusOr<DiffractorLists> BuildDiffractorLists(const EmbeddingStore& store,
                                                     size_t num_lists,
                                                     uint64_t seed) {
  if (store.size() == 0) {
    return absl::InvalidArgumentError("cannot build lists over an empty store");
  }
  if (num_lists < 1) {
    return absl::InvalidArgumentError("num_lists must be >= 1");
  }
  if (store.size() > std::numeric_limits<uint32_t>::max()) {
    return absl::InvalidArgumentError("vocabulary too large for 1-D lists");
  }
  const size_t n = store.size();
  DiffractorLists lists;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (size_t l = 0; l < num_lists; ++l) {
    Rng rng = NamedRng(seed, "diffractor/projection", l);
    Eigen::VectorXd direction(static_cast<Eigen::Index>(store.dim()));
    for (Eigen::Index k = 0; k < direction.size(); ++k) {
      direction[k] = normal(rng);
    }
    normal.reset();
    std::vector<double> projected(n);
    for (size_t i = 0; i < n; ++i) {
      projected[i] = store.Vector(i).dot(direction);
    }
    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
      return projected[a] < projected[b] ||
             (projected[a] == projected[b] && a < b);
    });
    std::vector<uint32_t> position(n);
    for (size_t p = 0; p < n; ++p) position[order[p]] = static_cast<uint32_t>(p);
    lists.order.push_back(std::move(order));
    lists.position.push_back(std::move(position));
    lists.projections.push_back(std::move(direction));
  }
  return lists;
}

int64_t SampleTwoSidedGeometric(double eps, Rng& rng) {
  // Difference of two one-sided geometrics with Pr[G >= m] = exp(-eps m),
  // each drawn by inversion.
  constexpr double kMax = 4.0e18;
  auto one_sided = [&]() -> int64_t {
    const double u = 1.0 - rng.NextDouble();  // (0, 1]
    const double g = std::floor(-std::log(u) / eps);
    return static_cast<int64_t>(std::min(g, kMax));
  };
  const int64_t a = one_sided();
  const int64_t b = one_sided();
  return a - b;
}

double TwoSidedGeometricPmf(int64_t k, double eps) {
  const double a = std::exp(-eps);
  return (1.0 - a) / (1.0 + a) *
         std::exp(-eps * static_cast<double>(k < 0 ? -k : k));
}

absl::StatusOr<SanitizeResult> DiffractorMechanism::Sanitize(
    std::string_view word, double eps, Rng& rng) const {
  const std::optional<size_t> index = store_->Lookup(word);
  if (!index) return PassThrough(word);
  RETURN_IF_ERROR(CheckEps(eps));
  const size_t list = rng.NextIndex(lists_.num_lists());
  const int64_t last = static_cast<int64_t>(lists_.vocab_size()) - 1;
  const int64_t position = lists_.position[list][*index];
  const int64_t offset = SampleTwoSidedGeometric(eps, rng);
  // Saturating add; offsets can be huge for tiny eps.
  int64_t target;
  if (offset > last - position) {
    target = last;
  } else if (offset < -position) {
    target = 0;
  } else {
    target = position + offset;
  }
  return Released(word, *index,
                  lists_.order[list][static_cast<size_t>(target)], *store_);
}

absl::StatusOr<FrequencyTable> FrequencyTable::FromCounts(
    std::unordered_map<std::string, int64_t> counts,
    double sensitive_percentile) {
  if (!(sensitive_percentile >= 0.0 && sensitive_percentile <= 1.0)) {
    return absl::InvalidArgumentError("sensitive_percentile must lie in [0, 1]");
  }
  if (counts.empty()) {
    return absl::InvalidArgumentError("frequency table is empty");
  }
  std::vector<int64_t> sorted;
  sorted.reserve(counts.size());
  for (const auto& [word, count] : counts) sorted.push_back(count);
  std::sort(sorted.begin(), sorted.end());
  const size_t cut = static_cast<size_t>(
      std::floor(sensitive_percentile * static_cast<double>(sorted.size())));
  FrequencyTable table;
  table.cutoff_ = cut >= sorted.size()
                      ? std::numeric_limits<double>::infinity()
                      : static_cast<double>(sorted[cut]);
  table.counts_ = std::move(counts);
  return table;
}

absl::StatusOr<FrequencyTable> FrequencyTable::Load(
    const std::filesystem::path& path, double sensitive_percentile) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(
        StrCat("reference frequency file not found: ", path.string()));
  }
  std::unordered_map<std::string, int64_t> counts;
  std::string word;
  std::string count_text;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    if (!(fields >> word)) continue;
    int64_t count = 0;
    if (!(fields >> count_text) || !ParseNumber(count_text, &count) ||
        count < 0) {
      return absl::InvalidArgumentError(StrCat(
          path.string(), ":", line_no, ": expected `word count`"));
    }
    counts[word] += count;
  }
  return FromCounts(std::move(counts), sensitive_percentile);
}

int64_t FrequencyTable::count(std::string_view word) const {
  auto it = counts_.find(std::string(word));
  return it == counts_.end() ? 0 : it->second;
}

bool FrequencyTable::IsSensitive(std::string_view word) const {
  auto it = counts_.find(std::string(word));
  if (it == counts_.end()) return true;
  return static_cast<double>(it->second) < cutoff_;
}

GateDecision SanTextPlusGate(std::string_view word, const FrequencyTable& table,
                             const SanTextParams& params, Rng& rng) {
  if (table.IsSensitive(word)) return GateDecision::kSanitize;
  return rng.NextDouble() < params.p_nonsensitive ? GateDecision::kSanitize
                                                  : GateDecision::kKeep;
}

std::vector<double> ExponentialMechanismProbabilities(
    std::span<const double> distances, double eps, bool normalize_utility) {
  std::vector<double> probs(distances.size());
  if (distances.empty()) return probs;
  double scale = 1.0;
  if (normalize_utility) {
    const double largest = *std::max_element(distances.begin(), distances.end());
    if (largest > 0.0) scale = largest;
  }
  std::vector<double> logits(distances.size());
  for (size_t j = 0; j < distances.size(); ++j) {
    logits[j] = eps * (-distances[j] / scale) / 2.0;
  }
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (size_t j = 0; j < logits.size(); ++j) {
    probs[j] = std::exp(logits[j] - top);
    total += probs[j];
  }
  for (double& p : probs) p /= total;
  return probs;
}

SanTextMechanism::SanTextMechanism(std::shared_ptr<const EmbeddingStore> store,
                                   SanTextParams params,
                                   std::shared_ptr<const FrequencyTable> frequencies)
    : store_(std::move(store)),
      params_(std::move(params)),
      frequencies_(std::move(frequencies)) {}

const SanTextMechanism::Candidates& SanTextMechanism::CandidatesOf(
    size_t index) const {
  {
    std::shared_lock lock(cache_mutex_);
    auto it = cache_.find(index);
    if (it != cache_.end()) return *it->second;
  }
  auto candidates = std::make_unique<Candidates>();
  candidates->indices = store_->KNearest(index, params_.candidate_k);
  const Eigen::VectorXd self = store_->Vector(index);
  for (size_t c : candidates->indices) {
    candidates->distances.push_back(
        c == index ? 0.0 : std::sqrt(store_->SquaredDistanceTo(self, c)));
  }
  std::unique_lock lock(cache_mutex_);
  auto [it, inserted] = cache_.try_emplace(index, std::move(candidates));
  return *it->second;
}

absl::StatusOr<SanitizeResult> SanTextMechanism::Sanitize(std::string_view word,
                                                          double eps,
                                                          Rng& rng) const {
  const std::string key =
      params_.lowercase ? ToLowerAscii(word) : std::string(word);
  const std::optional<size_t> index =
      params_.lowercase ? store_->IndexOf(key) : store_->Lookup(key);
  if (frequencies_ != nullptr &&
      SanTextPlusGate(key, *frequencies_, params_, rng) == GateDecision::kKeep) {
    return SanitizeResult{key, /*oov=*/!index.has_value(), /*invoked=*/false};
  }
  if (!index) return PassThrough(key);
  if (!(eps >= 0.0)) {
    return absl::InvalidArgumentError(
        StrCat("epsilon must be non-negative, got ", eps));
  }
  const Candidates& candidates = CandidatesOf(*index);
  const std::vector<double> probs = ExponentialMechanismProbabilities(
      candidates.distances, eps, params_.normalize_utility);
  const double u = rng.NextDouble();
  double cumulative = 0.0;
  size_t pick = probs.size() - 1;
  for (size_t j = 0; j < probs.size(); ++j) {
    cumulative += probs[j];
    if (u < cumulative) {
      pick = j;
      break;
    }
  }
  const size_t out = candidates.indices[pick];
  return SanitizeResult{out == *index ? key : store_->word(out),
                        /*oov=*/false, /*invoked=*/true};
}

absl::StatusOr<std::unique_ptr<WordMechanism>> CreateMechanism(
    const MechanismConfig& config, std::shared_ptr<const EmbeddingStore> store) {
  RETURN_IF_ERROR(config.Validate());
  if (store == nullptr || store->size() == 0) {
    return absl::InvalidArgumentError("mechanism needs a non-empty store");
  }
  switch (config.id) {
    case MechanismId::kCmp: {
      if (config.cmp.normalize) {
        store = std::make_shared<const EmbeddingStore>(store->Normalized());
      }
      return std::make_unique<CmpMechanism>(std::move(store));
    }
    case MechanismId::kMahalanobis: {
      ASSIGN_OR_RETURN(CovarianceModel covariance,
                       ComputeCovariance(*store, config.mahalanobis.lambda));
      return std::make_unique<MahalanobisMechanism>(std::move(store),
                                                    std::move(covariance));
    }
    case MechanismId::kDiffractor: {
      ASSIGN_OR_RETURN(DiffractorLists lists,
                       BuildDiffractorLists(*store, config.diffractor.num_lists,
                                            config.diffractor.projection_seed));
      return std::make_unique<DiffractorMechanism>(std::move(store),
                                                   std::move(lists));
    }
    case MechanismId::kSanText:
      return std::make_unique<SanTextMechanism>(std::move(store),
                                                config.santext);
    case MechanismId::kSanTextPlus: {
      ASSIGN_OR_RETURN(FrequencyTable table,
                       FrequencyTable::Load(config.santext.freq_file,
                                            config.santext.sensitive_percentile));
      return std::make_unique<SanTextMechanism>(
          std::move(store), config.santext,
          std::make_shared<const FrequencyTable>(std::move(table)));
    }
  }
  return absl::InvalidArgumentError("unknown mechanism");
}

}  // namespace dptext
