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

#include "dptext/reconstruct.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <optional>
#include <set>
#include <thread>
#include <unordered_map>

#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

using ::nlohmann::json;
using ::nlohmann::ordered_json;

constexpr std::string_view kMarker = "Clean Text:";

constexpr std::string_view kInstructions =
    "You will be given a noisy_text document.\n\n"
    "Your task is to understand the semantic meaning of the text and decrypt "
    "the noisy text to its original form.\n\n"
    "It is important that the length of the text stays exactly the same. "
    "Only replace noisy words with reasonable substitutions. In some cases, "
    "words should remain the same.\n\n"
    "It is also crucial that the output clean text is coherent and follows a "
    "cohesive narrative.\n\n"
    "Provide your feedback as follows:\n\n"
    "Output:::\n"
    "Clean Text: (your rewritten text)\n\n"
    "Here are some examples of how to rewrite noisy texts:\n\n";

}  // namespace

absl::StatusOr<std::vector<FewShotPair>> MakeFewShotPairs(
    const Corpus& originals, const Corpus& sanitized) {
  std::unordered_map<std::string_view, const Document*> by_id;
  for (const Document& doc : sanitized.documents) by_id[doc.id] = &doc;
  std::vector<FewShotPair> pairs;
  for (const Document& doc : originals.documents) {
    auto it = by_id.find(doc.id);
    if (it == by_id.end()) {
      return absl::NotFoundError(
          StrCat("no sanitized version of held-out document '", doc.id, "'"));
    }
    pairs.push_back({doc.id, it->second->text, doc.text});
  }
  return pairs;
}

absl::StatusOr<std::vector<FewShotPair>> LoadFewShotPairs(
    const std::filesystem::path& path) {
  ASSIGN_OR_RETURN(std::string content, ReadFile(path));
  std::vector<FewShotPair> pairs;
  size_t line_no = 0;
  for (std::string_view line : Split(content, '\n')) {
    ++line_no;
    if (TrimAsciiWhitespace(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("noisy") ||
        !j.contains("clean") || !j["noisy"].is_string() ||
        !j["clean"].is_string()) {
      return absl::InvalidArgumentError(
          StrCat(path.string(), ":", line_no,
                 ": expected an object with string fields noisy and clean"));
    }
    FewShotPair pair{j.value("doc_id", ""), j["noisy"].get<std::string>(),
                     j["clean"].get<std::string>()};
    if (pair.noisy.empty() || pair.clean.empty()) {
      return absl::InvalidArgumentError(
          StrCat(path.string(), ":", line_no, ": empty pair text"));
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

absl::Status SaveFewShotPairs(const std::vector<FewShotPair>& pairs,
                              const std::filesystem::path& path) {
  std::string out;
  for (const FewShotPair& pair : pairs) {
    ordered_json j = {
        {"doc_id", pair.doc_id}, {"noisy", pair.noisy}, {"clean", pair.clean}};
    out += j.dump();
    out += '\n';
  }
  return WriteFileAtomic(path, out);
}

absl::StatusOr<std::string> BuildPrompt(const std::vector<FewShotPair>& pairs,
                                        std::string_view target,
                                        size_t required) {
  if (pairs.size() != required) {
    return absl::InvalidArgumentError(StrCat(
        "prompt needs exactly ", required, " example pairs, got ", pairs.size()));
  }
  std::string prompt(kInstructions);
  for (const FewShotPair& pair : pairs) {
    if (pair.noisy.empty() || pair.clean.empty()) {
      return absl::InvalidArgumentError("example pair with empty text");
    }
    prompt += StrCat("noisy_text: ", pair.noisy, "\n\nOutput:::\n", kMarker,
                     " ", pair.clean, "\n\n");
  }
  prompt += StrCat("Now here is the noisy text.\n\nnoisy_text: ", target,
                   "\n\nOutput:::\n", kMarker);
  return prompt;
}

absl::StatusOr<std::string> ParseCleanText(std::string_view raw) {
  const size_t pos = raw.rfind(kMarker);
  if (pos == std::string_view::npos) {
    return absl::InvalidArgumentError("response has no 'Clean Text:' marker");
  }
  return TrimAsciiWhitespace(raw.substr(pos + kMarker.size()));
}

absl::Status EndpointConfig::Validate() const {
  if (base_url.empty()) return absl::InvalidArgumentError("endpoint.base_url is empty");
  if (base_url.rfind("http://", 0) != 0 && base_url.rfind("https://", 0) != 0) {
    return absl::InvalidArgumentError(
        StrCat("endpoint.base_url must start with http:// or https://: ",
               base_url));
  }
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (base_url.rfind("https://", 0) == 0) {
    return absl::InvalidArgumentError(
        "endpoint.base_url uses https:// but this build has no TLS support "
        "(rebuild with OpenSSL)");
  }
#endif
  if (model.empty()) return absl::InvalidArgumentError("endpoint.model is empty");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    return absl::InvalidArgumentError("endpoint.temperature must be >= 0");
  }
  if (max_retries < 0) return absl::InvalidArgumentError("endpoint.max_retries must be >= 0");
  if (!(rate_limit >= 0.0)) return absl::InvalidArgumentError("endpoint.rate_limit must be >= 0");
  if (max_tokens <= 0) return absl::InvalidArgumentError("endpoint.max_tokens must be > 0");
  if (!(timeout_seconds > 0.0)) return absl::InvalidArgumentError("endpoint.timeout_seconds must be > 0");
  if (concurrency == 0) return absl::InvalidArgumentError("endpoint.concurrency must be > 0");
  if (!(initial_backoff_seconds >= 0.0) ||
      !(max_backoff_seconds >= initial_backoff_seconds)) {
    return absl::InvalidArgumentError(
        "endpoint backoff must satisfy 0 <= initial <= max");
  }
  return absl::OkStatus();
}

absl::StatusOr<EndpointConfig> EndpointConfig::FromJson(const json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("endpoint must be an object");
  EndpointConfig cfg;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "base_url") cfg.base_url = value.get<std::string>();
      else if (key == "model") cfg.model = value.get<std::string>();
      else if (key == "temperature") cfg.temperature = value.get<double>();
      else if (key == "max_retries") cfg.max_retries = value.get<int>();
      else if (key == "rate_limit") cfg.rate_limit = value.get<double>();
      else if (key == "api_key_env") cfg.api_key_env = value.get<std::string>();
      else if (key == "max_tokens") cfg.max_tokens = value.get<int>();
      else if (key == "timeout_seconds") cfg.timeout_seconds = value.get<double>();
      else if (key == "concurrency") cfg.concurrency = value.get<size_t>();
      else if (key == "initial_backoff_seconds") cfg.initial_backoff_seconds = value.get<double>();
      else if (key == "max_backoff_seconds") cfg.max_backoff_seconds = value.get<double>();
      else if (key == "api_key" || key == "key" || key == "token") {
        return absl::InvalidArgumentError(StrCat(
            "endpoint.", key,
            ": secrets are not accepted in config files; name an environment "
            "variable with endpoint.api_key_env"));
      } else {
        return absl::InvalidArgumentError(StrCat("endpoint: unknown key '", key, "'"));
      }
    } catch (const json::exception& e) {
      return absl::InvalidArgumentError(
          StrCat("endpoint.", key, ": wrong type (", e.what(), ")"));
    }
  }
  RETURN_IF_ERROR(cfg.Validate());
  return cfg;
}

ordered_json EndpointConfig::ToJson() const {
  return {{"base_url", base_url},
          {"model", model},
          {"temperature", temperature},
          {"max_retries", max_retries},
          {"rate_limit", rate_limit},
          {"api_key_env", api_key_env},
          {"max_tokens", max_tokens},
          {"timeout_seconds", timeout_seconds},
          {"concurrency", concurrency},
          {"initial_backoff_seconds", initial_backoff_seconds},
          {"max_backoff_seconds", max_backoff_seconds}};
}

bool IsFatalEndpointError(const absl::Status& status) {
  return status.code() == absl::StatusCode::kUnauthenticated ||
         status.code() == absl::StatusCode::kPermissionDenied;
}

absl::StatusOr<ReconstructionRun> ReconstructCorpus(
    const Corpus& sanitized, const std::vector<FewShotPair>& pairs,
    ChatClient& client, const ReconstructOptions& options) {
  RETURN_IF_ERROR(CheckUniqueIds(sanitized));
  std::set<std::string_view> pair_ids;
  for (const FewShotPair& pair : pairs) {
    if (!pair.doc_id.empty()) pair_ids.insert(pair.doc_id);
  }
  for (const Document& doc : sanitized.documents) {
    if (pair_ids.count(doc.id) != 0) {
      return absl::InvalidArgumentError(StrCat(
          "document '", doc.id, "' is also a few-shot example; examples must "
          "be held out of the reconstructed corpus"));
    }
  }
  // Validates the pair count once, up front.
  RETURN_IF_ERROR(BuildPrompt(pairs, "", options.required_pairs).status());

  const size_t n = sanitized.size();
  std::vector<std::optional<Document>> outputs(n);
  std::atomic<size_t> next{0};
  std::atomic<size_t> failures{0};
  std::mutex mutex;
  absl::Status fatal = absl::OkStatus();
  std::atomic<bool> abort{false};

  auto work = [&]() {
    while (!abort.load()) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      const Document& doc = sanitized.documents[i];
      Document out = doc;
      out.extra["reconstructed"] = true;
      absl::StatusOr<std::string> prompt =
          BuildPrompt(pairs, doc.text, options.required_pairs);
      absl::StatusOr<std::string> text = absl::UnknownError("unset");
      if (!prompt.ok()) {
        text = prompt.status();
      } else {
        absl::StatusOr<std::string> raw = client.Complete(doc.id, *prompt);
        if (!raw.ok() && IsFatalEndpointError(raw.status())) {
          std::lock_guard lock(mutex);
          if (fatal.ok()) fatal = raw.status();
          abort.store(true);
          return;
        }
        text = raw.ok() ? ParseCleanText(*raw) : raw.status();
      }
      if (text.ok()) {
        out.text = *std::move(text);
        out.tokens = Tokenize(out.text);
      } else {
        out.extra["reconstruction_failed"] = true;
        out.extra["reconstruction_error"] = std::string(text.status().message());
        failures.fetch_add(1);
      }
      outputs[i] = std::move(out);
    }
  };

  const size_t workers =
      std::max<size_t>(1, std::min(options.concurrency, std::max<size_t>(n, 1)));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    for (size_t w = 0; w < workers; ++w) threads.emplace_back(work);
    for (std::thread& t : threads) t.join();
  }
  RETURN_IF_ERROR(fatal);

  ReconstructionRun run;
  run.output.name = sanitized.name;
  for (std::optional<Document>& doc : outputs) {
    run.output.documents.push_back(std::move(*doc));
  }
  run.failures = failures.load();
  return run;
}

}  // namespace dptext
