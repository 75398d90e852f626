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

#include "dptext/pipeline.h"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "dptext/rng.h"
#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

using ::nlohmann::ordered_json;

ordered_json LedgerToJson(const LedgerRecord& r) {
  return {{"doc_id", r.doc_id},
          {"n_tokens", r.n_tokens},
          {"per_word_eps", r.per_word_eps},
          {"composed_eps", r.composed_eps},
          {"n_perturbed", r.n_perturbed},
          {"n_oov", r.n_oov_passthrough}};
}

std::optional<LedgerRecord> LedgerFromJson(const ordered_json& j) {
  try {
    LedgerRecord r;
    r.doc_id = j.at("doc_id").get<std::string>();
    r.n_tokens = j.at("n_tokens").get<size_t>();
    r.per_word_eps = j.at("per_word_eps").get<double>();
    r.composed_eps = j.at("composed_eps").get<double>();
    r.n_perturbed = j.at("n_perturbed").get<size_t>();
    r.n_oov_passthrough = j.at("n_oov").get<size_t>();
    return r;
  } catch (const ordered_json::exception&) {
    return std::nullopt;
  }
}

struct LogEntry {
  Document document;
  LedgerRecord record;
};

// Completed entries of a previous run with a matching tag, keyed by doc id.
std::unordered_map<std::string, LogEntry> ReadRunLog(
    const std::filesystem::path& path, const std::string& run_tag) {
  std::unordered_map<std::string, LogEntry> entries;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    ordered_json j = ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    if (j.value("status", "") != "ok" || j.value("run_tag", "") != run_tag ||
        !j.contains("document") || !j.contains("ledger")) {
      continue;
    }
    auto parsed = ParseCorpus(j["document"].dump(), "log");
    auto record = LedgerFromJson(j["ledger"]);
    if (!parsed.ok() || !record) continue;
    Document doc = std::move(parsed->documents[0]);
    std::string id = doc.id;
    entries.insert_or_assign(std::move(id), LogEntry{std::move(doc), *record});
  }
  return entries;
}

}  // namespace

absl::StatusOr<Document> SanitizeDocument(const Document& doc,
                                          const WordMechanism& mechanism,
                                          double eps_word, uint64_t seed,
                                          LedgerRecord* record) {
  Document out;
  out.id = doc.id;
  out.author_id = doc.author_id;
  out.label = doc.label;
  out.extra = doc.extra;
  out.tokens.reserve(doc.tokens.size());
  size_t perturbed = 0;
  size_t oov = 0;
  for (size_t i = 0; i < doc.tokens.size(); ++i) {
    Rng rng = TokenRng(seed, doc.id, i);
    ASSIGN_OR_RETURN(SanitizeResult result,
                     mechanism.Sanitize(doc.tokens[i].surface, eps_word, rng));
    if (result.invoked) ++perturbed;
    if (result.oov) ++oov;
    out.tokens.push_back(MakeToken(std::move(result.output)));
  }
  out.text = Detokenize(out.tokens);
  const double composed = eps_word * static_cast<double>(doc.tokens.size());
  out.extra["sanitized"] = true;
  out.extra["mechanism"] = MechanismName(mechanism.id());
  out.extra["eps_word"] = doc.tokens.empty() ? 0.0 : eps_word;
  out.extra["composed_eps"] = doc.tokens.empty() ? 0.0 : composed;
  out.extra["seed"] = seed;
  if (record != nullptr) {
    *record = LedgerRecord{doc.id,
                           doc.tokens.size(),
                           doc.tokens.empty() ? 0.0 : eps_word,
                           doc.tokens.empty() ? 0.0 : composed,
                           perturbed,
                           oov};
  }
  return out;
}

absl::StatusOr<SanitizationRun> SanitizeCorpus(const Corpus& input,
                                               const WordMechanism& mechanism,
                                               const BudgetPolicy& policy,
                                               const SanitizeOptions& options) {
  RETURN_IF_ERROR(CheckUniqueIds(input));
  const size_t n = input.size();
  std::vector<std::optional<Document>> outputs(n);
  std::vector<LedgerRecord> records(n);
  std::vector<ordered_json> log_lines(n);

  SanitizationRun run;
  if (options.resume && !options.run_log.empty() &&
      std::filesystem::exists(options.run_log)) {
    auto previous = ReadRunLog(options.run_log, options.run_tag);
    for (size_t i = 0; i < n; ++i) {
      auto it = previous.find(input.documents[i].id);
      if (it == previous.end() ||
          it->second.record.n_tokens != input.documents[i].tokens.size()) {
        continue;
      }
      outputs[i] = std::move(it->second.document);
      records[i] = it->second.record;
      ++run.resumed_documents;
    }
  }

  std::ofstream log;
  if (!options.run_log.empty()) {
    if (options.run_log.has_parent_path()) {
      std::filesystem::create_directories(options.run_log.parent_path());
    }
    log.open(options.run_log, std::ios::app);
    if (!log) {
      return absl::PermissionDeniedError(
          StrCat("cannot open run log ", options.run_log.string()));
    }
  }
  std::mutex mutex;
  absl::Status first_error = absl::OkStatus();
  std::atomic<size_t> next{0};

  auto work = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      {
        std::lock_guard lock(mutex);
        if (!first_error.ok()) return;
      }
      const Document& doc = input.documents[i];
      ordered_json line = {{"index", i}, {"doc_id", doc.id},
                           {"run_tag", options.run_tag}};
      if (!outputs[i].has_value()) {
        absl::StatusOr<Document> result = absl::InternalError("unreached");
        if (doc.tokens.empty()) {
          result = SanitizeDocument(doc, mechanism, 0.0, options.seed,
                                    &records[i]);
        } else {
          absl::StatusOr<double> eps = policy.PerWordEps(doc.tokens.size());
          result = eps.ok() ? SanitizeDocument(doc, mechanism, *eps,
                                               options.seed, &records[i])
                            : absl::StatusOr<Document>(eps.status());
        }
        if (!result.ok()) {
          line["status"] = "error";
          line["message"] = std::string(result.status().message());
          std::lock_guard lock(mutex);
          if (log.is_open()) log << line.dump() << '\n' << std::flush;
          if (first_error.ok()) {
            first_error = absl::Status(
                result.status().code(),
                StrCat("document '", doc.id, "': ", std::string(result.status().message())));
          }
          return;
        }
        outputs[i] = std::move(*result);
      }
      line["status"] = "ok";
      line["ledger"] = LedgerToJson(records[i]);
      line["document"] = DocumentToJson(*outputs[i]);
      std::lock_guard lock(mutex);
      if (log.is_open()) log << line.dump() << '\n' << std::flush;
      log_lines[i] = std::move(line);
    }
  };

  const size_t workers = std::max<size_t>(1, std::min(options.workers, n));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w) threads.emplace_back(work);
    for (std::thread& t : threads) t.join();
  }
  if (log.is_open()) log.close();
  RETURN_IF_ERROR(first_error);

  if (!options.run_log.empty()) {
    std::string ordered;
    for (const ordered_json& line : log_lines) {
      ordered += line.dump();
      ordered += '\n';
    }
    RETURN_IF_ERROR(WriteFileAtomic(options.run_log, ordered));
  }

  run.output.name = input.name;
  run.output.documents.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    run.output.documents.push_back(std::move(*outputs[i]));
    run.ledger.Append(std::move(records[i]));
  }
  return run;
}

}  // namespace dptext
