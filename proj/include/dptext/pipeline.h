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

#ifndef DPTEXT_PIPELINE_H_
#define DPTEXT_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "absl/status/statusor.h"
#include "dptext/budget.h"
#include "dptext/corpus.h"
#include "dptext/mechanisms.h"

namespace dptext {

// Applies `mechanism` to every token of `doc` with epsilon `eps_word`. Token
// i draws from TokenRng(seed, doc.id, i). Id, author and label are copied;
// the text is regenerated from the output tokens. When `record` is given it
// receives the document's ledger row.
absl::StatusOr<Document> SanitizeDocument(const Document& doc,
                                          const WordMechanism& mechanism,
                                          double eps_word, uint64_t seed,
                                          LedgerRecord* record = nullptr);

struct SanitizeOptions {
  uint64_t seed = 0;
  size_t workers = 1;
  // Per-document progress log (JSONL). Rewritten in input order once the
  // run completes.
  std::filesystem::path run_log;
  // Reuse documents already completed in `run_log` under the same run_tag.
  bool resume = false;
  // Identifies the (mechanism, budget, seed) configuration in the run log.
  std::string run_tag;
};

struct SanitizationRun {
  Corpus output;
  BudgetLedger ledger;
  size_t resumed_documents = 0;
};

// Sanitizes each document with its own per-word epsilon from `policy`.
// Output order and the ledger follow input order; the result does not
// depend on `workers`.
absl::StatusOr<SanitizationRun> SanitizeCorpus(const Corpus& input,
                                               const WordMechanism& mechanism,
                                               const BudgetPolicy& policy,
                                               const SanitizeOptions& options);

}  // namespace dptext

#endif  // DPTEXT_PIPELINE_H_
