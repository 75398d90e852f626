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

#include "dptext/budget.h"

#include <charconv>
#include <cmath>


#include "dptext/strings.h"

namespace dptext {

std::string_view BudgetModeName(BudgetMode mode) {
  return mode == BudgetMode::kBounded ? "bounded" : "unbounded";
}

absl::StatusOr<BudgetMode> ParseBudgetMode(std::string_view name) {
  if (name == "bounded") return BudgetMode::kBounded;
  if (name == "unbounded") return BudgetMode::kUnbounded;
  return absl::InvalidArgumentError(
      StrCat("unknown budget mode '", name,
                   "' (expected bounded or unbounded)"));
}

absl::StatusOr<double> DatasetAvgWords(const Corpus& corpus) {
  if (corpus.documents.empty()) {
    return absl::InvalidArgumentError("average word count of an empty corpus");
  }
  size_t total = 0;
  for (const Document& doc : corpus.documents) total += doc.tokens.size();
  return static_cast<double>(total) / static_cast<double>(corpus.size());
}

int64_t DocBudget(double base_eps, double avg_words) {
  const double product = base_eps * avg_words;
  return static_cast<int64_t>(std::floor(product * (1.0 + 1e-12)));
}

absl::StatusOr<BudgetPolicy> BudgetPolicy::Create(double base_eps,
                                                  BudgetMode mode,
                                                  double avg_words) {
  if (!(base_eps > 0.0) || !std::isfinite(base_eps)) {
    return absl::InvalidArgumentError("base epsilon must be positive");
  }
  if (!(avg_words > 0.0) || !std::isfinite(avg_words)) {
    return absl::InvalidArgumentError("average word count must be positive");
  }
  const int64_t budget =
      mode == BudgetMode::kBounded ? DocBudget(base_eps, avg_words) : 0;
  return BudgetPolicy(base_eps, mode, avg_words, budget);
}

absl::StatusOr<double> BudgetPolicy::PerWordEps(size_t n_tokens) const {
  if (n_tokens == 0) {
    return absl::InvalidArgumentError("per-word epsilon of an empty document");
  }
  if (mode_ == BudgetMode::kUnbounded) return base_eps_;
  if (doc_budget_ <= 0) {
    return absl::FailedPreconditionError(StrCat(
        "document budget floor(", base_eps_, " * ", avg_words_,
        ") is zero; no positive per-word epsilon exists"));
  }
  return static_cast<double>(doc_budget_) / static_cast<double>(n_tokens);
}

absl::StatusOr<double> BudgetPolicy::ComposedEps(size_t n_tokens) const {
  auto per_word = PerWordEps(n_tokens);
  if (!per_word.ok()) return per_word.status();
  return *per_word * static_cast<double>(n_tokens);
}

std::string BudgetLedger::ToCsv() const {
  std::string out = "doc_id,n_tokens,per_word_eps,composed_eps,n_perturbed,n_oov\n";
  for (const LedgerRecord& r : records_) {
    fmt::format_to(std::back_inserter(out), "{},{},{:.17g},{:.17g},{},{}\n",
                   r.doc_id, r.n_tokens, r.per_word_eps, r.composed_eps,
                   r.n_perturbed, r.n_oov_passthrough);
  }
  return out;
}

absl::StatusOr<BudgetLedger> BudgetLedger::FromCsv(std::string_view csv) {
  BudgetLedger ledger;
  std::vector<std::string_view> lines =
      Split(csv, '\n', /*skip_empty=*/true);
  if (lines.empty() ||
      lines[0] != "doc_id,n_tokens,per_word_eps,composed_eps,n_perturbed,n_oov") {
    return absl::InvalidArgumentError("ledger CSV header mismatch");
  }
  for (size_t i = 1; i < lines.size(); ++i) {
    // Ids may contain commas; the five numeric columns are taken from the
    // right.
    std::vector<std::string_view> fields = Split(lines[i], ',');
    if (fields.size() < 6) {
      return absl::InvalidArgumentError(
          StrCat("ledger line ", i + 1, ": expected 6 fields"));
    }
    const size_t k = fields.size() - 5;
    LedgerRecord r;
    for (size_t j = 0; j < k; ++j) {
      if (j > 0) r.doc_id += ',';
      r.doc_id += fields[j];
    }
    if (!ParseNumber(fields[k], &r.n_tokens) ||
        !ParseNumber(fields[k + 1], &r.per_word_eps) ||
        !ParseNumber(fields[k + 2], &r.composed_eps) ||
        !ParseNumber(fields[k + 3], &r.n_perturbed) ||
        !ParseNumber(fields[k + 4], &r.n_oov_passthrough)) {
      return absl::InvalidArgumentError(
          StrCat("ledger line ", i + 1, ": malformed number"));
    }
    ledger.Append(std::move(r));
  }
  return ledger;
}

absl::Status BudgetLedger::Save(const std::filesystem::path& path) const {
  return WriteFileAtomic(path, ToCsv());
}

}  // namespace dptext
