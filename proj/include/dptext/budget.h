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

#ifndef DPTEXT_BUDGET_H_
#define DPTEXT_BUDGET_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dptext/corpus.h"

namespace dptext {

enum class BudgetMode { kBounded, kUnbounded };

std::string_view BudgetModeName(BudgetMode mode);
absl::StatusOr<BudgetMode> ParseBudgetMode(std::string_view name);

// Mean token count over all documents.
absl::StatusOr<double> DatasetAvgWords(const Corpus& corpus);

// floor(base_eps * avg_words). A relative slack of 1e-12 absorbs products
// such as 0.29 * 100 landing just below an integer.
int64_t DocBudget(double base_eps, double avg_words);

// How a per-word epsilon is derived for each document.
//
// Bounded: every document gets the same composed budget
// doc_budget = floor(base_eps * avg_words), split evenly over its tokens.
// Unbounded: every token gets base_eps, so the composed budget grows with
// document length.
class BudgetPolicy {
 public:
  static absl::StatusOr<BudgetPolicy> Create(double base_eps, BudgetMode mode,
                                             double avg_words);

  double base_eps() const { return base_eps_; }
  BudgetMode mode() const { return mode_; }
  double avg_words() const { return avg_words_; }
  int64_t doc_budget() const { return doc_budget_; }

  absl::StatusOr<double> PerWordEps(size_t n_tokens) const;
  // Basic composition: per-word epsilon times token count.
  absl::StatusOr<double> ComposedEps(size_t n_tokens) const;

 private:
  BudgetPolicy(double base_eps, BudgetMode mode, double avg_words,
               int64_t doc_budget)
      : base_eps_(base_eps),
        mode_(mode),
        avg_words_(avg_words),
        doc_budget_(doc_budget) {}

  double base_eps_;
  BudgetMode mode_;
  double avg_words_;
  int64_t doc_budget_;
};

struct LedgerRecord {
  std::string doc_id;
  size_t n_tokens = 0;
  double per_word_eps = 0.0;
  double composed_eps = 0.0;
  // Tokens that went through a mechanism invocation.
  size_t n_perturbed = 0;
  // Tokens missing from the vocabulary, released unchanged. They are still
  // counted in composed_eps.
  size_t n_oov_passthrough = 0;

  bool operator==(const LedgerRecord&) const = default;
};

class BudgetLedger {
 public:
  void Append(LedgerRecord record) { records_.push_back(std::move(record)); }
  const std::vector<LedgerRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }

  // Header `doc_id,n_tokens,per_word_eps,composed_eps,n_perturbed,n_oov`;
  // reals printed with 17 significant digits.
  std::string ToCsv() const;
  static absl::StatusOr<BudgetLedger> FromCsv(std::string_view csv);
  absl::Status Save(const std::filesystem::path& path) const;

 private:
  std::vector<LedgerRecord> records_;
};

}  // namespace dptext

#endif  // DPTEXT_BUDGET_H_
