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

#ifndef DPTEXT_CORPUS_H_
#define DPTEXT_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "json.hpp"

namespace dptext {

enum class TokenKind { kWord, kPunctuation, kNumeric, kOther };

std::string_view TokenKindName(TokenKind kind);

struct Token {
  std::string surface;
  TokenKind kind = TokenKind::kWord;

  bool operator==(const Token&) const = default;
};

// Kind is a pure function of the surface form.
TokenKind ClassifyToken(std::string_view surface);

Token MakeToken(std::string surface);

// Rule-based word tokenizer. Splits on whitespace, detaches ASCII
// punctuation into single-character tokens, and splits English clitics
// ("don't" -> "do" "n't", "it's" -> "it" "'s"). Decimal numbers ("3.5",
// "1,000") and word-internal hyphens/apostrophes stay attached. Non-ASCII
// bytes are treated as word characters. Case is preserved.
std::vector<Token> Tokenize(std::string_view text);

// Joins tokens with single spaces, except that punctuation tokens attach to
// the preceding token. Tokenize(Detokenize(Tokenize(s))) == Tokenize(s).
std::string Detokenize(std::span<const Token> tokens);

std::vector<std::string> Surfaces(std::span<const Token> tokens);

struct Document {
  std::string id;
  std::string author_id;
  std::optional<std::string> label;
  std::string text;
  std::vector<Token> tokens;
  // Fields beyond the base schema (sanitization and reconstruction
  // metadata); carried through load/save untouched.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();

  bool operator==(const Document&) const = default;
};

// Builds a document whose tokens are Tokenize(text).
Document MakeDocument(std::string id, std::string author_id,
                      std::optional<std::string> label, std::string text);

struct Corpus {
  std::string name;
  std::vector<Document> documents;

  size_t size() const { return documents.size(); }
  bool operator==(const Corpus&) const = default;
};

struct LineError {
  size_t line = 0;  // 1-based
  std::string message;
};

struct LoadReport {
  size_t lines_read = 0;
  std::vector<LineError> errors;

  nlohmann::json ToJson() const;
};

// JSONL with fields `id`, `author`, `text`, optional `label`; an optional
// `tokens` array of strings overrides tokenization of `text` (sanitized
// corpora carry their token lists so length is preserved exactly). Other
// fields land in Document::extra. Malformed lines are skipped and recorded
// in `report`; duplicate ids and an empty result are errors.
absl::StatusOr<Corpus> LoadCorpus(const std::filesystem::path& path,
                                  LoadReport* report = nullptr);

// Parses corpus JSONL from memory. `name` becomes Corpus::name.
absl::StatusOr<Corpus> ParseCorpus(std::string_view jsonl, std::string name,
                                   LoadReport* report = nullptr);

nlohmann::ordered_json DocumentToJson(const Document& doc);
std::string SerializeCorpus(const Corpus& corpus);

// Written to a sibling temp file and renamed into place.
absl::Status SaveCorpus(const Corpus& corpus,
                        const std::filesystem::path& path);

absl::Status WriteFileAtomic(const std::filesystem::path& path,
                             std::string_view contents);
absl::StatusOr<std::string> ReadFile(const std::filesystem::path& path);

absl::Status CheckUniqueIds(const Corpus& corpus);

// Seeded train/test partition. Test documents are selected per author
// (stratified) when every author has at least two documents, otherwise
// uniformly. Both halves keep the input order.
absl::StatusOr<std::pair<Corpus, Corpus>> SplitTrainTest(
    const Corpus& corpus, double test_fraction, uint64_t seed);

struct FewShotHoldout {
  std::vector<Document> held;
  Corpus rest;
};

// The first `n` documents are held out as few-shot material.
absl::StatusOr<FewShotHoldout> HoldoutFewShot(const Corpus& corpus, size_t n);

// Documents of `corpus` whose ids appear in `ids`, in the order of `ids`.
absl::StatusOr<Corpus> SelectByIds(const Corpus& corpus,
                                   std::span<const std::string> ids);

std::vector<std::string> Ids(const Corpus& corpus);

}  // namespace dptext

#endif  // DPTEXT_CORPUS_H_
