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

#include "dptext/corpus.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "dptext/rng.h"
#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

using ::nlohmann::ordered_json;

constexpr std::string_view kClitics[] = {"s", "re", "ll", "ve", "d", "m"};

bool IsSpace(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool IsWordByte(unsigned char c) {
  return c >= 0x80 || std::isalnum(c) || c == '_';
}

bool IsDigit(unsigned char c) { return c >= '0' && c <= '9'; }

bool IsClitic(std::string_view suffix) {
  const std::string lower = ToLowerAscii(suffix);
  return std::find(std::begin(kClitics), std::end(kClitics), lower) !=
         std::end(kClitics);
}

void Emit(std::string_view surface, std::vector<Token>& out) {
  out.push_back(MakeToken(std::string(surface)));
}

// Splits trailing clitics off a word run, innermost last:
// "couldn't've" -> "could" "n't" "'ve".
void SplitClitics(std::string_view run, std::vector<Token>& out) {
  const size_t apostrophe = run.rfind('\'');
  if (apostrophe != std::string_view::npos && apostrophe > 0 &&
      IsClitic(run.substr(apostrophe + 1))) {
    SplitClitics(run.substr(0, apostrophe), out);
    Emit(run.substr(apostrophe), out);
    return;
  }
  if (run.size() > 3) {
    const std::string tail = ToLowerAscii(run.substr(run.size() - 3));
    if (tail == "n't" && run[run.size() - 4] != '\'') {
      Emit(run.substr(0, run.size() - 3), out);
      Emit(run.substr(run.size() - 3), out);
      return;
    }
  }
  Emit(run, out);
}

void TokenizeChunk(std::string_view chunk, std::vector<Token>& out) {
  const size_t n = chunk.size();
  size_t i = 0;
  while (i < n) {
    const unsigned char c = chunk[i];
    if (IsWordByte(c)) {
      size_t j = i + 1;
      while (j < n) {
        const unsigned char cj = chunk[j];
        if (IsWordByte(cj)) {
          ++j;
        } else if ((cj == '-' || cj == '\'') && j + 1 < n &&
                   IsWordByte(chunk[j + 1])) {
          j += 2;
        } else if ((cj == '.' || cj == ',') && IsDigit(chunk[j - 1]) &&
                   j + 1 < n && IsDigit(chunk[j + 1])) {
          j += 2;
        } else {
          break;
        }
      }
      SplitClitics(chunk.substr(i, j - i), out);
      i = j;
      continue;
    }
    if (c == '\'') {
      // A clitic standing on its own ("'s", "'ll") is kept whole.
      size_t j = i + 1;
      while (j < n && std::isalpha(static_cast<unsigned char>(chunk[j]))) ++j;
      if (j > i + 1 && (j == n || !IsWordByte(chunk[j])) &&
          IsClitic(chunk.substr(i + 1, j - i - 1))) {
        Emit(chunk.substr(i, j - i), out);
        i = j;
        continue;
      }
    }
    Emit(chunk.substr(i, 1), out);
    ++i;
  }
}

std::string ScalarToString(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

}  // namespace

std::string_view TokenKindName(TokenKind kind) {
  switch (kind) {
    case TokenKind::kWord:
      return "word";
    case TokenKind::kPunctuation:
      return "punctuation";
    case TokenKind::kNumeric:
      return "numeric";
    case TokenKind::kOther:
      return "other";
  }
  return "other";
}

TokenKind ClassifyToken(std::string_view surface) {
  if (surface.size() == 1) {
    const unsigned char c = surface[0];
    if (c < 0x80 && std::ispunct(c) && c != '_') return TokenKind::kPunctuation;
  }
  if (!surface.empty() && IsDigit(surface[0]) &&
      std::all_of(surface.begin(), surface.end(), [](unsigned char c) {
        return IsDigit(c) || c == '.' || c == ',';
      })) {
    return TokenKind::kNumeric;
  }
  if (std::any_of(surface.begin(), surface.end(), [](unsigned char c) {
        return c >= 0x80 || std::isalpha(c);
      })) {
    return TokenKind::kWord;
  }
  return TokenKind::kOther;
}

Token MakeToken(std::string surface) {
  const TokenKind kind = ClassifyToken(surface);
  return Token{std::move(surface), kind};
}

std::vector<Token> Tokenize(std::string_view text) {
  std::vector<Token> tokens;
  size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && IsSpace(text[i])) ++i;
    size_t j = i;
    while (j < text.size() && !IsSpace(text[j])) ++j;
    if (j > i) TokenizeChunk(text.substr(i, j - i), tokens);
    i = j;
  }
  return tokens;
}

std::string Detokenize(std::span<const Token> tokens) {
  std::string text;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0 && tokens[i].kind != TokenKind::kPunctuation) text += ' ';
    text += tokens[i].surface;
  }
  return text;
}

std::vector<std::string> Surfaces(std::span<const Token> tokens) {
  std::vector<std::string> out;
  out.reserve(tokens.size());
  for (const Token& token : tokens) out.push_back(token.surface);
  return out;
}

Document MakeDocument(std::string id, std::string author_id,
                      std::optional<std::string> label, std::string text) {
  Document doc;
  doc.id = std::move(id);
  doc.author_id = std::move(author_id);
  doc.label = std::move(label);
  doc.tokens = Tokenize(text);
  doc.text = std::move(text);
  return doc;
}

nlohmann::json LoadReport::ToJson() const {
  nlohmann::json errors_json = nlohmann::json::array();
  for (const LineError& error : errors) {
    errors_json.push_back({{"line", error.line}, {"error", error.message}});
  }
  return {{"lines_read", lines_read}, {"errors", errors_json}};
}

absl::Status CheckUniqueIds(const Corpus& corpus) {
  std::unordered_set<std::string> seen;
  std::set<std::string> duplicates;
  for (const Document& doc : corpus.documents) {
    if (!seen.insert(doc.id).second) duplicates.insert(doc.id);
  }
  if (!duplicates.empty()) {
    return absl::InvalidArgumentError(
        StrCat("duplicate document ids: ", StrJoin(duplicates, ", ")));
  }
  return absl::OkStatus();
}

absl::StatusOr<Corpus> ParseCorpus(std::string_view jsonl, std::string name,
                                   LoadReport* report) {
  LoadReport local;
  LoadReport& rep = report != nullptr ? *report : local;
  Corpus corpus;
  corpus.name = std::move(name);
  size_t line_no = 0;
  size_t start = 0;
  while (start < jsonl.size()) {
    size_t end = jsonl.find('\n', start);
    if (end == std::string_view::npos) end = jsonl.size();
    std::string_view line = jsonl.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return IsSpace(c); })) {
      continue;
    }
    ++rep.lines_read;
    ordered_json record = ordered_json::parse(line, nullptr, false);
    if (record.is_discarded() || !record.is_object()) {
      rep.errors.push_back({line_no, "not a JSON object"});
      continue;
    }
    std::string missing;
    for (const char* field : {"id", "author", "text"}) {
      if (!record.contains(field) || record[field].is_null() ||
          record[field].is_structured()) {
        missing = field;
        break;
      }
    }
    if (!missing.empty()) {
      rep.errors.push_back({line_no, StrCat("missing or invalid field `",
                                                  missing, "`")});
      continue;
    }
    if (!record["text"].is_string()) {
      rep.errors.push_back({line_no, "field `text` must be a string"});
      continue;
    }
    Document doc;
    doc.id = ScalarToString(record["id"]);
    doc.author_id = ScalarToString(record["author"]);
    doc.text = record["text"].get<std::string>();
    if (record.contains("label") && !record["label"].is_null()) {
      if (record["label"].is_structured()) {
        rep.errors.push_back({line_no, "field `label` must be a scalar"});
        continue;
      }
      doc.label = ScalarToString(record["label"]);
    }
    bool bad_tokens = false;
    if (record.contains("tokens")) {
      const ordered_json& tokens = record["tokens"];
      if (!tokens.is_array()) {
        bad_tokens = true;
      } else {
        for (const auto& token : tokens) {
          if (!token.is_string() || token.get<std::string>().empty()) {
            bad_tokens = true;
            break;
          }
          doc.tokens.push_back(MakeToken(token.get<std::string>()));
        }
      }
    } else {
      doc.tokens = Tokenize(doc.text);
    }
    if (bad_tokens) {
      rep.errors.push_back(
          {line_no, "field `tokens` must be an array of non-empty strings"});
      continue;
    }
    for (auto it = record.begin(); it != record.end(); ++it) {
      const std::string& key = it.key();
      if (key == "id" || key == "author" || key == "text" || key == "label" ||
          key == "tokens") {
        continue;
      }
      doc.extra[key] = it.value();
    }
    corpus.documents.push_back(std::move(doc));
  }
  RETURN_IF_ERROR(CheckUniqueIds(corpus));
  if (corpus.documents.empty()) {
    return absl::InvalidArgumentError(
        StrCat("corpus '", corpus.name, "' is empty"));
  }
  return corpus;
}

absl::StatusOr<std::string> ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(StrCat("cannot open ", path.string()));
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

absl::StatusOr<Corpus> LoadCorpus(const std::filesystem::path& path,
                                  LoadReport* report) {
  ASSIGN_OR_RETURN(std::string contents, ReadFile(path));
  return ParseCorpus(contents, path.stem().string(), report);
}

ordered_json DocumentToJson(const Document& doc) {
  ordered_json record;
  record["id"] = doc.id;
  record["author"] = doc.author_id;
  if (doc.label.has_value()) record["label"] = *doc.label;
  record["text"] = doc.text;
  for (auto it = doc.extra.begin(); it != doc.extra.end(); ++it) {
    record[it.key()] = it.value();
  }
  if (Tokenize(doc.text) != doc.tokens) {
    record["tokens"] = Surfaces(doc.tokens);
  }
  return record;
}

std::string SerializeCorpus(const Corpus& corpus) {
  std::string out;
  for (const Document& doc : corpus.documents) {
    out += DocumentToJson(doc).dump();
    out += '\n';
  }
  return out;
}

absl::Status WriteFileAtomic(const std::filesystem::path& path,
                             std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::filesystem::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      return absl::PermissionDeniedError(
          StrCat("cannot write ", temp.string()));
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      return absl::InternalError(StrCat("short write to ", temp.string()));
    }
  }
  std::filesystem::rename(temp, path, ec);
  if (ec) {
    return absl::InternalError(
        StrCat("rename to ", path.string(), " failed: ", ec.message()));
  }
  return absl::OkStatus();
}

absl::Status SaveCorpus(const Corpus& corpus,
                        const std::filesystem::path& path) {
  return WriteFileAtomic(path, SerializeCorpus(corpus));
}

absl::StatusOr<std::pair<Corpus, Corpus>> SplitTrainTest(
    const Corpus& corpus, double test_fraction, uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    return absl::InvalidArgumentError("test_fraction must lie in (0, 1)");
  }
  const size_t n = corpus.size();
  if (n < 2) {
    return absl::InvalidArgumentError(
        "cannot split a corpus with fewer than 2 documents");
  }
  const size_t target = std::clamp<size_t>(
      static_cast<size_t>(std::llround(test_fraction * static_cast<double>(n))),
      1, n - 1);

  // Authors in order of first appearance.
  std::vector<std::string> authors;
  std::unordered_map<std::string, std::vector<size_t>> by_author;
  for (size_t i = 0; i < n; ++i) {
    auto [it, inserted] = by_author.try_emplace(corpus.documents[i].author_id);
    if (inserted) authors.push_back(corpus.documents[i].author_id);
    it->second.push_back(i);
  }
  const bool stratify =
      std::all_of(authors.begin(), authors.end(),
                  [&](const std::string& a) { return by_author[a].size() >= 2; });

  Rng rng = NamedRng(seed, "split");
  auto shuffle = [&rng](std::vector<size_t>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[rng.NextIndex(i)]);
    }
  };

  std::vector<bool> in_test(n, false);
  if (!stratify) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    shuffle(order);
    for (size_t k = 0; k < target; ++k) in_test[order[k]] = true;
  } else {
    // Largest-remainder allocation of `target` slots, at least one test and
    // one train document per author.
    const size_t groups = authors.size();
    std::vector<size_t> quota(groups);
    std::vector<double> remainder(groups);
    size_t assigned = 0;
    for (size_t g = 0; g < groups; ++g) {
      const size_t size = by_author[authors[g]].size();
      const double exact = test_fraction * static_cast<double>(size);
      const size_t base = static_cast<size_t>(std::floor(exact));
      quota[g] = std::clamp<size_t>(base, 1, size - 1);
      remainder[g] = exact - static_cast<double>(base);
      assigned += quota[g];
    }
    std::vector<size_t> rank(groups);
    std::iota(rank.begin(), rank.end(), 0);
    std::stable_sort(rank.begin(), rank.end(), [&](size_t a, size_t b) {
      return remainder[a] > remainder[b];
    });
    bool progress = true;
    while (assigned < target && progress) {
      progress = false;
      for (size_t g : rank) {
        if (assigned >= target) break;
        if (quota[g] + 1 < by_author[authors[g]].size()) {
          ++quota[g];
          ++assigned;
          progress = true;
        }
      }
    }
    progress = true;
    while (assigned > target && progress) {
      progress = false;
      for (auto it = rank.rbegin(); it != rank.rend(); ++it) {
        if (assigned <= target) break;
        if (quota[*it] > 1) {
          --quota[*it];
          --assigned;
          progress = true;
        }
      }
    }
    for (size_t g = 0; g < groups; ++g) {
      std::vector<size_t> members = by_author[authors[g]];
      shuffle(members);
      for (size_t k = 0; k < quota[g]; ++k) in_test[members[k]] = true;
    }
  }

  Corpus train{corpus.name + "/train", {}};
  Corpus test{corpus.name + "/test", {}};
  for (size_t i = 0; i < n; ++i) {
    (in_test[i] ? test : train).documents.push_back(corpus.documents[i]);
  }
  return std::make_pair(std::move(train), std::move(test));
}

absl::StatusOr<FewShotHoldout> HoldoutFewShot(const Corpus& corpus, size_t n) {
  if (corpus.size() <= n) {
    return absl::InvalidArgumentError(StrCat(
        "corpus has ", corpus.size(), " documents; holding out ", n,
        " leaves nothing to attack"));
  }
  FewShotHoldout out;
  out.held.assign(corpus.documents.begin(), corpus.documents.begin() + n);
  out.rest.name = corpus.name;
  out.rest.documents.assign(corpus.documents.begin() + n,
                            corpus.documents.end());
  return out;
}

absl::StatusOr<Corpus> SelectByIds(const Corpus& corpus,
                                   std::span<const std::string> ids) {
  std::unordered_map<std::string_view, const Document*> index;
  for (const Document& doc : corpus.documents) index.emplace(doc.id, &doc);
  Corpus out{corpus.name, {}};
  out.documents.reserve(ids.size());
  for (const std::string& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      return absl::NotFoundError(
          StrCat("document '", id, "' missing from corpus '",
                       corpus.name, "'"));
    }
    out.documents.push_back(*it->second);
  }
  return out;
}

std::vector<std::string> Ids(const Corpus& corpus) {
  std::vector<std::string> ids;
  ids.reserve(corpus.size());
  for (const Document& doc : corpus.documents) ids.push_back(doc.id);
  return ids;
}

}  // namespace dptext
