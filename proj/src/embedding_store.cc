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

#include "dptext/embedding_store.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "Eigen/Eigenvalues"
#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

constexpr char kBinaryMagic[8] = {'D', 'P', 'T', 'X', 'E', 'M', 'B', '\0'};
constexpr uint32_t kBinaryVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary embedding cache assumes a little-endian host");

std::vector<std::string_view> SplitFields(std::string_view line) {
  std::vector<std::string_view> fields;
  size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

bool ParseDouble(std::string_view text, double* value) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, *value);
  return ec == std::errc() && ptr == end;
}

bool IsUnsigned(std::string_view text) {
  return !text.empty() && std::all_of(text.begin(), text.end(), [](char c) {
    return c >= '0' && c <= '9';
  });
}

template <typename T>
void WritePod(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
bool ReadPod(std::istream& in, T* value) {
  return static_cast<bool>(in.read(reinterpret_cast<char*>(value), sizeof(T)));
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::vector<std::string> words,
                               RowMatrixF matrix)
    : words_(std::move(words)), matrix_(std::move(matrix)) {
  index_.reserve(words_.size());
  norms_.resize(words_.size());
  squared_norms_.resize(words_.size());
  for (size_t i = 0; i < words_.size(); ++i) {
    index_.emplace(words_[i], i);
    double sq = 0.0;
    for (Eigen::Index k = 0; k < matrix_.cols(); ++k) {
      const double v = matrix_(static_cast<Eigen::Index>(i), k);
      sq += v * v;
    }
    squared_norms_[i] = sq;
    norms_[i] = std::sqrt(sq);
    max_squared_norm_ = std::max(max_squared_norm_, sq);
  }
}

absl::StatusOr<EmbeddingStore> EmbeddingStore::FromRows(
    std::vector<std::string> words, RowMatrixF matrix) {
  if (static_cast<Eigen::Index>(words.size()) != matrix.rows()) {
    return absl::InvalidArgumentError(
        StrCat("vocabulary has ", words.size(), " words but matrix has ",
                     matrix.rows(), " rows"));
  }
  if (words.empty() || matrix.cols() == 0) {
    return absl::InvalidArgumentError("embedding store is empty");
  }
  if (!matrix.allFinite()) {
    return absl::InvalidArgumentError("embedding matrix has non-finite values");
  }
  std::unordered_set<std::string_view> seen;
  for (const std::string& word : words) {
    if (word.empty()) {
      return absl::InvalidArgumentError("empty vocabulary word");
    }
    if (!seen.insert(word).second) {
      return absl::InvalidArgumentError(
          StrCat("duplicate vocabulary word '", word, "'"));
    }
  }
  return EmbeddingStore(std::move(words), std::move(matrix));
}

absl::StatusOr<EmbeddingStore> EmbeddingStore::LoadText(
    const std::filesystem::path& path, size_t expected_dim,
    VectorLoadReport* report) {
  std::ifstream in(path);
  if (!in) {
    return absl::NotFoundError(StrCat("cannot open ", path.string()));
  }
  VectorLoadReport local;
  VectorLoadReport& rep = report != nullptr ? *report : local;
  std::vector<std::string> words;
  std::vector<float> values;
  std::unordered_set<std::string> seen;
  size_t dim = expected_dim;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::vector<std::string_view> fields = SplitFields(line);
    if (fields.empty()) continue;
    ++rep.lines_read;
    if (line_no == 1 && fields.size() == 2 && IsUnsigned(fields[0]) &&
        IsUnsigned(fields[1])) {
      continue;  // word2vec header
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() != dim + 1) {
      rep.rejected_lines.push_back(line_no);
      continue;
    }
    const size_t start = values.size();
    bool parsed = true;
    for (size_t k = 1; k <= dim; ++k) {
      double v = 0.0;
      if (!ParseDouble(fields[k], &v)) {
        parsed = false;
        break;
      }
      if (!std::isfinite(v) ||
          std::abs(v) > std::numeric_limits<float>::max()) {
        return absl::InvalidArgumentError(StrCat(
            path.string(), ":", line_no, ": non-finite vector value"));
      }
      values.push_back(static_cast<float>(v));
    }
    if (!parsed) {
      values.resize(start);
      rep.rejected_lines.push_back(line_no);
      continue;
    }
    std::string word(fields[0]);
    if (!seen.insert(word).second) {
      values.resize(start);
      ++rep.duplicate_words;
      continue;
    }
    words.push_back(std::move(word));
  }
  rep.rows_accepted = words.size();
  if (words.empty()) {
    return absl::InvalidArgumentError(
        StrCat(path.string(), ": no vectors of dimension ", dim));
  }
  RowMatrixF matrix = Eigen::Map<RowMatrixF>(
      values.data(), static_cast<Eigen::Index>(words.size()),
      static_cast<Eigen::Index>(dim));
  return FromRows(std::move(words), std::move(matrix));
}

absl::StatusOr<EmbeddingStore> EmbeddingStore::LoadBinary(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    return absl::NotFoundError(StrCat("cannot open ", path.string()));
  }
  char magic[8];
  uint32_t version = 0;
  uint64_t rows = 0, dim = 0;
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kBinaryMagic, sizeof(magic)) != 0) {
    return absl::InvalidArgumentError(
        StrCat(path.string(), ": not an embedding cache"));
  }
  if (!ReadPod(in, &version) || version != kBinaryVersion) {
    return absl::InvalidArgumentError(
        StrCat(path.string(), ": unsupported cache version ", version));
  }
  if (!ReadPod(in, &rows) || !ReadPod(in, &dim)) {
    return absl::DataLossError(StrCat(path.string(), ": truncated"));
  }
  std::vector<std::string> words;
  words.reserve(rows);
  RowMatrixF matrix(static_cast<Eigen::Index>(rows),
                    static_cast<Eigen::Index>(dim));
  for (uint64_t r = 0; r < rows; ++r) {
    uint32_t length = 0;
    if (!ReadPod(in, &length)) {
      return absl::DataLossError(StrCat(path.string(), ": truncated"));
    }
    std::string word(length, '\0');
    if (!in.read(word.data(), length) ||
        !in.read(reinterpret_cast<char*>(matrix.row(static_cast<Eigen::Index>(r)).data()),
                 static_cast<std::streamsize>(dim * sizeof(float)))) {
      return absl::DataLossError(StrCat(path.string(), ": truncated"));
    }
    words.push_back(std::move(word));
  }
  return FromRows(std::move(words), std::move(matrix));
}

absl::Status EmbeddingStore::SaveBinary(
    const std::filesystem::path& path) const {
  std::filesystem::path temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) {
      return absl::PermissionDeniedError(
          StrCat("cannot write ", temp.string()));
    }
    out.write(kBinaryMagic, sizeof(kBinaryMagic));
    WritePod(out, kBinaryVersion);
    WritePod(out, static_cast<uint64_t>(size()));
    WritePod(out, static_cast<uint64_t>(dim()));
    for (size_t r = 0; r < size(); ++r) {
      WritePod(out, static_cast<uint32_t>(words_[r].size()));
      out.write(words_[r].data(), static_cast<std::streamsize>(words_[r].size()));
      out.write(reinterpret_cast<const char*>(
                    matrix_.row(static_cast<Eigen::Index>(r)).data()),
                static_cast<std::streamsize>(dim() * sizeof(float)));
    }
    if (!out) return absl::InternalError("short write to embedding cache");
  }
  std::error_code ec;
  std::filesystem::rename(temp, path, ec);
  if (ec) return absl::InternalError(ec.message());
  return absl::OkStatus();
}

absl::StatusOr<EmbeddingStore> EmbeddingStore::Load(
    const std::filesystem::path& path, size_t expected_dim) {
  if (path.extension() == ".bin") {
    ASSIGN_OR_RETURN(EmbeddingStore store, LoadBinary(path));
    if (expected_dim != 0 && store.dim() != expected_dim) {
      return absl::InvalidArgumentError(
          StrCat(path.string(), ": dimension ", store.dim(),
                       " does not match expected ", expected_dim));
    }
    return store;
  }
  return LoadText(path, expected_dim);
}

std::optional<size_t> EmbeddingStore::IndexOf(std::string_view word) const {
  auto it = index_.find(std::string(word));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<size_t> EmbeddingStore::Lookup(std::string_view word) const {
  if (auto exact = IndexOf(word)) return exact;
  const std::string lower = ToLowerAscii(word);
  if (lower == word) return std::nullopt;
  return IndexOf(lower);
}

Eigen::VectorXd EmbeddingStore::Vector(size_t index) const {
  return matrix_.row(static_cast<Eigen::Index>(index)).cast<double>();
}

double EmbeddingStore::SquaredDistanceTo(const Eigen::VectorXd& query,
                                         size_t index) const {
  const float* row = matrix_.row(static_cast<Eigen::Index>(index)).data();
  double sum = 0.0;
  for (Eigen::Index k = 0; k < query.size(); ++k) {
    const double diff = query[k] - static_cast<double>(row[k]);
    sum += diff * diff;
  }
  return sum;
}

double EmbeddingStore::Distance(size_t a, size_t b) const {
  return std::sqrt(SquaredDistanceTo(Vector(a), b));
}

absl::StatusOr<size_t> EmbeddingStore::NearestIndex(
    const Eigen::VectorXd& query, const std::vector<bool>* excluded,
    NearestSearch search) const {
  if (static_cast<size_t>(query.size()) != dim()) {
    return absl::InvalidArgumentError(StrCat(
        "query has dimension ", query.size(), ", store has ", dim()));
  }
  if (!query.allFinite()) {
    return absl::InvalidArgumentError("query vector is not finite");
  }
  auto skip = [excluded](size_t i) {
    return excluded != nullptr && (*excluded)[i];
  };
  const size_t n = size();
  size_t best = n;
  double best_value = std::numeric_limits<double>::infinity();

  if (search == NearestSearch::kExact) {
    for (size_t i = 0; i < n; ++i) {
      if (skip(i)) continue;
      const double d = SquaredDistanceTo(query, i);
      if (d < best_value) {
        best_value = d;
        best = i;
      }
    }
  } else {
    std::vector<double> scores(n, std::numeric_limits<double>::infinity());
    double best_score = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      if (skip(i)) continue;
      const float* row = matrix_.row(static_cast<Eigen::Index>(i)).data();
      double dot = 0.0;
      for (Eigen::Index k = 0; k < query.size(); ++k) dot += query[k] * row[k];
      scores[i] = squared_norms_[i] - 2.0 * dot;
      best_score = std::min(best_score, scores[i]);
    }
    if (std::isfinite(best_score)) {
      // Generous bound on the disagreement between the expanded and the
      // direct form; every row inside it is re-ranked exactly.
      const double q2 = query.squaredNorm();
      const double scale = q2 + 2.0 * std::sqrt(q2 * max_squared_norm_) +
                           max_squared_norm_;
      const double tolerance =
          8.0 * static_cast<double>(dim() + 2) *
          std::numeric_limits<double>::epsilon() * scale;
      for (size_t i = 0; i < n; ++i) {
        if (scores[i] > best_score + tolerance) continue;
        const double d = SquaredDistanceTo(query, i);
        if (d < best_value || (d == best_value && i < best)) {
          best_value = d;
          best = i;
        }
      }
    }
  }
  if (best == n) {
    return absl::FailedPreconditionError(
        "no vocabulary words left after exclusion");
  }
  return best;
}

absl::StatusOr<std::string> EmbeddingStore::NearestWord(
    const Eigen::VectorXd& query, std::span<const std::string> exclude) const {
  std::vector<bool> mask;
  if (!exclude.empty()) {
    mask.assign(size(), false);
    for (const std::string& word : exclude) {
      if (auto index = IndexOf(word)) mask[*index] = true;
    }
  }
  ASSIGN_OR_RETURN(size_t index,
                   NearestIndex(query, mask.empty() ? nullptr : &mask));
  return words_[index];
}

std::vector<size_t> EmbeddingStore::KNearest(size_t index, size_t k) const {
  const Eigen::VectorXd query = Vector(index);
  std::vector<std::pair<double, size_t>> all(size());
  for (size_t i = 0; i < size(); ++i) all[i] = {SquaredDistanceTo(query, i), i};
  k = std::min(k, size());
  // Self first regardless of duplicate vectors elsewhere.
  all[index].first = -1.0;
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k),
                    all.end());
  std::vector<size_t> out(k);
  for (size_t i = 0; i < k; ++i) out[i] = all[i].second;
  return out;
}

EmbeddingStore EmbeddingStore::Normalized() const {
  RowMatrixF normalized = matrix_;
  for (Eigen::Index r = 0; r < normalized.rows(); ++r) {
    const double n = norms_[static_cast<size_t>(r)];
    if (n > 0.0) normalized.row(r) /= static_cast<float>(n);
  }
  return EmbeddingStore(words_, std::move(normalized));
}

double CovarianceModel::MahalanobisDistance(const Eigen::VectorXd& a,
                                            const Eigen::VectorXd& b) const {
  return (inv_sqrt_sigma * (a - b)).norm();
}

absl::StatusOr<CovarianceModel> CovarianceFromSigma(Eigen::MatrixXd sigma,
                                                    double lambda) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    return absl::InvalidArgumentError("covariance must be square");
  }
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9) {
    return absl::InvalidArgumentError("covariance must be symmetric");
  }
  sigma = 0.5 * (sigma + sigma.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sigma);
  if (solver.info() != Eigen::Success) {
    return absl::FailedPreconditionError("eigendecomposition failed");
  }
  const Eigen::VectorXd& w = solver.eigenvalues();
  const double largest = std::max(1.0, w.cwiseAbs().maxCoeff());
  if (w.minCoeff() <= 1e-12 * largest) {
    return absl::FailedPreconditionError(StrCat(
        "covariance is not positive definite (smallest eigenvalue ",
        w.minCoeff(), "); lambda ", lambda, " is too high for this data"));
  }
  const Eigen::MatrixXd& v = solver.eigenvectors();
  CovarianceModel model;
  model.lambda = lambda;
  model.sqrt_sigma = v * w.cwiseSqrt().asDiagonal() * v.transpose();
  model.inv_sqrt_sigma =
      v * w.cwiseSqrt().cwiseInverse().asDiagonal() * v.transpose();
  model.sigma = std::move(sigma);
  return model;
}

absl::StatusOr<CovarianceModel> ComputeCovariance(const EmbeddingStore& store,
                                                  double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    return absl::InvalidArgumentError("lambda must lie in [0, 1]");
  }
  if (store.size() < 2) {
    return absl::InvalidArgumentError(
        "covariance needs at least two vocabulary rows");
  }
  const size_t d = store.dim();
  const Eigen::MatrixXd x = store.matrix().cast<double>();
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mean;
  const Eigen::MatrixXd sample =
      (centered.transpose() * centered) / static_cast<double>(store.size() - 1);
  Eigen::MatrixXd sigma =
      lambda * sample +
      (1.0 - lambda) * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d),
                                                 static_cast<Eigen::Index>(d));
  return CovarianceFromSigma(std::move(sigma), lambda);
}

}  // namespace dptext
