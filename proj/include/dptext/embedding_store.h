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

#ifndef DPTEXT_EMBEDDING_STORE_H_
#define DPTEXT_EMBEDDING_STORE_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "Eigen/Core"
#include "absl/status/statusor.h"

namespace dptext {

using RowMatrixF =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct VectorLoadReport {
  size_t lines_read = 0;
  size_t rows_accepted = 0;
  std::vector<size_t> rejected_lines;  // 1-based line numbers
  size_t duplicate_words = 0;
};

enum class NearestSearch {
  // Direct sum of squared differences over every row.
  kExact,
  // ||x||^2 - 2 q.x ranking over cached norms, followed by an exact re-check
  // of every row within the rounding bound of the best score. Always returns
  // the same index as kExact.
  kNormCached,
};

// Vocabulary of d-dimensional word vectors. Immutable after construction.
class EmbeddingStore {
 public:
  static absl::StatusOr<EmbeddingStore> FromRows(std::vector<std::string> words,
                                                 RowMatrixF matrix);

  // word2vec text layout: `word v1 ... vd` per line. A leading
  // `<count> <dim>` header line is accepted. Rows of the wrong arity are
  // rejected and reported; non-finite values are an error, as is a file
  // with no accepted rows. Later duplicates of a word are dropped.
  static absl::StatusOr<EmbeddingStore> LoadText(
      const std::filesystem::path& path, size_t expected_dim,
      VectorLoadReport* report = nullptr);

  // Binary cache: magic "DPTXEMB", u32 version, u64 rows, u64 dim, then per
  // row a u32-length-prefixed word followed by dim little-endian f32 values.
  static absl::StatusOr<EmbeddingStore> LoadBinary(
      const std::filesystem::path& path);
  absl::Status SaveBinary(const std::filesystem::path& path) const;

  // Dispatches on extension: ".bin" is the binary cache, anything else text.
  static absl::StatusOr<EmbeddingStore> Load(const std::filesystem::path& path,
                                             size_t expected_dim);

  size_t size() const { return words_.size(); }
  size_t dim() const { return static_cast<size_t>(matrix_.cols()); }
  const std::vector<std::string>& words() const { return words_; }
  const std::string& word(size_t index) const { return words_[index]; }
  const RowMatrixF& matrix() const { return matrix_; }
  double norm(size_t index) const { return norms_[index]; }

  std::optional<size_t> IndexOf(std::string_view word) const;
  // Exact match first, then the ASCII-lowercased form.
  std::optional<size_t> Lookup(std::string_view word) const;

  Eigen::VectorXd Vector(size_t index) const;
  double Distance(size_t a, size_t b) const;
  double SquaredDistanceTo(const Eigen::VectorXd& query, size_t index) const;

  // Index of the row closest to `query` in Euclidean distance; ties go to the
  // lowest index. Rows flagged in `excluded` (size() entries) are skipped.
  absl::StatusOr<size_t> NearestIndex(
      const Eigen::VectorXd& query, const std::vector<bool>* excluded = nullptr,
      NearestSearch search = NearestSearch::kNormCached) const;

  absl::StatusOr<std::string> NearestWord(
      const Eigen::VectorXd& query,
      std::span<const std::string> exclude = {}) const;

  // The k rows closest to row `index` (itself included, first), ordered by
  // distance then index.
  std::vector<size_t> KNearest(size_t index, size_t k) const;

  // Copy with every non-zero row scaled to unit length.
  EmbeddingStore Normalized() const;

 private:
  EmbeddingStore(std::vector<std::string> words, RowMatrixF matrix);

  std::vector<std::string> words_;
  std::unordered_map<std::string, size_t> index_;
  RowMatrixF matrix_;
  std::vector<double> norms_;
  std::vector<double> squared_norms_;
  double max_squared_norm_ = 0.0;
};

// Regularized covariance of the embedding rows:
//   sigma = lambda * SampleCov + (1 - lambda) * I
// with a symmetric square root (sqrt_sigma = V diag(sqrt(w)) V^T).
struct CovarianceModel {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd sqrt_sigma;
  Eigen::MatrixXd inv_sqrt_sigma;
  double lambda = 0.0;

  // || sigma^{-1/2} (a - b) ||
  double MahalanobisDistance(const Eigen::VectorXd& a,
                             const Eigen::VectorXd& b) const;
};

absl::StatusOr<CovarianceModel> ComputeCovariance(const EmbeddingStore& store,
                                                  double lambda);

// Factorizes an explicit covariance (used for hand-built noise models).
absl::StatusOr<CovarianceModel> CovarianceFromSigma(Eigen::MatrixXd sigma,
                                                    double lambda);

}  // namespace dptext

#endif  // DPTEXT_EMBEDDING_STORE_H_
