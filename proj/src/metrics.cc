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

#include "dptext/metrics.h"

#include <algorithm>
#include <cmath>

#include "Eigen/Eigenvalues"
#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

absl::Status CheckAligned(const EmbeddingSet& a, const EmbeddingSet& b) {
  RETURN_IF_ERROR(a.Validate());
  RETURN_IF_ERROR(b.Validate());
  if (a.doc_ids != b.doc_ids) {
    return absl::InvalidArgumentError(
        "embedding sets do not list the same documents in the same order");
  }
  if (a.vectors.cols() != b.vectors.cols()) {
    return absl::InvalidArgumentError(StrCat("embedding widths differ: ",
                                             a.vectors.cols(), " vs ",
                                             b.vectors.cols()));
  }
  return absl::OkStatus();
}

absl::StatusOr<Eigen::MatrixXd> UnitRows(const EmbeddingSet& set) {
  Eigen::MatrixXd out = set.vectors;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (!(norm > 0.0)) {
      return absl::InvalidArgumentError(
          StrCat("zero embedding for document '", set.doc_ids[i], "'"));
    }
    out.row(i) /= norm;
  }
  return out;
}

}  // namespace

absl::Status EmbeddingSet::Validate() const {
  if (doc_ids.empty()) return absl::InvalidArgumentError("empty embedding set");
  if (static_cast<size_t>(vectors.rows()) != doc_ids.size()) {
    return absl::InvalidArgumentError(StrCat(
        "embedding set has ", vectors.rows(), " rows for ", doc_ids.size(), " ids"));
  }
  if (vectors.cols() == 0) return absl::InvalidArgumentError("zero-width embeddings");
  if (!vectors.allFinite()) return absl::InvalidArgumentError("non-finite embedding");
  return absl::OkStatus();
}

std::string EmbeddingSet::ToCsv() const {
  std::string out = "doc_id";
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) fmt::format_to(std::back_inserter(out), ",e{}", c);
  out += '\n';
  for (size_t r = 0; r < doc_ids.size(); ++r) {
    out += doc_ids[r];
    for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
      fmt::format_to(std::back_inserter(out), ",{:.17g}", vectors(r, c));
    }
    out += '\n';
  }
  return out;
}

absl::StatusOr<EmbeddingSet> EmbeddingSet::FromCsv(std::string_view csv) {
  std::vector<std::string_view> lines = Split(csv, '\n', /*skip_empty=*/true);
  if (lines.empty()) return absl::InvalidArgumentError("empty embedding CSV");
  const size_t width = Split(lines[0], ',').size();
  if (width < 2 || Split(lines[0], ',')[0] != "doc_id") {
    return absl::InvalidArgumentError(
        "embedding CSV header must be doc_id,e0,...");
  }
  const size_t dim = width - 1;
  EmbeddingSet set;
  std::vector<double> values;
  for (size_t l = 1; l < lines.size(); ++l) {
    std::string_view line = lines[l];
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    std::vector<std::string_view> fields = Split(line, ',');
    if (fields.size() != width) {
      return absl::InvalidArgumentError(StrCat("embedding CSV line ", l + 1,
                                               ": expected ", width,
                                               " fields, got ", fields.size()));
    }
    set.doc_ids.emplace_back(fields[0]);
    for (size_t c = 1; c < width; ++c) {
      double v = 0.0;
      if (!ParseNumber(fields[c], &v) || !std::isfinite(v)) {
        return absl::InvalidArgumentError(StrCat(
            "embedding CSV line ", l + 1, ": bad value '", fields[c], "'"));
      }
      values.push_back(v);
    }
  }
  set.vectors.resize(static_cast<Eigen::Index>(set.doc_ids.size()),
                     static_cast<Eigen::Index>(dim));
  for (size_t r = 0; r < set.doc_ids.size(); ++r) {
    for (size_t c = 0; c < dim; ++c) set.vectors(r, c) = values[r * dim + c];
  }
  RETURN_IF_ERROR(set.Validate());
  return set;
}

absl::StatusOr<EmbeddingSet> EmbeddingSet::Load(const std::filesystem::path& path) {
  ASSIGN_OR_RETURN(std::string content, ReadFile(path));
  return FromCsv(content);
}

absl::Status EmbeddingSet::Save(const std::filesystem::path& path) const {
  return WriteFileAtomic(path, ToCsv());
}

absl::StatusOr<EmbeddingSet> EmbedCorpus(const Corpus& corpus,
                                         TextEmbedder& embedder) {
  if (corpus.documents.empty()) return absl::InvalidArgumentError("empty corpus");
  std::vector<std::string> texts;
  EmbeddingSet set;
  for (const Document& doc : corpus.documents) {
    texts.push_back(doc.text);
    set.doc_ids.push_back(doc.id);
  }
  ASSIGN_OR_RETURN(std::vector<std::vector<double>> rows, embedder.Embed(texts));
  if (rows.size() != texts.size() || rows.empty()) {
    return absl::DataLossError("embedder returned the wrong number of vectors");
  }
  const size_t dim = rows[0].size();
  set.vectors.resize(static_cast<Eigen::Index>(rows.size()),
                     static_cast<Eigen::Index>(dim));
  for (size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim) {
      return absl::DataLossError("embedder returned vectors of mixed width");
    }
    for (size_t c = 0; c < dim; ++c) set.vectors(r, c) = rows[r][c];
  }
  RETURN_IF_ERROR(set.Validate());
  return set;
}

absl::StatusOr<double> SemanticSimilarity(const EmbeddingSet& original,
                                          const EmbeddingSet& privatized) {
  RETURN_IF_ERROR(CheckAligned(original, privatized));
  ASSIGN_OR_RETURN(Eigen::MatrixXd o, UnitRows(original));
  ASSIGN_OR_RETURN(Eigen::MatrixXd p, UnitRows(privatized));
  double sum = 0.0;
  for (Eigen::Index i = 0; i < o.rows(); ++i) sum += o.row(i).dot(p.row(i));
  return sum / static_cast<double>(o.rows());
}

absl::StatusOr<std::vector<size_t>> CounterpartRanks(
    const EmbeddingSet& original, const EmbeddingSet& privatized) {
  RETURN_IF_ERROR(CheckAligned(original, privatized));
  ASSIGN_OR_RETURN(Eigen::MatrixXd o, UnitRows(original));
  ASSIGN_OR_RETURN(Eigen::MatrixXd p, UnitRows(privatized));
  const Eigen::Index n = o.rows();
  std::vector<size_t> ranks(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd sims = p * o.row(i).transpose();
    const double own = sims(i);
    size_t rank = 1;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (sims(j) > own || (sims(j) == own && j < i)) ++rank;
    }
    ranks[static_cast<size_t>(i)] = rank;
  }
  return ranks;
}

absl::StatusOr<double> Indistinguishability(const EmbeddingSet& original,
                                            const EmbeddingSet& privatized) {
  if (original.size() < 2) {
    return absl::InvalidArgumentError("indistinguishability needs >= 2 documents");
  }
  ASSIGN_OR_RETURN(std::vector<size_t> ranks,
                   CounterpartRanks(original, privatized));
  const double denom = static_cast<double>(ranks.size() - 1);
  double sum = 0.0;
  for (size_t k : ranks) sum += static_cast<double>(k - 1) / denom;
  return sum / static_cast<double>(ranks.size());
}

double Quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const size_t lo = static_cast<size_t>(std::floor(h));
  const size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

nlohmann::ordered_json TokenShiftSummary::ToJson() const {
  nlohmann::ordered_json out_list = nlohmann::ordered_json::array();
  for (const auto& [id, shift] : outliers) {
    out_list.push_back({{"doc_id", id}, {"shift", shift}});
  }
  return {{"n", n},         {"mean", mean},   {"p5", p5},
          {"p25", p25},     {"p50", p50},     {"p75", p75},
          {"p95", p95},     {"lower_fence", lower_fence},
          {"upper_fence", upper_fence},       {"outliers", out_list}};
}

absl::StatusOr<TokenShiftSummary> SummarizeShifts(
    const std::vector<std::string>& doc_ids, const std::vector<int64_t>& shifts) {
  if (shifts.empty() || shifts.size() != doc_ids.size()) {
    return absl::InvalidArgumentError("token shift needs one shift per document");
  }
  std::vector<double> sorted(shifts.begin(), shifts.end());
  std::sort(sorted.begin(), sorted.end());
  TokenShiftSummary s;
  s.n = shifts.size();
  s.p5 = Quantile(sorted, 0.05);
  s.p25 = Quantile(sorted, 0.25);
  s.p50 = Quantile(sorted, 0.50);
  s.p75 = Quantile(sorted, 0.75);
  s.p95 = Quantile(sorted, 0.95);
  const double iqr = s.p75 - s.p25;
  s.lower_fence = s.p25 - 1.5 * iqr;
  s.upper_fence = s.p75 + 1.5 * iqr;
  double sum = 0.0;
  size_t kept = 0;
  for (size_t i = 0; i < shifts.size(); ++i) {
    const double v = static_cast<double>(shifts[i]);
    if (v < s.lower_fence || v > s.upper_fence) {
      s.outliers.emplace_back(doc_ids[i], shifts[i]);
    } else {
      sum += v;
      ++kept;
    }
  }
  s.mean = kept == 0 ? 0.0 : sum / static_cast<double>(kept);
  return s;
}

absl::StatusOr<TokenShiftSummary> TokenShift(const Corpus& privatized,
                                             const Corpus& reconstructed) {
  if (privatized.size() != reconstructed.size()) {
    return absl::InvalidArgumentError(
        StrCat("token shift: ", privatized.size(), " private vs ",
               reconstructed.size(), " reconstructed documents"));
  }
  std::vector<std::string> ids;
  std::vector<int64_t> shifts;
  for (size_t i = 0; i < privatized.size(); ++i) {
    const Document& p = privatized.documents[i];
    const Document& r = reconstructed.documents[i];
    if (p.id != r.id) {
      return absl::InvalidArgumentError(StrCat(
          "token shift: document ", i, " ids differ ('", p.id, "' vs '", r.id, "')"));
    }
    ids.push_back(p.id);
    shifts.push_back(static_cast<int64_t>(r.tokens.size()) -
                     static_cast<int64_t>(p.tokens.size()));
  }
  return SummarizeShifts(ids, shifts);
}

absl::StatusOr<double> MeanPerplexity(const std::vector<std::string>& texts,
                                      PerplexityScorer& scorer) {
  if (texts.empty()) return absl::InvalidArgumentError("no texts to score");
  ASSIGN_OR_RETURN(std::vector<double> scores, scorer.Score(texts));
  if (scores.size() != texts.size()) {
    return absl::DataLossError("scorer returned the wrong number of scores");
  }
  double sum = 0.0;
  for (double s : scores) {
    if (!std::isfinite(s)) return absl::DataLossError("scorer returned a non-finite perplexity");
    sum += s;
  }
  return sum / static_cast<double>(scores.size());
}

absl::StatusOr<double> Tradeoff(const TradeoffInputs& in) {
  if (!(in.p_o > 0.0)) return absl::InvalidArgumentError("tradeoff needs P_o > 0");
  if (!(in.u_o - in.u_mg > 0.0)) {
    return absl::InvalidArgumentError("tradeoff needs U_o > U_mg");
  }
  return (in.u_p - in.u_mg) / (in.u_o - in.u_mg) - in.p_p / in.p_o;
}

absl::StatusOr<Eigen::MatrixXd> ProjectTo2d(const EmbeddingSet& set) {
  RETURN_IF_ERROR(set.Validate());
  if (set.vectors.cols() < 2) {
    return absl::InvalidArgumentError("projection needs at least 2 dimensions");
  }
  const Eigen::RowVectorXd mean = set.vectors.colwise().mean();
  const Eigen::MatrixXd centered = set.vectors.rowwise() - mean;
  const Eigen::MatrixXd cov = centered.transpose() * centered;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    return absl::InternalError("eigendecomposition failed");
  }
  const Eigen::Index d = cov.rows();
  Eigen::MatrixXd components(d, 2);
  // Eigenvalues come out ascending.
  components.col(0) = solver.eigenvectors().col(d - 1);
  components.col(1) = solver.eigenvectors().col(d - 2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::Index arg = 0;
    components.col(c).cwiseAbs().maxCoeff(&arg);
    if (components(arg, c) < 0.0) components.col(c) *= -1.0;
  }
  return centered * components;
}

std::string ProjectionCsv(const EmbeddingSet& set, const Eigen::MatrixXd& xy,
                          const std::vector<std::string>& authors,
                          std::string_view stage) {
  std::string out = "doc_id,author,stage,x,y\n";
  for (size_t i = 0; i < set.doc_ids.size(); ++i) {
    fmt::format_to(std::back_inserter(out), "{},{},{},{:.9g},{:.9g}\n",
                   set.doc_ids[i], i < authors.size() ? authors[i] : "", stage,
                   xy(i, 0), xy(i, 1));
  }
  return out;
}

}  // namespace dptext
