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

#include "dptext/evaluate.h"

#include <iterator>

#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

using ::nlohmann::json;
using ::nlohmann::ordered_json;

ordered_json Optional(const std::optional<double>& v) {
  return v.has_value() ? ordered_json(*v) : ordered_json(nullptr);
}

void Cell(std::string& out, const std::optional<double>& v) {
  out += ',';
  if (v.has_value()) fmt::format_to(std::back_inserter(out), "{:.4f}", *v);
}

bool AllLabeled(const Corpus& corpus) {
  for (const Document& doc : corpus.documents) {
    if (!doc.label.has_value()) return false;
  }
  return !corpus.documents.empty();
}

std::vector<std::string> Texts(const Corpus& corpus) {
  std::vector<std::string> texts;
  for (const Document& doc : corpus.documents) texts.push_back(doc.text);
  return texts;
}

absl::Status SameIds(const Corpus& a, const Corpus& b, std::string_view what) {
  if (Ids(a) != Ids(b)) {
    return absl::InvalidArgumentError(
        StrCat(what, " does not hold the same documents as the clean split"));
  }
  return absl::OkStatus();
}

}  // namespace

ordered_json EvalRow::ToJson() const {
  return {{"dataset", dataset}, {"mechanism", mechanism}, {"mode", mode},
          {"eps", eps},         {"stage", stage},         {"util", Optional(util)},
          {"util_std", Optional(util_std)},               {"ss", Optional(ss)},
          {"co", Optional(co)}, {"p_s", Optional(p_s)},   {"p_a", Optional(p_a)},
          {"in", Optional(in)}, {"to_s", Optional(to_s)}, {"to_a", Optional(to_a)}};
}

absl::StatusOr<EvalRow> EvalRow::FromJson(const json& j) {
  try {
    EvalRow row;
    row.dataset = j.at("dataset").get<std::string>();
    row.mechanism = j.at("mechanism").get<std::string>();
    row.mode = j.at("mode").get<std::string>();
    row.eps = j.at("eps").get<double>();
    row.stage = j.at("stage").get<std::string>();
    auto read = [&](const char* key, std::optional<double>* out) {
      if (j.contains(key) && !j[key].is_null()) *out = j[key].get<double>();
    };
    read("util", &row.util);
    read("util_std", &row.util_std);
    read("ss", &row.ss);
    read("co", &row.co);
    read("p_s", &row.p_s);
    read("p_a", &row.p_a);
    read("in", &row.in);
    read("to_s", &row.to_s);
    read("to_a", &row.to_a);
    return row;
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(StrCat("bad report row: ", e.what()));
  }
}

std::string EvalCsvHeader() {
  return "dataset,mechanism,mode,eps,stage,util,util_std,ss,co,p_s,p_a,in,to_s,to_a";
}

std::string EvalCsvLine(const EvalRow& row) {
  std::string out = fmt::format("{},{},{},{:g},{}", row.dataset, row.mechanism,
                                row.mode, row.eps, row.stage);
  Cell(out, row.util);
  Cell(out, row.util_std);
  Cell(out, row.ss);
  Cell(out, row.co);
  Cell(out, row.p_s);
  Cell(out, row.p_a);
  Cell(out, row.in);
  Cell(out, row.to_s);
  Cell(out, row.to_a);
  return out;
}

std::string EvalRowsToCsv(const std::vector<EvalRow>& rows) {
  std::string out = EvalCsvHeader() + "\n";
  for (const EvalRow& row : rows) {
    out += EvalCsvLine(row);
    out += '\n';
  }
  return out;
}

ordered_json EvalReport::ToJson() const {
  ordered_json j;
  j["rows"] = ordered_json::array();
  for (const EvalRow& row : rows) j["rows"].push_back(row.ToJson());
  j["token_shift"] =
      token_shift.has_value() ? token_shift->ToJson() : ordered_json(nullptr);
  j["skipped"] = skipped;
  return j;
}

absl::StatusOr<EvalReport> Evaluate(const EvalInputs& in) {
  const StageSplits& clean = in.clean;
  ASSIGN_OR_RETURN(Stage clean_train_stage, CorpusStage(clean.train));
  ASSIGN_OR_RETURN(Stage clean_test_stage, CorpusStage(clean.test));
  if (clean_train_stage != Stage::kClean || clean_test_stage != Stage::kClean) {
    return absl::InvalidArgumentError("the original splits must be clean text");
  }
  const bool has_labels = AllLabeled(clean.train) && AllLabeled(clean.test);

  EvalReport report;
  if (in.embedder == nullptr) {
    report.skipped.push_back("ss");
    report.skipped.push_back("in");
  }
  if (in.scorer == nullptr) report.skipped.push_back("co");
  if (!has_labels) report.skipped.push_back("util");

  auto make_row = [&](std::string_view stage) {
    EvalRow row;
    row.dataset = in.dataset;
    row.mechanism = in.mechanism;
    row.mode = in.mode;
    row.eps = in.eps;
    row.stage = std::string(stage);
    return row;
  };
  EvalRow base = make_row("original");
  ASSIGN_OR_RETURN(AttackReport baseline,
                   RunStaticAttack(clean.train, clean.test, in.classifier));
  base.p_s = baseline.micro_f1;
  base.p_a = baseline.micro_f1;
  if (has_labels) {
    ASSIGN_OR_RETURN(UtilityResult util,
                     RunUtilityEval(clean.train, clean.test, in.classifier));
    base.util = util.mean;
    base.util_std = util.std;
  }
  if (in.scorer != nullptr) {
    ASSIGN_OR_RETURN(base.co, MeanPerplexity(Texts(clean.test), *in.scorer));
  }
  std::optional<EmbeddingSet> original_set;
  if (in.embedder != nullptr) {
    ASSIGN_OR_RETURN(original_set, EmbedCorpus(clean.test, *in.embedder));
  }
  report.rows.push_back(base);

  auto stage_row = [&](const StageSplits& splits,
                       std::string_view name) -> absl::StatusOr<EvalRow> {
    RETURN_IF_ERROR(SameIds(clean.train, splits.train, StrCat(name, " train split")));
    RETURN_IF_ERROR(SameIds(clean.test, splits.test, StrCat(name, " test split")));
    EvalRow row = make_row(name);
    ASSIGN_OR_RETURN(AttackReport s,
                     RunStaticAttack(clean.train, splits.test, in.classifier));
    ASSIGN_OR_RETURN(AttackReport a, RunAdaptiveAttackOnPrepared(
                                         splits.train, splits.test, in.classifier));
    row.p_s = s.micro_f1;
    row.p_a = a.micro_f1;
    if (has_labels) {
      ASSIGN_OR_RETURN(UtilityResult util,
                       RunUtilityEval(splits.train, splits.test, in.classifier));
      row.util = util.mean;
      row.util_std = util.std;
      if (*base.p_s > 0.0 && *base.util > in.u_mg) {
        TradeoffInputs t{*base.util, util.mean, *base.p_s, s.micro_f1, in.u_mg};
        ASSIGN_OR_RETURN(row.to_s, Tradeoff(t));
        t.p_p = a.micro_f1;
        ASSIGN_OR_RETURN(row.to_a, Tradeoff(t));
      }
    }
    if (in.embedder != nullptr) {
      ASSIGN_OR_RETURN(EmbeddingSet priv, EmbedCorpus(splits.test, *in.embedder));
      ASSIGN_OR_RETURN(row.ss, SemanticSimilarity(*original_set, priv));
      if (priv.size() >= 2) {
        ASSIGN_OR_RETURN(row.in, Indistinguishability(*original_set, priv));
      }
    }
    if (in.scorer != nullptr) {
      ASSIGN_OR_RETURN(row.co, MeanPerplexity(Texts(splits.test), *in.scorer));
    }
    return row;
  };

  if (in.mldp.has_value()) {
    ASSIGN_OR_RETURN(EvalRow row, stage_row(*in.mldp, "mldp"));
    report.rows.push_back(std::move(row));
  }
  if (in.reconstructed.has_value()) {
    ASSIGN_OR_RETURN(EvalRow row, stage_row(*in.reconstructed, "reconstructed"));
    report.rows.push_back(std::move(row));
    if (in.mldp.has_value()) {
      ASSIGN_OR_RETURN(report.token_shift,
                       TokenShift(in.mldp->test, in.reconstructed->test));
    }
  }
  return report;
}

}  // namespace dptext
