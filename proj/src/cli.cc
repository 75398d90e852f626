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

#include "dptext/cli.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "dptext/attack.h"
#include "dptext/corpus.h"
#include "dptext/embedding_store.h"
#include "dptext/evaluate.h"
#include "dptext/llm_client.h"
#include "dptext/metrics.h"
#include "dptext/pipeline.h"
#include "dptext/rng.h"
#include "dptext/status_macros.h"
#include "dptext/strings.h"

namespace dptext {
namespace {

namespace fs = std::filesystem;
using ::nlohmann::json;
using ::nlohmann::ordered_json;

constexpr char kSanitizedFile[] = "sanitized.jsonl";
constexpr char kLedgerFile[] = "ledger.csv";
constexpr char kRunLogFile[] = "run_log.jsonl";
constexpr char kPairsFile[] = "pairs.jsonl";
constexpr char kReconstructedFile[] = "reconstructed.jsonl";
constexpr char kAuditFile[] = "audit.jsonl";
constexpr char kReleaseFile[] = "release.jsonl";
constexpr char kReportJson[] = "report.json";
constexpr char kReportCsv[] = "report.csv";
constexpr char kProjectionFile[] = "projection.csv";
constexpr char kManifestFile[] = "manifest.json";

// A failed command: exit code plus message.
struct Failure {
  int code = kExitFailure;
  std::string message;
};

int ExitCodeFor(const absl::Status& status) {
  switch (status.code()) {
    case absl::StatusCode::kInvalidArgument:
    case absl::StatusCode::kNotFound:
    case absl::StatusCode::kFailedPrecondition:
    case absl::StatusCode::kOutOfRange:
    case absl::StatusCode::kAlreadyExists:
      return kExitConfig;
    case absl::StatusCode::kUnavailable:
      return kExitMissingDependency;
    case absl::StatusCode::kUnauthenticated:
    case absl::StatusCode::kPermissionDenied:
      return kExitRemoteFatal;
    default:
      return kExitFailure;
  }
}

Failure FromStatus(const absl::Status& status, std::string_view context = "") {
  std::string message(status.message());
  if (!context.empty()) message = StrCat(context, ": ", message);
  return Failure{ExitCodeFor(status), std::move(message)};
}

absl::StatusOr<MetricSource> ParseMetricSource(std::string_view name,
                                               std::string_view field) {
  if (name == "none") return MetricSource::kNone;
  if (name == "sidecar") return MetricSource::kSidecar;
  if (name == "fixture") return MetricSource::kFixture;
  return absl::InvalidArgumentError(StrCat(
      field, ": expected none, sidecar or fixture, got '", name, "'"));
}

std::string_view MetricSourceName(MetricSource source) {
  switch (source) {
    case MetricSource::kNone: return "none";
    case MetricSource::kSidecar: return "sidecar";
    case MetricSource::kFixture: return "fixture";
  }
  return "none";
}

fs::path Resolve(const fs::path& base, const std::string& value) {
  if (value.empty()) return {};
  fs::path p(value);
  return p.is_absolute() || base.empty() ? p : base / p;
}

template <typename T>
absl::Status Read(const json& j, const char* key, T* out, std::string_view scope) {
  if (!j.contains(key)) return absl::OkStatus();
  try {
    *out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    return absl::InvalidArgumentError(
        StrCat(scope.empty() ? "" : StrCat(scope, "."), key, ": wrong type (",
               e.what(), ")"));
  }
  return absl::OkStatus();
}

absl::Status CheckKeys(const json& j, const std::set<std::string>& known,
                       std::string_view scope) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (known.count(it.key()) == 0) {
      return absl::InvalidArgumentError(StrCat(
          scope.empty() ? "config" : std::string(scope), ": unknown key '",
          it.key(), "'"));
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<SidecarConfig> SidecarFromJson(const json& j) {
  if (!j.is_object()) return absl::InvalidArgumentError("evaluation.sidecar must be an object");
  RETURN_IF_ERROR(CheckKeys(j,
                            {"base_url", "embed_model", "perplexity_model",
                             "batch_size", "timeout_seconds"},
                            "evaluation.sidecar"));
  SidecarConfig cfg;
  RETURN_IF_ERROR(Read(j, "base_url", &cfg.base_url, "evaluation.sidecar"));
  RETURN_IF_ERROR(Read(j, "embed_model", &cfg.embed_model, "evaluation.sidecar"));
  RETURN_IF_ERROR(Read(j, "perplexity_model", &cfg.perplexity_model, "evaluation.sidecar"));
  RETURN_IF_ERROR(Read(j, "batch_size", &cfg.batch_size, "evaluation.sidecar"));
  RETURN_IF_ERROR(Read(j, "timeout_seconds", &cfg.timeout_seconds, "evaluation.sidecar"));
  return cfg;
}

absl::StatusOr<EvaluationConfig> EvaluationFromJson(const json& j,
                                                    const fs::path& base) {
  if (!j.is_object()) return absl::InvalidArgumentError("evaluation must be an object");
  RETURN_IF_ERROR(CheckKeys(j,
                            {"u_mg", "embedder", "embedder_fixture", "scorer",
                             "scorer_fixture", "sidecar", "classifier",
                             "projection"},
                            "evaluation"));
  EvaluationConfig cfg;
  RETURN_IF_ERROR(Read(j, "u_mg", &cfg.u_mg, "evaluation"));
  std::string name;
  if (j.contains("embedder")) {
    RETURN_IF_ERROR(Read(j, "embedder", &name, "evaluation"));
    ASSIGN_OR_RETURN(cfg.embedder, ParseMetricSource(name, "evaluation.embedder"));
  }
  if (j.contains("scorer")) {
    RETURN_IF_ERROR(Read(j, "scorer", &name, "evaluation"));
    ASSIGN_OR_RETURN(cfg.scorer, ParseMetricSource(name, "evaluation.scorer"));
  }
  std::string path;
  if (j.contains("embedder_fixture")) {
    RETURN_IF_ERROR(Read(j, "embedder_fixture", &path, "evaluation"));
    cfg.embedder_fixture = Resolve(base, path);
  }
  if (j.contains("scorer_fixture")) {
    RETURN_IF_ERROR(Read(j, "scorer_fixture", &path, "evaluation"));
    cfg.scorer_fixture = Resolve(base, path);
  }
  if (j.contains("sidecar")) {
    ASSIGN_OR_RETURN(cfg.sidecar, SidecarFromJson(j["sidecar"]));
  }
  if (j.contains("classifier")) {
    ASSIGN_OR_RETURN(cfg.classifier, ClassifierConfig::FromJson(j["classifier"]));
  }
  RETURN_IF_ERROR(Read(j, "projection", &cfg.projection, "evaluation"));
  return cfg;
}

std::string HexHash(std::string_view bytes) {
  return fmt::format("{:016x}", Fnv1a64(bytes));
}

// ---------------------------------------------------------------------------
// Shared loading.

struct Inputs {
  Corpus corpus;
  std::shared_ptr<const EmbeddingStore> store;
  std::unique_ptr<WordMechanism> mechanism;
};

absl::StatusOr<Corpus> LoadInputCorpus(const fs::path& path) {
  LoadReport report;
  absl::StatusOr<Corpus> corpus = LoadCorpus(path, &report);
  if (!report.errors.empty()) {
    std::string lines;
    for (const LineError& e : report.errors) {
      lines += StrCat("\n  ", path.string(), ":", e.line, ": ", e.message);
    }
    return absl::InvalidArgumentError(
        StrCat("corpus has ", report.errors.size(), " malformed line(s):", lines));
  }
  if (!corpus.ok()) {
    return absl::Status(corpus.status().code(),
                        StrCat("corpus ", path.string(), ": ",
                               corpus.status().message()));
  }
  return corpus;
}

absl::StatusOr<Inputs> LoadInputs(const RunConfig& config) {
  Inputs in;
  ASSIGN_OR_RETURN(in.corpus, LoadInputCorpus(config.corpus));
  VectorLoadReport vreport;
  absl::StatusOr<EmbeddingStore> store =
      config.embeddings.extension() == ".bin"
          ? EmbeddingStore::LoadBinary(config.embeddings)
          : EmbeddingStore::LoadText(config.embeddings, config.embedding_dim,
                                     &vreport);
  if (!store.ok()) {
    return absl::InvalidArgumentError(StrCat("embeddings ",
                                             config.embeddings.string(), ": ",
                                             store.status().message()));
  }
  in.store = std::make_shared<const EmbeddingStore>(*std::move(store));
  absl::StatusOr<std::unique_ptr<WordMechanism>> mech =
      CreateMechanism(config.mechanism, in.store);
  if (!mech.ok()) {
    return absl::Status(mech.status().code(),
                        StrCat("mechanism: ", mech.status().message()));
  }
  in.mechanism = *std::move(mech);
  return in;
}

// Ids held out as few-shot material: those in pairs.jsonl when present,
// otherwise the first `fewshot` documents.
absl::StatusOr<std::vector<std::string>> HeldOutIds(const RunConfig& config,
                                                    const fs::path& run_dir,
                                                    const Corpus& corpus) {
  std::vector<std::string> ids;
  if (fs::exists(run_dir / kPairsFile)) {
    ASSIGN_OR_RETURN(std::vector<FewShotPair> pairs,
                     LoadFewShotPairs(run_dir / kPairsFile));
    for (const FewShotPair& p : pairs) ids.push_back(p.doc_id);
    return ids;
  }
  for (size_t i = 0; i < std::min(config.fewshot, corpus.size()); ++i) {
    ids.push_back(corpus.documents[i].id);
  }
  return ids;
}

Corpus Without(const Corpus& corpus, const std::vector<std::string>& ids) {
  std::set<std::string_view> drop(ids.begin(), ids.end());
  Corpus out;
  out.name = corpus.name;
  for (const Document& doc : corpus.documents) {
    if (drop.count(doc.id) == 0) out.documents.push_back(doc);
  }
  return out;
}

std::string RunTag(const RunConfig& config, double eps) {
  ordered_json tag = {{"mechanism", config.mechanism.ToJson()},
                      {"eps", eps},
                      {"mode", BudgetModeName(config.mode)},
                      {"seed", config.seed}};
  return HexHash(tag.dump());
}

// ---------------------------------------------------------------------------
// Commands. Each works on one budget's run directory.

absl::Status SanitizeOne(const RunConfig& config, const Inputs& in, double eps,
                         bool resume, std::ostream& err) {
  const fs::path run_dir = config.output_dir / RunName(config, eps);
  fs::create_directories(run_dir);
  ASSIGN_OR_RETURN(double avg, DatasetAvgWords(in.corpus));
  ASSIGN_OR_RETURN(BudgetPolicy policy, BudgetPolicy::Create(eps, config.mode, avg));
  SanitizeOptions options;
  options.seed = config.seed;
  options.workers = config.workers;
  options.run_log = run_dir / kRunLogFile;
  options.resume = resume;
  options.run_tag = RunTag(config, eps);
  if (!resume && fs::exists(options.run_log)) fs::remove(options.run_log);
  ASSIGN_OR_RETURN(SanitizationRun run,
                   SanitizeCorpus(in.corpus, *in.mechanism, policy, options));
  RETURN_IF_ERROR(SaveCorpus(run.output, run_dir / kSanitizedFile));
  RETURN_IF_ERROR(run.ledger.Save(run_dir / kLedgerFile));
  ASSIGN_OR_RETURN(FewShotHoldout holdout, HoldoutFewShot(in.corpus, config.fewshot));
  Corpus held{in.corpus.name, holdout.held};
  ASSIGN_OR_RETURN(std::vector<FewShotPair> pairs, MakeFewShotPairs(held, run.output));
  RETURN_IF_ERROR(SaveFewShotPairs(pairs, run_dir / kPairsFile));
  err << fmt::format("sanitize {}: {} documents, doc budget {}{}\n",
                     RunName(config, eps), run.output.size(), policy.doc_budget(),
                     run.resumed_documents > 0
                         ? StrCat(", ", run.resumed_documents, " resumed")
                         : std::string());
  return absl::OkStatus();
}

absl::Status ReconstructOne(const RunConfig& config, double eps,
                            std::ostream& err) {
  const fs::path run_dir = config.output_dir / RunName(config, eps);
  std::vector<std::string> missing;
  if (!fs::exists(run_dir / kSanitizedFile)) missing.push_back((run_dir / kSanitizedFile).string());
  if (!fs::exists(run_dir / kPairsFile)) missing.push_back((run_dir / kPairsFile).string());
  if (!missing.empty()) {
    return absl::NotFoundError(StrCat("missing inputs: ", StrJoin(missing, ", ")));
  }
  ASSIGN_OR_RETURN(Corpus sanitized, LoadInputCorpus(run_dir / kSanitizedFile));
  ASSIGN_OR_RETURN(std::vector<FewShotPair> pairs,
                   LoadFewShotPairs(run_dir / kPairsFile));
  std::vector<std::string> pair_ids;
  for (const FewShotPair& p : pairs) pair_ids.push_back(p.doc_id);
  Corpus targets = Without(sanitized, pair_ids);
  if (targets.documents.empty()) {
    return absl::InvalidArgumentError("no sanitized documents left to reconstruct");
  }
  AuditLog audit;
  HttpChatClient client(*config.endpoint, &audit);
  ReconstructOptions options;
  options.required_pairs = config.fewshot;
  options.concurrency = config.endpoint->concurrency;
  absl::StatusOr<ReconstructionRun> run =
      ReconstructCorpus(targets, pairs, client, options);
  RETURN_IF_ERROR(audit.Save(run_dir / kAuditFile));
  RETURN_IF_ERROR(run.status());
  RETURN_IF_ERROR(SaveCorpus(run->output, run_dir / kReconstructedFile));
  err << fmt::format("reconstruct {}: {} documents, {} failed\n",
                     RunName(config, eps), run->output.size(), run->failures);
  return absl::OkStatus();
}

struct MetricClients {
  std::unique_ptr<TextEmbedder> embedder;
  std::unique_ptr<PerplexityScorer> scorer;
};

// Sidecar or fixtures, checked up front so a missing dependency names the
// metrics it blocks.
absl::StatusOr<MetricClients> OpenMetricClients(const EvaluationConfig& cfg) {
  MetricClients clients;
  std::vector<std::string> blocked;
  std::vector<std::string> reasons;
  const bool need_sidecar = cfg.embedder == MetricSource::kSidecar ||
                            cfg.scorer == MetricSource::kSidecar;
  bool sidecar_ok = false;
  if (need_sidecar) {
    absl::StatusOr<SidecarHealth> health = SidecarClient(cfg.sidecar).Health();
    sidecar_ok = health.ok();
    if (!sidecar_ok) reasons.push_back(std::string(health.status().message()));
  }
  auto open = [&](MetricSource source, const fs::path& fixture,
                  std::vector<std::string> metrics, bool embed) -> absl::Status {
    if (source == MetricSource::kNone) return absl::OkStatus();
    if (source == MetricSource::kSidecar) {
      if (!sidecar_ok) {
        blocked.insert(blocked.end(), metrics.begin(), metrics.end());
        return absl::OkStatus();
      }
      if (embed) clients.embedder = std::make_unique<SidecarClient>(cfg.sidecar);
      else clients.scorer = std::make_unique<SidecarClient>(cfg.sidecar);
      return absl::OkStatus();
    }
    if (fixture.empty() || !fs::exists(fixture)) {
      blocked.insert(blocked.end(), metrics.begin(), metrics.end());
      reasons.push_back(StrCat("fixture file '", fixture.string(), "' not found"));
      return absl::OkStatus();
    }
    ASSIGN_OR_RETURN(FixtureSidecar f, FixtureSidecar::Load(fixture));
    if (embed) clients.embedder = std::make_unique<FixtureSidecar>(std::move(f));
    else clients.scorer = std::make_unique<FixtureSidecar>(std::move(f));
    return absl::OkStatus();
  };
  RETURN_IF_ERROR(open(cfg.embedder, cfg.embedder_fixture, {"SS", "In"}, true));
  RETURN_IF_ERROR(open(cfg.scorer, cfg.scorer_fixture, {"Co"}, false));
  if (!blocked.empty()) {
    return absl::UnavailableError(StrCat("blocked metrics: ", StrJoin(blocked, ", "),
                                         " (", StrJoin(reasons, "; "), ")"));
  }
  return clients;
}

absl::StatusOr<StageSplits> SplitLike(const Corpus& stage,
                                      const StageSplits& clean,
                                      std::string_view what) {
  StageSplits out;
  const std::vector<std::string> train_ids = Ids(clean.train);
  const std::vector<std::string> test_ids = Ids(clean.test);
  absl::StatusOr<Corpus> train = SelectByIds(stage, train_ids);
  absl::StatusOr<Corpus> test = SelectByIds(stage, test_ids);
  if (!train.ok() || !test.ok()) {
    return absl::InvalidArgumentError(StrCat(
        what, " does not cover every evaluated document: ",
        (!train.ok() ? train.status() : test.status()).message()));
  }
  out.train = *std::move(train);
  out.test = *std::move(test);
  return out;
}

absl::Status EvaluateOne(const RunConfig& config, const Corpus& corpus,
                         MetricClients& clients, double eps, std::ostream& err) {
  const fs::path run_dir = config.output_dir / RunName(config, eps);
  ASSIGN_OR_RETURN(std::vector<std::string> held, HeldOutIds(config, run_dir, corpus));
  Corpus working = Without(corpus, held);
  ASSIGN_OR_RETURN(auto split, SplitTrainTest(working, config.test_fraction, config.seed));
  EvalInputs in;
  in.dataset = config.dataset;
  in.mechanism = std::string(MechanismName(config.mechanism.id));
  in.mode = std::string(BudgetModeName(config.mode));
  in.eps = eps;
  in.clean = StageSplits{std::move(split.first), std::move(split.second)};
  in.embedder = clients.embedder.get();
  in.scorer = clients.scorer.get();
  in.classifier = config.evaluation.classifier;
  in.u_mg = config.evaluation.u_mg;

  std::optional<Corpus> reconstructed;
  ASSIGN_OR_RETURN(Corpus sanitized, LoadInputCorpus(run_dir / kSanitizedFile));
  ASSIGN_OR_RETURN(in.mldp, SplitLike(sanitized, in.clean, kSanitizedFile));
  if (fs::exists(run_dir / kReconstructedFile)) {
    ASSIGN_OR_RETURN(reconstructed, LoadInputCorpus(run_dir / kReconstructedFile));
    ASSIGN_OR_RETURN(in.reconstructed,
                     SplitLike(*reconstructed, in.clean, kReconstructedFile));
  }
  absl::StatusOr<EvalReport> report = Evaluate(in);
  if (!report.ok() && report.status().code() == absl::StatusCode::kNotFound) {
    // A fixture without a recorded text is a missing dependency.
    return absl::UnavailableError(report.status().message());
  }
  RETURN_IF_ERROR(report.status());
  ordered_json j = report->ToJson();
  j["seed"] = config.seed;
  j["run"] = RunName(config, eps);
  j["n_train"] = in.clean.train.size();
  j["n_test"] = in.clean.test.size();
  j["held_out"] = held;
  RETURN_IF_ERROR(WriteFileAtomic(run_dir / kReportJson, j.dump(2) + "\n"));
  RETURN_IF_ERROR(WriteFileAtomic(run_dir / kReportCsv, report->ToCsv()));

  if (config.evaluation.projection && clients.embedder != nullptr) {
    std::string csv;
    auto add = [&](const Corpus& c, std::string_view stage) -> absl::Status {
      ASSIGN_OR_RETURN(EmbeddingSet set, EmbedCorpus(c, *clients.embedder));
      ASSIGN_OR_RETURN(Eigen::MatrixXd xy, ProjectTo2d(set));
      std::vector<std::string> authors;
      for (const Document& d : c.documents) authors.push_back(d.author_id);
      std::string part = ProjectionCsv(set, xy, authors, stage);
      csv += csv.empty() ? part : part.substr(part.find('\n') + 1);
      return absl::OkStatus();
    };
    RETURN_IF_ERROR(add(in.clean.test, "original"));
    RETURN_IF_ERROR(add(in.mldp->test, "mldp"));
    if (in.reconstructed.has_value()) RETURN_IF_ERROR(add(in.reconstructed->test, "reconstructed"));
    RETURN_IF_ERROR(WriteFileAtomic(run_dir / kProjectionFile, csv));
  }
  err << fmt::format("evaluate {}: {} rows\n", RunName(config, eps), report->rows.size());
  return absl::OkStatus();
}

absl::Status AttackOne(const RunConfig& config, const Inputs& in, double eps,
                       std::string_view stage, const fs::path& model_path,
                       bool save_model, std::ostream& err) {
  const fs::path run_dir = config.output_dir / RunName(config, eps);
  const fs::path stage_file =
      run_dir / (stage == "reconstructed" ? kReconstructedFile : kSanitizedFile);
  if (!fs::exists(stage_file)) {
    return absl::NotFoundError(StrCat("missing input: ", stage_file.string()));
  }
  ASSIGN_OR_RETURN(std::vector<std::string> held, HeldOutIds(config, run_dir, in.corpus));
  Corpus working = Without(in.corpus, held);
  ASSIGN_OR_RETURN(auto split, SplitTrainTest(working, config.test_fraction, config.seed));
  StageSplits clean{std::move(split.first), std::move(split.second)};
  ASSIGN_OR_RETURN(Corpus stage_corpus, LoadInputCorpus(stage_file));
  ASSIGN_OR_RETURN(StageSplits splits, SplitLike(stage_corpus, clean, stage_file.filename().string()));

  ordered_json out;
  if (!model_path.empty() && !save_model) {
    // Re-evaluate a saved static model without retraining.
    ASSIGN_OR_RETURN(TextClassifier model, TextClassifier::Load(model_path));
    ASSIGN_OR_RETURN(std::vector<std::string> truth,
                     TargetLabels(splits.test, LabelTarget::kAuthor));
    std::vector<std::string> predicted = model.PredictCorpus(splits.test);
    AttackReport report;
    ASSIGN_OR_RETURN(report.micro_f1, MicroF1(predicted, truth));
    ASSIGN_OR_RETURN(report.per_class_f1, PerClassF1(predicted, truth));
    ASSIGN_OR_RETURN(report.test_stage, CorpusStage(splits.test));
    report.n_test = splits.test.size();
    out["static"] = report.ToJson();
    // A snapshot does not know how many documents trained it.
    out["static"].erase("n_train");
    out["static"]["model_file"] = model_path.filename().string();
  } else {
    ASSIGN_OR_RETURN(AttackReport s, RunStaticAttack(clean.train, splits.test,
                                                     config.evaluation.classifier));
    out["static"] = s.ToJson();
    if (save_model) {
      ASSIGN_OR_RETURN(TextClassifier model,
                       TextClassifier::TrainOnCorpus(clean.train, LabelTarget::kAuthor,
                                                     config.evaluation.classifier));
      RETURN_IF_ERROR(model.Save(model_path.empty() ? run_dir / "static_author.clf"
                                                    : model_path));
    }
  }
  if (stage == "reconstructed") {
    ASSIGN_OR_RETURN(AttackReport a, RunAdaptiveAttackOnPrepared(
                                         splits.train, splits.test,
                                         config.evaluation.classifier));
    out["adaptive"] = a.ToJson();
  } else {
    ASSIGN_OR_RETURN(double avg, DatasetAvgWords(in.corpus));
    ASSIGN_OR_RETURN(BudgetPolicy policy, BudgetPolicy::Create(eps, config.mode, avg));
    ASSIGN_OR_RETURN(AttackReport a,
                     RunAdaptiveAttack(clean.train, splits.test, *in.mechanism,
                                       policy, config.seed,
                                       config.evaluation.classifier, config.workers));
    out["adaptive"] = a.ToJson();
  }
  out["seed"] = config.seed;
  RETURN_IF_ERROR(WriteFileAtomic(run_dir / StrCat("attack_", stage, ".json"),
                                  out.dump(2) + "\n"));
  err << fmt::format("attack {} ({}): static {:.2f}, adaptive {:.2f}\n",
                     RunName(config, eps), stage,
                     out["static"]["micro_f1"].get<double>(),
                     out["adaptive"]["micro_f1"].get<double>());
  return absl::OkStatus();
}

// Combined report over every run directory, sorted by name.
absl::Status WriteCombinedReport(const fs::path& output_dir, std::ostream& err) {
  if (!fs::is_directory(output_dir)) {
    return absl::NotFoundError(StrCat("output directory ", output_dir.string(),
                                      " does not exist"));
  }
  std::vector<fs::path> reports;
  for (const auto& entry : fs::directory_iterator(output_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / kReportJson)) {
      reports.push_back(entry.path() / kReportJson);
    }
  }
  std::sort(reports.begin(), reports.end());
  if (reports.empty()) {
    return absl::NotFoundError(StrCat("no ", kReportJson, " under ", output_dir.string()));
  }
  std::vector<EvalRow> rows;
  for (const fs::path& path : reports) {
    ASSIGN_OR_RETURN(std::string text, ReadFile(path));
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.contains("rows")) {
      return absl::InvalidArgumentError(StrCat(path.string(), ": not a report"));
    }
    for (const json& row : j["rows"]) {
      ASSIGN_OR_RETURN(EvalRow parsed, EvalRow::FromJson(row));
      rows.push_back(std::move(parsed));
    }
  }
  RETURN_IF_ERROR(WriteFileAtomic(output_dir / kReportCsv, EvalRowsToCsv(rows)));
  err << fmt::format("report: {} rows from {} runs\n", rows.size(), reports.size());
  return absl::OkStatus();
}

// Hashes of every file under the output directory, config and seed.
absl::Status WriteManifest(const RunConfig& config, std::string_view command) {
  ordered_json files = ordered_json::object();
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(config.output_dir)) {
    if (entry.is_regular_file() && entry.path().filename() != kManifestFile &&
        entry.path().filename().string().find(".tmp") == std::string::npos) {
      paths.push_back(entry.path());
    }
  }
  std::sort(paths.begin(), paths.end());
  for (const fs::path& p : paths) {
    ASSIGN_OR_RETURN(std::string content, ReadFile(p));
    files[fs::relative(p, config.output_dir).generic_string()] = {
        {"bytes", content.size()}, {"fnv1a64", HexHash(content)}};
  }
  ordered_json manifest = {{"tool", "dptext"},
                           {"command", command},
                           {"seed", config.seed},
                           {"config", config.ToJson()},
                           {"files", files}};
  return WriteFileAtomic(config.output_dir / kManifestFile, manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Flag plumbing.

struct Overrides {
  std::string config_path;
  std::string corpus;
  std::string embeddings;
  std::string mechanism;
  std::vector<double> eps;
  std::string mode;
  std::optional<uint64_t> seed;
  std::optional<size_t> workers;
  std::string output;
  std::string endpoint;
  std::string model;
  std::optional<double> temperature;
  std::optional<double> rate_limit;
  std::optional<int> max_retries;
  std::string sidecar;
  std::string fixtures;
  std::string embedder;
  std::string scorer;
};

void AddCommonFlags(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run config");
  cmd->add_option("--corpus", o.corpus, "Input corpus (JSONL)");
  cmd->add_option("--embeddings", o.embeddings, "Word vectors (text or .bin)");
  cmd->add_option("--mechanism", o.mechanism, "cmp | mahalanobis | diffractor | santext | santext_plus");
  cmd->add_option("--eps", o.eps, "Base epsilon values");
  cmd->add_option("--mode", o.mode, "bounded | unbounded");
  cmd->add_option("--seed", o.seed, "Root seed");
  cmd->add_option("--workers", o.workers, "Sanitization threads");
  cmd->add_option("-o,--output", o.output, "Output directory");
  cmd->add_option("--endpoint", o.endpoint, "Chat-completions base URL");
  cmd->add_option("--model", o.model, "Chat model name");
  cmd->add_option("--temperature", o.temperature, "Sampling temperature");
  cmd->add_option("--rate-limit", o.rate_limit, "Requests per minute");
  cmd->add_option("--max-retries", o.max_retries, "Retries on 429/5xx");
  cmd->add_option("--sidecar", o.sidecar, "Sidecar base URL");
  cmd->add_option("--fixtures", o.fixtures, "Recorded sidecar responses (JSONL)");
  cmd->add_option("--embedder", o.embedder, "none | sidecar | fixture");
  cmd->add_option("--scorer", o.scorer, "none | sidecar | fixture");
}

absl::StatusOr<RunConfig> BuildConfig(const Overrides& o) {
  RunConfig config;
  if (!o.config_path.empty()) {
    ASSIGN_OR_RETURN(config, RunConfig::Load(o.config_path));
  }
  if (!o.corpus.empty()) config.corpus = o.corpus;
  if (!o.embeddings.empty()) config.embeddings = o.embeddings;
  if (!o.mechanism.empty()) {
    ASSIGN_OR_RETURN(config.mechanism.id, ParseMechanismId(o.mechanism));
  }
  if (!o.eps.empty()) config.base_eps = o.eps;
  if (!o.mode.empty()) {
    ASSIGN_OR_RETURN(config.mode, ParseBudgetMode(o.mode));
  }
  if (o.seed) config.seed = *o.seed;
  if (o.workers) config.workers = *o.workers;
  if (!o.output.empty()) config.output_dir = o.output;
  if (!o.endpoint.empty() || !o.model.empty() || o.temperature || o.rate_limit ||
      o.max_retries) {
    EndpointConfig ep = config.endpoint.value_or(EndpointConfig{});
    if (!o.endpoint.empty()) ep.base_url = o.endpoint;
    if (!o.model.empty()) ep.model = o.model;
    if (o.temperature) ep.temperature = *o.temperature;
    if (o.rate_limit) ep.rate_limit = *o.rate_limit;
    if (o.max_retries) ep.max_retries = *o.max_retries;
    config.endpoint = ep;
  }
  EvaluationConfig& ev = config.evaluation;
  if (!o.sidecar.empty()) ev.sidecar.base_url = o.sidecar;
  if (!o.fixtures.empty()) {
    ev.embedder = ev.scorer = MetricSource::kFixture;
    ev.embedder_fixture = ev.scorer_fixture = o.fixtures;
  }
  if (!o.embedder.empty()) {
    ASSIGN_OR_RETURN(ev.embedder, ParseMetricSource(o.embedder, "--embedder"));
  }
  if (!o.scorer.empty()) {
    ASSIGN_OR_RETURN(ev.scorer, ParseMetricSource(o.scorer, "--scorer"));
  }
  if (config.dataset.empty()) config.dataset = config.corpus.stem().string();
  return config;
}

absl::Status RequireEndpoint(const RunConfig& config) {
  if (!config.endpoint.has_value()) {
    return absl::InvalidArgumentError(
        "endpoint: no chat endpoint configured (set `endpoint` in the config "
        "or pass --endpoint and --model)");
  }
  return config.endpoint->Validate();
}

}  // namespace

// ---------------------------------------------------------------------------

absl::StatusOr<RunConfig> RunConfig::FromJson(const json& j, const fs::path& base) {
  if (!j.is_object()) return absl::InvalidArgumentError("config must be a JSON object");
  RETURN_IF_ERROR(CheckKeys(j,
                            {"dataset", "corpus", "embeddings", "embedding_dim",
                             "mechanism", "base_eps", "mode", "seed", "workers",
                             "output_dir", "fewshot", "test_fraction", "endpoint",
                             "evaluation"},
                            ""));
  RunConfig c;
  std::string s;
  RETURN_IF_ERROR(Read(j, "dataset", &c.dataset, ""));
  if (j.contains("corpus")) {
    RETURN_IF_ERROR(Read(j, "corpus", &s, ""));
    c.corpus = Resolve(base, s);
  }
  if (j.contains("embeddings")) {
    RETURN_IF_ERROR(Read(j, "embeddings", &s, ""));
    c.embeddings = Resolve(base, s);
  }
  RETURN_IF_ERROR(Read(j, "embedding_dim", &c.embedding_dim, ""));
  if (j.contains("mechanism")) {
    absl::StatusOr<MechanismConfig> mech = MechanismConfig::FromJson(j["mechanism"]);
    if (!mech.ok()) {
      return absl::InvalidArgumentError(StrCat("mechanism: ", mech.status().message()));
    }
    c.mechanism = *std::move(mech);
    if (!c.mechanism.santext.freq_file.empty()) {
      c.mechanism.santext.freq_file =
          Resolve(base, c.mechanism.santext.freq_file).string();
    }
  }
  if (j.contains("base_eps")) {
    if (j["base_eps"].is_number()) {
      c.base_eps = {j["base_eps"].get<double>()};
    } else {
      RETURN_IF_ERROR(Read(j, "base_eps", &c.base_eps, ""));
    }
  }
  if (j.contains("mode")) {
    RETURN_IF_ERROR(Read(j, "mode", &s, ""));
    absl::StatusOr<BudgetMode> mode = ParseBudgetMode(s);
    if (!mode.ok()) return absl::InvalidArgumentError(StrCat("mode: ", mode.status().message()));
    c.mode = *mode;
  }
  RETURN_IF_ERROR(Read(j, "seed", &c.seed, ""));
  RETURN_IF_ERROR(Read(j, "workers", &c.workers, ""));
  if (j.contains("output_dir")) {
    RETURN_IF_ERROR(Read(j, "output_dir", &s, ""));
    c.output_dir = Resolve(base, s);
  }
  RETURN_IF_ERROR(Read(j, "fewshot", &c.fewshot, ""));
  RETURN_IF_ERROR(Read(j, "test_fraction", &c.test_fraction, ""));
  if (j.contains("endpoint")) {
    ASSIGN_OR_RETURN(c.endpoint, EndpointConfig::FromJson(j["endpoint"]));
  }
  if (j.contains("evaluation")) {
    ASSIGN_OR_RETURN(c.evaluation, EvaluationFromJson(j["evaluation"], base));
  }
  return c;
}

absl::StatusOr<RunConfig> RunConfig::Load(const fs::path& path) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) {
    return absl::InvalidArgumentError(StrCat("config: cannot read ", path.string()));
  }
  json j;
  try {
    j = json::parse(*text);
  } catch (const json::parse_error& e) {
    return absl::InvalidArgumentError(StrCat(path.string(), ": ", e.what()));
  }
  absl::StatusOr<RunConfig> config = FromJson(j, path.parent_path());
  if (!config.ok()) {
    return absl::InvalidArgumentError(StrCat(path.string(), ": ",
                                             config.status().message()));
  }
  return config;
}

ordered_json RunConfig::ToJson() const {
  ordered_json ev = {{"u_mg", evaluation.u_mg},
                     {"embedder", MetricSourceName(evaluation.embedder)},
                     {"scorer", MetricSourceName(evaluation.scorer)},
                     {"classifier", evaluation.classifier.ToJson()},
                     {"projection", evaluation.projection}};
  if (evaluation.embedder == MetricSource::kFixture) {
    ev["embedder_fixture"] = evaluation.embedder_fixture.filename().string();
  }
  if (evaluation.scorer == MetricSource::kFixture) {
    ev["scorer_fixture"] = evaluation.scorer_fixture.filename().string();
  }
  ordered_json j = {{"dataset", dataset},
                    {"corpus", corpus.filename().string()},
                    {"embeddings", embeddings.filename().string()},
                    {"embedding_dim", embedding_dim},
                    {"mechanism", mechanism.ToJson()},
                    {"base_eps", base_eps},
                    {"mode", BudgetModeName(mode)},
                    {"seed", seed},
                    {"workers", workers},
                    {"fewshot", fewshot},
                    {"test_fraction", test_fraction},
                    {"evaluation", ev}};
  if (endpoint.has_value()) {
    ordered_json ep = endpoint->ToJson();
    // The URL of a local mock carries an ephemeral port.
    ep.erase("base_url");
    j["endpoint"] = ep;
  }
  return j;
}

absl::Status RunConfig::Validate(bool need_embeddings) const {
  std::vector<std::string> problems;
  if (corpus.empty()) problems.push_back("corpus: no path given");
  else if (!fs::is_regular_file(corpus)) problems.push_back(StrCat("corpus: file not found: ", corpus.string()));
  if (need_embeddings) {
    if (embeddings.empty()) problems.push_back("embeddings: no path given");
    else if (!fs::is_regular_file(embeddings)) problems.push_back(StrCat("embeddings: file not found: ", embeddings.string()));
    if (mechanism.id == MechanismId::kSanTextPlus &&
        !fs::is_regular_file(mechanism.santext.freq_file)) {
      problems.push_back(StrCat("mechanism.freq_file: file not found: ",
                                mechanism.santext.freq_file));
    }
  }
  if (base_eps.empty()) problems.push_back("base_eps: no budgets given");
  for (double e : base_eps) {
    if (!(e > 0.0) || !std::isfinite(e)) problems.push_back(StrCat("base_eps: ", e, " is not > 0"));
  }
  if (output_dir.empty()) problems.push_back("output_dir: no path given");
  if (workers == 0) problems.push_back("workers: must be >= 1");
  if (fewshot == 0) problems.push_back("fewshot: must be >= 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) problems.push_back("test_fraction: must lie in (0, 1)");
  absl::Status mech = mechanism.Validate();
  if (!mech.ok()) problems.push_back(StrCat("mechanism: ", mech.message()));
  if (!problems.empty()) return absl::InvalidArgumentError(StrJoin(problems, "\n  "));
  return absl::OkStatus();
}

std::string RunName(const RunConfig& config, double eps) {
  return fmt::format("{}_{}_eps{:g}", MechanismName(config.mechanism.id),
                     BudgetModeName(config.mode), eps);
}

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Word-level metric-LDP text sanitization, LLM reconstruction and evaluation"};
  app.require_subcommand(1);
  Overrides o;
  bool resume = false;
  bool evaluate_only = false;
  std::string stage = "mldp";
  std::string model_path;
  bool save_model = false;

  CLI::App* sanitize = app.add_subcommand("sanitize", "Sanitize the corpus for every budget");
  AddCommonFlags(sanitize, o);
  sanitize->add_flag("--resume", resume, "Reuse documents finished by an interrupted run");
  CLI::App* reconstruct = app.add_subcommand("reconstruct", "Reconstruct sanitized corpora with a chat model");
  AddCommonFlags(reconstruct, o);
  CLI::App* attack = app.add_subcommand("attack", "Static and adaptive authorship attacks");
  AddCommonFlags(attack, o);
  attack->add_option("--stage", stage, "mldp | reconstructed")
      ->check(CLI::IsMember({"mldp", "reconstructed"}));
  attack->add_option("--model-file", model_path, "Static model snapshot to load (or save with --save-model)");
  attack->add_flag("--save-model", save_model, "Write the static model snapshot");
  CLI::App* evaluate = app.add_subcommand("evaluate", "Metric report for every budget");
  AddCommonFlags(evaluate, o);
  CLI::App* pipeline = app.add_subcommand("pipeline", "Sanitize, reconstruct and evaluate; emit the release corpus");
  AddCommonFlags(pipeline, o);
  pipeline->add_flag("--evaluate-only", evaluate_only, "Reuse existing artifacts; only evaluate");
  pipeline->add_flag("--resume", resume, "Reuse documents finished by an interrupted run");
  CLI::App* report = app.add_subcommand("report", "Combine per-run reports into one CSV");
  AddCommonFlags(report, o);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    // Subcommand help also arrives here.
    if (e.get_exit_code() == 0) {
      out << (app.get_subcommands().empty() ? app.help()
                                            : app.get_subcommands()[0]->help());
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  auto fail = [&](const Failure& f) {
    err << "error: " << f.message << "\n";
    return f.code;
  };
  absl::StatusOr<RunConfig> built = BuildConfig(o);
  if (!built.ok()) return fail(FromStatus(built.status()));
  RunConfig& config = *built;

  if (report->parsed()) {
    if (config.output_dir.empty()) return fail({kExitConfig, "output_dir: no path given"});
    absl::Status s = WriteCombinedReport(config.output_dir, err);
    return s.ok() ? kExitOk : fail(FromStatus(s));
  }

  const bool needs_mechanism = sanitize->parsed() || attack->parsed() ||
                               (pipeline->parsed() && !evaluate_only);
  if (absl::Status s = config.Validate(needs_mechanism); !s.ok()) {
    return fail({kExitConfig, StrCat("invalid configuration:\n  ", s.message())});
  }
  if (reconstruct->parsed() || (pipeline->parsed() && !evaluate_only)) {
    if (absl::Status s = RequireEndpoint(config); !s.ok()) return fail(FromStatus(s));
  }
  fs::create_directories(config.output_dir);

  absl::Status status = absl::OkStatus();
  std::string command;
  if (sanitize->parsed()) {
    command = "sanitize";
    absl::StatusOr<Inputs> in = LoadInputs(config);
    if (!in.ok()) return fail(FromStatus(in.status()));
    for (double eps : config.base_eps) {
      status = SanitizeOne(config, *in, eps, resume, err);
      if (!status.ok()) break;
    }
  } else if (reconstruct->parsed()) {
    command = "reconstruct";
    for (double eps : config.base_eps) {
      status = ReconstructOne(config, eps, err);
      if (!status.ok()) break;
    }
  } else if (attack->parsed()) {
    command = "attack";
    absl::StatusOr<Inputs> in = LoadInputs(config);
    if (!in.ok()) return fail(FromStatus(in.status()));
    for (double eps : config.base_eps) {
      status = AttackOne(config, *in, eps, stage, model_path, save_model, err);
      if (!status.ok()) break;
    }
  } else if (evaluate->parsed() || pipeline->parsed()) {
    command = evaluate->parsed() ? "evaluate" : "pipeline";
    const bool run_stages = pipeline->parsed() && !evaluate_only;
    // Every missing stage input is listed before giving up.
    if (!run_stages) {
      std::vector<std::string> missing;
      for (double eps : config.base_eps) {
        const fs::path dir = config.output_dir / RunName(config, eps);
        if (!fs::exists(dir / kSanitizedFile)) missing.push_back((dir / kSanitizedFile).string());
        if (pipeline->parsed() && !fs::exists(dir / kReconstructedFile)) {
          missing.push_back((dir / kReconstructedFile).string());
        }
      }
      if (!missing.empty()) {
        return fail({kExitConfig, StrCat("missing stage inputs:\n  ",
                                         StrJoin(missing, "\n  "))});
      }
    }
    absl::StatusOr<Corpus> corpus = LoadInputCorpus(config.corpus);
    if (!corpus.ok()) return fail(FromStatus(corpus.status()));
    absl::StatusOr<MetricClients> clients = OpenMetricClients(config.evaluation);
    if (!clients.ok()) return fail(FromStatus(clients.status()));
    std::optional<Inputs> inputs;
    if (run_stages) {
      absl::StatusOr<Inputs> in = LoadInputs(config);
      if (!in.ok()) return fail(FromStatus(in.status()));
      inputs = *std::move(in);
    }
    for (double eps : config.base_eps) {
      const fs::path dir = config.output_dir / RunName(config, eps);
      if (run_stages) {
        status = SanitizeOne(config, *inputs, eps, resume, err);
        if (status.ok()) status = ReconstructOne(config, eps, err);
        if (status.ok()) {
          absl::StatusOr<std::string> recon = ReadFile(dir / kReconstructedFile);
          status = recon.ok() ? WriteFileAtomic(dir / kReleaseFile, *recon)
                              : recon.status();
        }
        if (!status.ok()) break;
      }
      status = EvaluateOne(config, *corpus, *clients, eps, err);
      if (!status.ok()) break;
    }
    if (status.ok() && pipeline->parsed()) status = WriteCombinedReport(config.output_dir, err);
  }
  if (!status.ok()) return fail(FromStatus(status));
  if (absl::Status s = WriteManifest(config, command); !s.ok()) return fail(FromStatus(s));
  return kExitOk;
}

}  // namespace dptext
