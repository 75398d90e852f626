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

#include "dptext/sidecar_client.h"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "dptext/corpus.h"
#include "dptext/llm_client.h"
#include "dptext/status_macros.h"
#include "dptext/strings.h"
#include "httplib.h"
#include "json.hpp"

namespace dptext {
namespace {

using ::nlohmann::json;

bool IsSpace(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

absl::StatusOr<std::vector<double>> ToVector(const json& j) {
  if (!j.is_array() || j.empty()) {
    return absl::DataLossError("vector must be a non-empty array");
  }
  std::vector<double> out;
  out.reserve(j.size());
  for (const json& v : j) {
    if (!v.is_number()) return absl::DataLossError("vector entry is not a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) return absl::DataLossError("non-finite vector entry");
    out.push_back(x);
  }
  return out;
}

}  // namespace

std::string NormalizeWhitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (IsSpace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

absl::StatusOr<std::string> SidecarClient::Post(const std::string& route,
                                                const std::string& body) const {
  std::string origin, prefix;
  RETURN_IF_ERROR(SplitUrl(config_.base_url, &origin, &prefix));
  httplib::Client client(origin);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(config_.timeout_seconds));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  httplib::Result res = client.Post(prefix + route, body, "application/json");
  if (!res) {
    return absl::UnavailableError(StrCat("sidecar at ", config_.base_url,
                                         " unreachable: ",
                                         httplib::to_string(res.error())));
  }
  if (res->status == 503) {
    return absl::UnavailableError(StrCat("sidecar ", route, " not ready (503)"));
  }
  if (res->status != 200) {
    return absl::InternalError(StrCat("sidecar ", route, " answered HTTP ",
                                      res->status, ": ",
                                      TruncateBody(res->body, 512)));
  }
  return std::move(res->body);
}

absl::StatusOr<SidecarHealth> SidecarClient::Health() const {
  std::string origin, prefix;
  RETURN_IF_ERROR(SplitUrl(config_.base_url, &origin, &prefix));
  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::seconds(5));
  httplib::Result res = client.Get(prefix + "/health");
  if (!res) {
    return absl::UnavailableError(StrCat("sidecar at ", config_.base_url,
                                         " unreachable: ",
                                         httplib::to_string(res.error())));
  }
  if (res->status == 503) return absl::UnavailableError("sidecar still loading models");
  if (res->status != 200) {
    return absl::InternalError(StrCat("sidecar /health answered HTTP ", res->status));
  }
  json j = json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::DataLossError("sidecar /health body is not a JSON object");
  }
  SidecarHealth health;
  health.status = j.value("status", "");
  if (j.contains("models_loaded") && j["models_loaded"].is_array()) {
    for (const json& m : j["models_loaded"]) {
      if (m.is_string()) health.models_loaded.push_back(m.get<std::string>());
    }
  }
  return health;
}

absl::StatusOr<std::vector<std::vector<double>>> SidecarClient::Embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return absl::InvalidArgumentError("no texts to embed");
  std::vector<std::vector<double>> out;
  const size_t batch = std::max<size_t>(1, config_.batch_size);
  for (size_t start = 0; start < texts.size(); start += batch) {
    const size_t end = std::min(texts.size(), start + batch);
    json request = {{"model_id", config_.embed_model}, {"texts", json::array()}};
    for (size_t i = start; i < end; ++i) {
      request["texts"].push_back(NormalizeWhitespace(texts[i]));
    }
    ASSIGN_OR_RETURN(std::string body, Post("/embed", request.dump()));
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("vectors") || !j["vectors"].is_array() ||
        j["vectors"].size() != end - start) {
      return absl::DataLossError("sidecar /embed returned a malformed body");
    }
    for (const json& v : j["vectors"]) {
      ASSIGN_OR_RETURN(std::vector<double> vec, ToVector(v));
      if (!out.empty() && vec.size() != out.front().size()) {
        return absl::DataLossError("sidecar /embed returned mixed dimensions");
      }
      out.push_back(std::move(vec));
    }
  }
  return out;
}

absl::StatusOr<std::vector<double>> SidecarClient::Score(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return absl::InvalidArgumentError("no texts to score");
  std::vector<double> out;
  const size_t batch = std::max<size_t>(1, config_.batch_size);
  for (size_t start = 0; start < texts.size(); start += batch) {
    const size_t end = std::min(texts.size(), start + batch);
    json request = {{"model_id", config_.perplexity_model},
                    {"texts", json::array()}};
    for (size_t i = start; i < end; ++i) {
      request["texts"].push_back(NormalizeWhitespace(texts[i]));
    }
    ASSIGN_OR_RETURN(std::string body, Post("/perplexity", request.dump()));
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.contains("scores") || !j["scores"].is_array() ||
        j["scores"].size() != end - start) {
      return absl::DataLossError("sidecar /perplexity returned a malformed body");
    }
    for (const json& s : j["scores"]) {
      if (!s.is_number() || !std::isfinite(s.get<double>()) ||
          s.get<double>() <= 0.0) {
        return absl::DataLossError("sidecar /perplexity returned a bad score");
      }
      out.push_back(s.get<double>());
    }
  }
  return out;
}

absl::StatusOr<FixtureSidecar> FixtureSidecar::Load(
    const std::filesystem::path& path) {
  ASSIGN_OR_RETURN(std::string content, ReadFile(path));
  absl::StatusOr<FixtureSidecar> parsed = Parse(content);
  if (!parsed.ok()) {
    return absl::Status(parsed.status().code(),
                        StrCat(path.string(), ": ", parsed.status().message()));
  }
  return parsed;
}

absl::StatusOr<FixtureSidecar> FixtureSidecar::Parse(std::string_view jsonl) {
  FixtureSidecar fixture;
  size_t line_no = 0;
  for (std::string_view line : Split(jsonl, '\n')) {
    ++line_no;
    if (TrimAsciiWhitespace(line).empty()) continue;
    json j = json::parse(line, nullptr, false);
    auto bad = [&](std::string_view what) {
      return absl::InvalidArgumentError(StrCat("line ", line_no, ": ", what));
    };
    if (j.is_discarded() || !j.is_object()) return bad("not a JSON object");
    const std::string endpoint = j.value("endpoint", "");
    if (!j.contains("request") || !j["request"].contains("texts") ||
        !j["request"]["texts"].is_array() || !j.contains("response")) {
      return bad("expected request.texts and response");
    }
    const json& texts = j["request"]["texts"];
    if (endpoint == "/embed") {
      const json& vectors = j["response"].value("vectors", json::array());
      if (!vectors.is_array() || vectors.size() != texts.size()) {
        return bad("response.vectors does not match request.texts");
      }
      for (size_t i = 0; i < texts.size(); ++i) {
        absl::StatusOr<std::vector<double>> vec = ToVector(vectors[i]);
        if (!vec.ok()) return bad(std::string(vec.status().message()));
        fixture.AddVector(texts[i].get<std::string>(), *std::move(vec));
      }
    } else if (endpoint == "/perplexity") {
      const json& scores = j["response"].value("scores", json::array());
      if (!scores.is_array() || scores.size() != texts.size()) {
        return bad("response.scores does not match request.texts");
      }
      for (size_t i = 0; i < texts.size(); ++i) {
        if (!scores[i].is_number()) return bad("score is not a number");
        fixture.AddScore(texts[i].get<std::string>(), scores[i].get<double>());
      }
    } else {
      return bad(StrCat("unknown endpoint '", endpoint, "'"));
    }
  }
  return fixture;
}

void FixtureSidecar::AddVector(std::string_view text, std::vector<double> vector) {
  vectors_.insert_or_assign(NormalizeWhitespace(text), std::move(vector));
}

void FixtureSidecar::AddScore(std::string_view text, double score) {
  scores_.insert_or_assign(NormalizeWhitespace(text), score);
}

absl::StatusOr<std::vector<std::vector<double>>> FixtureSidecar::Embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return absl::InvalidArgumentError("no texts to embed");
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    auto it = vectors_.find(NormalizeWhitespace(text));
    if (it == vectors_.end()) {
      return absl::NotFoundError(
          StrCat("no recorded embedding for text '", TruncateBody(text, 60), "'"));
    }
    out.push_back(it->second);
  }
  return out;
}

absl::StatusOr<std::vector<double>> FixtureSidecar::Score(
    const std::vector<std::string>& texts) {
  if (texts.empty()) return absl::InvalidArgumentError("no texts to score");
  std::vector<double> out;
  out.reserve(texts.size());
  for (const std::string& text : texts) {
    auto it = scores_.find(NormalizeWhitespace(text));
    if (it == scores_.end()) {
      return absl::NotFoundError(
          StrCat("no recorded perplexity for text '", TruncateBody(text, 60), "'"));
    }
    out.push_back(it->second);
  }
  return out;
}

}  // namespace dptext
