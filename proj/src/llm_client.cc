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

#include "dptext/llm_client.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>
#include <tuple>

#include "dptext/corpus.h"
#include "dptext/status_macros.h"
#include "dptext/strings.h"
#include "httplib.h"

namespace dptext {
namespace {

using ::nlohmann::json;
using ::nlohmann::ordered_json;

// Seconds from a Retry-After header; only the delta-seconds form is used.
double RetryAfterSeconds(const httplib::Result& res) {
  if (!res || !res->has_header("Retry-After")) return 0.0;
  double seconds = 0.0;
  std::string value = TrimAsciiWhitespace(res->get_header_value("Retry-After"));
  if (!ParseNumber(value, &seconds) || !(seconds >= 0.0)) return 0.0;
  return seconds;
}

}  // namespace

void RealSleep(std::chrono::milliseconds duration) {
  if (duration.count() > 0) std::this_thread::sleep_for(duration);
}

RateLimiter::RateLimiter(double per_minute, double burst, NowFn now,
                         Sleeper sleep)
    : per_second_(per_minute / 60.0),
      burst_(std::max(1.0, burst)),
      now_(std::move(now)),
      sleep_(std::move(sleep)),
      tokens_(std::max(1.0, burst)),
      last_(now_()) {}

std::chrono::milliseconds RateLimiter::Acquire() {
  if (per_second_ <= 0.0) return std::chrono::milliseconds(0);
  double wait_seconds = 0.0;
  {
    std::lock_guard lock(mutex_);
    const SteadyClock::time_point now = now_();
    const double elapsed =
        std::chrono::duration<double>(now - last_).count();
    last_ = now;
    tokens_ = std::min(burst_, tokens_ + elapsed * per_second_);
    tokens_ -= 1.0;
    if (tokens_ < 0.0) wait_seconds = -tokens_ / per_second_;
  }
  auto wait = std::chrono::milliseconds(
      static_cast<long long>(std::ceil(wait_seconds * 1000.0)));
  sleep_(wait);
  return wait;
}

void AuditLog::Record(AuditEntry entry) {
  entry.request_body = TruncateBody(entry.request_body);
  entry.response_body = TruncateBody(entry.response_body);
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::vector<AuditEntry> AuditLog::Entries() const {
  std::vector<AuditEntry> sorted;
  {
    std::lock_guard lock(mutex_);
    sorted = entries_;
  }
  std::sort(sorted.begin(), sorted.end(),
            [](const AuditEntry& a, const AuditEntry& b) {
              return std::tie(a.request_id, a.attempt) <
                     std::tie(b.request_id, b.attempt);
            });
  return sorted;
}

size_t AuditLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::string AuditLog::ToJsonl() const {
  std::string out;
  for (const AuditEntry& e : Entries()) {
    ordered_json j = {{"request_id", e.request_id},
                      {"attempt", e.attempt},
                      {"http_status", e.http_status},
                      {"outcome", e.outcome},
                      {"backoff_ms", e.backoff_ms},
                      {"request", e.request_body},
                      {"response", e.response_body}};
    out += j.dump(-1, ' ', false, json::error_handler_t::replace);
    out += '\n';
  }
  return out;
}

absl::Status AuditLog::Save(const std::filesystem::path& path) const {
  return WriteFileAtomic(path, ToJsonl());
}

std::string TruncateBody(std::string_view body, size_t limit) {
  if (body.size() <= limit) return std::string(body);
  // Back off to a UTF-8 boundary so the log stays valid JSON text.
  size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(body[cut]) & 0xC0) == 0x80) --cut;
  return StrCat(body.substr(0, cut), "...[truncated ", body.size() - cut,
                " bytes]");
}

ordered_json ChatRequestBody(const EndpointConfig& config,
                             const std::string& prompt) {
  return {{"model", config.model},
          {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
          {"temperature", config.temperature},
          {"max_tokens", config.max_tokens}};
}

absl::StatusOr<std::string> ParseChatResponse(std::string_view body) {
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::DataLossError("response body is not a JSON object");
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) {
    return absl::DataLossError("response has no choices");
  }
  const json& first = (*choices)[0];
  if (!first.is_object() || !first.contains("message") ||
      !first["message"].is_object() || !first["message"].contains("content") ||
      !first["message"]["content"].is_string()) {
    return absl::DataLossError("first choice has no message content");
  }
  return first["message"]["content"].get<std::string>();
}

std::chrono::milliseconds BackoffDelay(const EndpointConfig& config,
                                       int attempt, double retry_after_seconds) {
  double seconds = config.initial_backoff_seconds * std::ldexp(1.0, attempt);
  seconds = std::min(seconds, config.max_backoff_seconds);
  seconds = std::max(seconds, retry_after_seconds);
  return std::chrono::milliseconds(
      static_cast<long long>(std::llround(seconds * 1000.0)));
}

absl::Status SplitUrl(std::string_view url, std::string* origin,
                      std::string* path) {
  const size_t scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    return absl::InvalidArgumentError(StrCat("not an absolute URL: ", url));
  }
  const size_t path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string_view::npos) {
    *origin = std::string(url);
    path->clear();
  } else {
    *origin = std::string(url.substr(0, path_start));
    *path = std::string(url.substr(path_start));
  }
  while (!path->empty() && path->back() == '/') path->pop_back();
  if (origin->size() <= scheme_end + 3) {
    return absl::InvalidArgumentError(StrCat("URL has no host: ", url));
  }
  return absl::OkStatus();
}

HttpChatClient::HttpChatClient(EndpointConfig config, AuditLog* audit,
                               Sleeper sleep, NowFn now)
    : config_(std::move(config)),
      audit_(audit),
      sleep_(sleep),
      limiter_(config_.rate_limit, static_cast<double>(config_.concurrency),
               std::move(now), sleep) {
  if (!config_.api_key_env.empty()) {
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
      api_key_ = key;
    }
  }
  if (!SplitUrl(config_.base_url, &origin_, &path_).ok()) origin_.clear();
  const std::string_view suffix = "/chat/completions";
  if (path_.size() < suffix.size() ||
      path_.compare(path_.size() - suffix.size(), suffix.size(), suffix) != 0) {
    path_ += suffix;
  }
}

absl::StatusOr<std::string> HttpChatClient::Complete(
    std::string_view request_id, const std::string& prompt) {
  if (origin_.empty()) {
    return absl::InvalidArgumentError(
        StrCat("bad endpoint URL: ", config_.base_url));
  }
  const std::string body = ChatRequestBody(config_, prompt).dump();
  httplib::Client client(origin_);
  const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(
      std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!api_key_.empty()) {
    headers.emplace("Authorization", StrCat("Bearer ", api_key_));
  }

  absl::Status last = absl::UnavailableError("no attempt made");
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    limiter_.Acquire();
    httplib::Result res = client.Post(path_, headers, body, "application/json");
    AuditEntry entry;
    entry.request_id = std::string(request_id);
    entry.attempt = attempt;
    entry.request_body = body;
    bool transient = false;
    double retry_after = 0.0;
    absl::StatusOr<std::string> outcome = absl::UnknownError("unset");
    if (!res) {
      transient = true;
      outcome = absl::UnavailableError(
          StrCat("connection failed: ", httplib::to_string(res.error())));
      entry.outcome = "connection_error";
    } else {
      entry.http_status = res->status;
      entry.response_body = res->body;
      if (res->status == 200) {
        outcome = ParseChatResponse(res->body);
        entry.outcome = outcome.ok() ? "ok" : "malformed_body";
      } else if (res->status == 401) {
        outcome = absl::UnauthenticatedError(
            StrCat("endpoint rejected credentials (HTTP 401) from env var ",
                   config_.api_key_env));
        entry.outcome = "auth_failure";
      } else if (res->status == 403) {
        outcome = absl::PermissionDeniedError("endpoint refused access (HTTP 403)");
        entry.outcome = "auth_failure";
      } else if (res->status == 429 || res->status >= 500) {
        transient = true;
        retry_after = RetryAfterSeconds(res);
        outcome = absl::UnavailableError(StrCat("HTTP ", res->status));
        entry.outcome = "transient";
      } else {
        outcome = absl::InvalidArgumentError(
            StrCat("HTTP ", res->status, ": ", TruncateBody(res->body, 512)));
        entry.outcome = "rejected";
      }
    }
    const bool retry = transient && attempt < config_.max_retries;
    std::chrono::milliseconds delay(0);
    if (retry) delay = BackoffDelay(config_, attempt, retry_after);
    entry.backoff_ms = delay.count();
    if (audit_ != nullptr) audit_->Record(std::move(entry));
    if (!transient) return outcome;
    last = outcome.status();
    if (retry) sleep_(delay);
  }
  return absl::UnavailableError(StrCat("gave up after ", config_.max_retries,
                                       " retries: ", last.message()));
}

}  // namespace dptext
