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

#ifndef DPTEXT_LLM_CLIENT_H_
#define DPTEXT_LLM_CLIENT_H_

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dptext/reconstruct.h"
#include "json.hpp"

namespace dptext {

using SteadyClock = std::chrono::steady_clock;
using Sleeper = std::function<void(std::chrono::milliseconds)>;
using NowFn = std::function<SteadyClock::time_point()>;

void RealSleep(std::chrono::milliseconds duration);

// Token bucket: `per_minute` tokens per minute, holding at most `burst`.
// Acquire() reserves a token and sleeps off any debt outside the lock, so
// concurrent callers queue fairly.
class RateLimiter {
 public:
  RateLimiter(double per_minute, double burst, NowFn now = SteadyClock::now,
              Sleeper sleep = RealSleep);
  // Returns how long the caller waited.
  std::chrono::milliseconds Acquire();

 private:
  double per_second_;
  double burst_;
  NowFn now_;
  Sleeper sleep_;
  std::mutex mutex_;
  double tokens_;
  SteadyClock::time_point last_;
};

inline constexpr size_t kAuditBodyLimit = 8 * 1024;

struct AuditEntry {
  std::string request_id;
  int attempt = 0;
  // HTTP status, or 0 when no response arrived.
  int http_status = 0;
  std::string outcome;
  // Sleep scheduled before the next attempt.
  long long backoff_ms = 0;
  std::string request_body;
  std::string response_body;
};

// Request/response trail. Entries are written sorted by (request_id,
// attempt) with bodies cut at kAuditBodyLimit bytes, so identical runs give
// identical files.
class AuditLog {
 public:
  void Record(AuditEntry entry);
  std::vector<AuditEntry> Entries() const;
  size_t size() const;
  std::string ToJsonl() const;
  absl::Status Save(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mutex_;
  std::vector<AuditEntry> entries_;
};

std::string TruncateBody(std::string_view body, size_t limit = kAuditBodyLimit);

// Chat-completions request body for `prompt`.
nlohmann::ordered_json ChatRequestBody(const EndpointConfig& config,
                                       const std::string& prompt);
// choices[0].message.content, or DataLoss for a malformed body.
absl::StatusOr<std::string> ParseChatResponse(std::string_view body);

// Backoff before attempt `attempt + 1`: initial * 2^attempt, capped, and
// never shorter than a server-provided Retry-After.
std::chrono::milliseconds BackoffDelay(const EndpointConfig& config,
                                       int attempt, double retry_after_seconds);

class HttpChatClient : public ChatClient {
 public:
  // Reads the API key from config.api_key_env, if set. `audit` may be null.
  HttpChatClient(EndpointConfig config, AuditLog* audit,
                 Sleeper sleep = RealSleep, NowFn now = SteadyClock::now);

  absl::StatusOr<std::string> Complete(std::string_view request_id,
                                       const std::string& prompt) override;

  const EndpointConfig& config() const { return config_; }

 private:
  EndpointConfig config_;
  AuditLog* audit_;
  Sleeper sleep_;
  RateLimiter limiter_;
  std::string api_key_;
  std::string origin_;
  std::string path_;
};

// Splits "http://host:port/prefix" into origin and path prefix.
absl::Status SplitUrl(std::string_view url, std::string* origin,
                      std::string* path);

}  // namespace dptext

#endif  // DPTEXT_LLM_CLIENT_H_
