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

#ifndef DPTEXT_STRINGS_H_
#define DPTEXT_STRINGS_H_

#include <charconv>
#include <iterator>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "absl/strings/string_view.h"
#include "fmt/format.h"

// The system absl carries its own string_view; let fmt print it.
template <>
struct fmt::formatter<absl::string_view> : fmt::formatter<std::string_view> {
  template <typename Context>
  auto format(absl::string_view text, Context& ctx) const {
    return fmt::formatter<std::string_view>::format(
        std::string_view(text.data(), text.size()), ctx);
  }
};

namespace dptext {

template <typename... Args>
std::string StrCat(const Args&... args) {
  std::string out;
  (fmt::format_to(std::back_inserter(out), "{}", args), ...);
  return out;
}

template <typename Range>
std::string StrJoin(const Range& parts, std::string_view separator) {
  std::string out;
  bool first = true;
  for (const auto& part : parts) {
    if (!first) out += separator;
    fmt::format_to(std::back_inserter(out), "{}", part);
    first = false;
  }
  return out;
}

std::string ToLowerAscii(std::string_view text);
std::string TrimAsciiWhitespace(std::string_view text);

// Splits on every occurrence of `separator`; empty pieces are kept unless
// skip_empty is set.
std::vector<std::string_view> Split(std::string_view text, char separator,
                                    bool skip_empty = false);

// Whole-string numeric parses; false on any trailing garbage.
template <typename T>
bool ParseNumber(std::string_view text, T* value) {
  if (text.empty()) return false;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, *value);
  return ec == std::errc() && ptr == end;
}

}  // namespace dptext

#endif  // DPTEXT_STRINGS_H_
