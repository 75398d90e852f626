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

#include "dptext/rng.h"

namespace dptext {
namespace {

constexpr uint32_t kMul0 = 0xD2511F53;
constexpr uint32_t kMul1 = 0xCD9E8D57;
constexpr uint32_t kWeyl0 = 0x9E3779B9;
constexpr uint32_t kWeyl1 = 0xBB67AE85;

inline void MulHiLo(uint32_t a, uint32_t b, uint32_t* hi, uint32_t* lo) {
  const uint64_t product = static_cast<uint64_t>(a) * b;
  *hi = static_cast<uint32_t>(product >> 32);
  *lo = static_cast<uint32_t>(product);
}

}  // namespace

Philox4x32::Philox4x32(uint64_t key, uint64_t stream)
    : key_{static_cast<uint32_t>(key), static_cast<uint32_t>(key >> 32)},
      counter_{0, 0, static_cast<uint32_t>(stream),
               static_cast<uint32_t>(stream >> 32)},
      buffer_{} {}

void Philox4x32::Refill() {
  std::array<uint32_t, 4> ctr = counter_;
  std::array<uint32_t, 2> key = key_;
  for (int round = 0; round < 10; ++round) {
    uint32_t hi0, lo0, hi1, lo1;
    MulHiLo(kMul0, ctr[0], &hi0, &lo0);
    MulHiLo(kMul1, ctr[2], &hi1, &lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  buffer_ = ctr;
  buffered_ = 4;
  if (++counter_[0] == 0) ++counter_[1];
}

Philox4x32::result_type Philox4x32::operator()() {
  if (buffered_ == 0) Refill();
  return buffer_[4 - buffered_--];
}

double Philox4x32::NextDouble() {
  const uint64_t hi = (*this)() >> 5;  // 27 bits
  const uint64_t lo = (*this)() >> 6;  // 26 bits
  return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

uint64_t Philox4x32::NextIndex(uint64_t n) {
  // Rejection sampling on 64-bit draws; unbiased for every n.
  const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                         std::numeric_limits<uint64_t>::max() % n;
  while (true) {
    const uint64_t draw =
        (static_cast<uint64_t>((*this)()) << 32) | (*this)();
    if (draw < limit) return draw % n;
  }
}

uint64_t Fnv1a64(std::string_view bytes) {
  uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

uint64_t Mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng TokenRng(uint64_t root_seed, std::string_view doc_id,
             uint64_t token_index) {
  return Rng(Mix64(root_seed ^ Mix64(Fnv1a64(doc_id))), token_index);
}

Rng NamedRng(uint64_t root_seed, std::string_view purpose, uint64_t index) {
  return Rng(Mix64(Mix64(root_seed) ^ Fnv1a64(purpose)), index);
}

}  // namespace dptext
