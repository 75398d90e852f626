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

#ifndef DPTEXT_RNG_H_
#define DPTEXT_RNG_H_

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace dptext {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Satisfies
// UniformRandomBitGenerator. The 64-bit stream id occupies the upper half of
// the counter, so every (key, stream) pair is an independent sequence of
// 2^64 blocks.
class Philox4x32 {
 public:
  using result_type = uint32_t;

  Philox4x32(uint64_t key, uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()();

  // Uniform double in [0, 1) with 53 random bits.
  double NextDouble();

  // Uniform integer in [0, n). n must be positive.
  uint64_t NextIndex(uint64_t n);

 private:
  void Refill();

  std::array<uint32_t, 2> key_;
  std::array<uint32_t, 4> counter_;
  std::array<uint32_t, 4> buffer_;
  int buffered_ = 0;
};

using Rng = Philox4x32;

uint64_t Fnv1a64(std::string_view bytes);

// SplitMix64 finalizer; used to derive keys from seeds.
uint64_t Mix64(uint64_t x);

// Per-token stream: the key depends on (root_seed, doc_id), the counter's
// stream half on token_index. Sanitizing tokens in any order or on any
// thread consumes identical randomness.
Rng TokenRng(uint64_t root_seed, std::string_view doc_id,
             uint64_t token_index);

// Stream for a named purpose ("split", "classifier/epoch", ...).
Rng NamedRng(uint64_t root_seed, std::string_view purpose,
             uint64_t index = 0);

}  // namespace dptext

#endif  // DPTEXT_RNG_H_
