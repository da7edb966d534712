// Copyright 2026 The tabsan Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TABSAN_RANDOM_H_
#define TABSAN_RANDOM_H_

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace tabsan {

// Seeded random source whose derived distributions are implemented here
// rather than taken from <random>: the standard library leaves
// uniform_int_distribution / normal_distribution implementation-defined,
// and every seeded run must reproduce bit-for-bit across toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed), seed_(seed) {}

  uint64_t seed() const { return seed_; }
  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t Below(uint64_t n);

  // Standard normal via Box-Muller.
  double Normal();

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[Below(i)]);
    }
  }

  // Independent child stream; same (seed, stream) always yields the same child.
  Rng Fork(uint64_t stream) const;

 private:
  std::mt19937_64 engine_;
  uint64_t seed_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

uint64_t SplitMix64(uint64_t x);

}  // namespace tabsan

#endif  // TABSAN_RANDOM_H_
