// Copyright 2026 The TFIQA Authors. All Rights Reserved.
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

#ifndef TFIQA_RNG_HPP_
#define TFIQA_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace tfiqa {

// Deterministic RNG with hand-rolled distributions. std::<distribution>
// output is implementation-defined, which would break the bit-reproducibility
// contracts, so everything random in the project flows through this class.
//
// Generator: splitmix64 for stream derivation, xoshiro256** for draws.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& si : s_) si = SplitMix(x);
  }

  // Derives an independent child stream. Named streams keep unrelated
  // consumers (init, data shuffling, dropout, ...) from perturbing each
  // other when one of them is added or removed.
  Rng Stream(const std::string& name) const {
    uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the name
    for (unsigned char c : name) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    return Rng(s_[0] ^ SplitMixOnce(h));
  }

  uint64_t NextU64() {
    const uint64_t result = Rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = Rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(NextU64() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n).
  uint64_t Below(uint64_t n) { return n == 0 ? 0 : NextU64() % n; }

  // Standard normal via Box-Muller (no cached spare, for reproducibility
  // independent of call pairing).
  double Normal() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }

  // Normal truncated to +-2 stddev (resampling), the usual embedding init.
  double TruncatedNormal(double stddev) {
    for (;;) {
      const double v = Normal();
      if (std::fabs(v) <= 2.0) return v * stddev;
    }
  }

  // Fisher-Yates.
  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(Below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t Rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t SplitMixOnce(uint64_t x) {
    uint64_t z = x + 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static uint64_t SplitMix(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  uint64_t s_[4];
};

}  // namespace tfiqa

#endif  // TFIQA_RNG_HPP_
