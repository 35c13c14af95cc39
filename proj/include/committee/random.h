// Copyright 2026 The Committee Authors.
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

#ifndef COMMITTEE_RANDOM_H_
#define COMMITTEE_RANDOM_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>

namespace committee {

// Platform-stable randomness. std::mt19937_64's output sequence is fixed by
// the C++ standard, but the std:: distributions and std::shuffle are not, so
// everything seeded by users goes through these helpers instead.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform();

  // Uniform integer in [0, bound) by rejection; bound > 0.
  uint64_t Below(uint64_t bound);

  // Standard normal via Box-Muller (the spare variate is cached).
  double Normal();

  // Fisher-Yates, i from the back.
  void Shuffle(std::span<size_t> values);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace committee

#endif  // COMMITTEE_RANDOM_H_
