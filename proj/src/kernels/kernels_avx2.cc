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

// Compiled with -mavx2. Only reached through Avx2Kernels(), which checks the
// CPU first.

#include <immintrin.h>

#include <bit>
#include <cstring>

#include "committee/kernels.h"

namespace committee::kernels {
namespace {

void AccumulateF32(const float* src, double* acc, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d wide = _mm256_cvtps_pd(_mm_loadu_ps(src + i));
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i), wide));
  }
  for (; i < n; ++i) acc[i] += static_cast<double>(src[i]);
}

void AccumulateF64(const double* src, double* acc, size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(acc + i, _mm256_add_pd(_mm256_loadu_pd(acc + i),
                                            _mm256_loadu_pd(src + i)));
  }
  for (; i < n; ++i) acc[i] += src[i];
}

void Divide(const double* src, double divisor, double* out, size_t n) {
  const __m256d d = _mm256_set1_pd(divisor);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_loadu_pd(src + i), d));
  }
  for (; i < n; ++i) out[i] = src[i] / divisor;
}

double Max(const double* x, size_t n) {
  if (n < 4) {
    double m = x[0];
    for (size_t i = 1; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
  }
  __m256d best = _mm256_loadu_pd(x);
  size_t i = 4;
  for (; i + 4 <= n; i += 4) best = _mm256_max_pd(best, _mm256_loadu_pd(x + i));
  alignas(32) double lane[4];
  _mm256_store_pd(lane, best);
  double m = lane[0];
  for (int j = 1; j < 4; ++j) m = lane[j] > m ? lane[j] : m;
  for (; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

size_t ArgMax(const double* x, size_t n) {
  const double m = Max(x, n);
  size_t i = 0;
  while (x[i] != m) ++i;
  return i;
}

double LaneSum(const double* x, size_t n) {
  const size_t blocked = n - n % 4;
  __m256d acc = _mm256_setzero_pd();
  for (size_t i = 0; i < blocked; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  }
  alignas(32) double lane[4];
  _mm256_store_pd(lane, acc);
  double total = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (size_t i = blocked; i < n; ++i) total += x[i];
  return total;
}

// Nonzero bytes of an 8-byte group as a bit mask.
inline uint32_t ByteMask8(const uint8_t* p) {
  uint64_t word;
  std::memcpy(&word, p, sizeof(word));
  const __m128i bytes = _mm_cvtsi64_si128(static_cast<long long>(word));
  const __m128i zero = _mm_cmpeq_epi8(bytes, _mm_setzero_si128());
  return ~static_cast<uint32_t>(_mm_movemask_epi8(zero)) & 0xFFu;
}

ExitCounts ExitScan(const double* conf, const uint8_t* correct, uint8_t* alive,
                    size_t n, double threshold) {
  ExitCounts counts;
  const __m256d t = _mm256_set1_pd(threshold);
  size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const uint32_t lo = static_cast<uint32_t>(_mm256_movemask_pd(
        _mm256_cmp_pd(_mm256_loadu_pd(conf + i), t, _CMP_GE_OQ)));
    const uint32_t hi = static_cast<uint32_t>(_mm256_movemask_pd(
        _mm256_cmp_pd(_mm256_loadu_pd(conf + i + 4), t, _CMP_GE_OQ)));
    uint32_t exits = (lo | (hi << 4)) & ByteMask8(alive + i);
    if (exits == 0) continue;
    counts.exited += static_cast<uint64_t>(std::popcount(exits));
    counts.exited_correct +=
        static_cast<uint64_t>(std::popcount(exits & ByteMask8(correct + i)));
    while (exits != 0) {
      alive[i + static_cast<size_t>(std::countr_zero(exits))] = 0;
      exits &= exits - 1;
    }
  }
  for (; i < n; ++i) {
    if (alive[i] && conf[i] >= threshold) {
      alive[i] = 0;
      ++counts.exited;
      counts.exited_correct += correct[i] ? 1 : 0;
    }
  }
  return counts;
}

}  // namespace

const KernelTable& Avx2KernelTable() {
  static const KernelTable table = {
      .name = "avx2",
      .accumulate_f32 = AccumulateF32,
      .accumulate_f64 = AccumulateF64,
      .divide = Divide,
      .max = Max,
      .argmax = ArgMax,
      .lane_sum = LaneSum,
      .exit_scan = ExitScan,
  };
  return table;
}

}  // namespace committee::kernels
