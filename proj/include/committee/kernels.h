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

// Data-parallel inner loops shared by the cascade simulator.
//
// Every kernel has a portable scalar reference and, on x86-64, an AVX2
// variant. Variants are selected once at startup and must agree bit for bit
// with the scalar reference: reductions use a fixed four-lane order
// (lane j accumulates elements i with i % 4 == j over whole blocks, lanes
// combine as (l0 + l1) + (l2 + l3), the tail is added left to right).

#ifndef COMMITTEE_KERNELS_H_
#define COMMITTEE_KERNELS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace committee::kernels {

struct ExitCounts {
  uint64_t exited = 0;
  uint64_t exited_correct = 0;
};

struct KernelTable {
  std::string_view name;

  // acc[i] += src[i]
  void (*accumulate_f32)(const float* src, double* acc, size_t n);
  void (*accumulate_f64)(const double* src, double* acc, size_t n);
  // out[i] = src[i] / divisor
  void (*divide)(const double* src, double divisor, double* out, size_t n);
  double (*max)(const double* x, size_t n);
  // Index of the first maximal element.
  size_t (*argmax)(const double* x, size_t n);
  double (*lane_sum)(const double* x, size_t n);
  // For each i with alive[i] != 0 and conf[i] >= threshold: clears alive[i]
  // and counts it, and also counts it as correct when correct[i] != 0.
  ExitCounts (*exit_scan)(const double* conf, const uint8_t* correct,
                          uint8_t* alive, size_t n, double threshold);
};

const KernelTable& ScalarKernels();

// nullptr when the variant was not compiled in or the CPU lacks support.
const KernelTable* Avx2Kernels();

// The table used by the library. Chosen on first use: the best supported
// variant, unless COMMITTEE_KERNELS is set to "scalar" or "avx2".
const KernelTable& Active();

// Every variant usable on this machine, scalar first.
std::vector<const KernelTable*> Available();

// Overrides the active table (tests and benchmarks).
void SetActive(const KernelTable& table);

}  // namespace committee::kernels

#endif  // COMMITTEE_KERNELS_H_
