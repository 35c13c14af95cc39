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

#include "committee/kernels.h"

namespace committee::kernels {
namespace {

void AccumulateF32(const float* src, double* acc, size_t n) {
  for (size_t i = 0; i < n; ++i) acc[i] += static_cast<double>(src[i]);
}

void AccumulateF64(const double* src, double* acc, size_t n) {
  for (size_t i = 0; i < n; ++i) acc[i] += src[i];
}

void Divide(const double* src, double divisor, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = src[i] / divisor;
}

double Max(const double* x, size_t n) {
  double m = x[0];
  for (size_t i = 1; i < n; ++i) {
    if (x[i] > m) m = x[i];
  }
  return m;
}

size_t ArgMax(const double* x, size_t n) {
  size_t best = 0;
  for (size_t i = 1; i < n; ++i) {
    if (x[i] > x[best]) best = i;
  }
  return best;
}

double LaneSum(const double* x, size_t n) {
  const size_t blocked = n - n % 4;
  double lane[4] = {0.0, 0.0, 0.0, 0.0};
  for (size_t i = 0; i < blocked; i += 4) {
    lane[0] += x[i];
    lane[1] += x[i + 1];
    lane[2] += x[i + 2];
    lane[3] += x[i + 3];
  }
  double total = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  for (size_t i = blocked; i < n; ++i) total += x[i];
  return total;
}

ExitCounts ExitScan(const double* conf, const uint8_t* correct, uint8_t* alive,
                    size_t n, double threshold) {
  ExitCounts counts;
  for (size_t i = 0; i < n; ++i) {
    if (alive[i] && conf[i] >= threshold) {
      alive[i] = 0;
      ++counts.exited;
      counts.exited_correct += correct[i] ? 1 : 0;
    }
  }
  return counts;
}

}  // namespace

const KernelTable& ScalarKernels() {
  static const KernelTable table = {
      .name = "scalar",
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
