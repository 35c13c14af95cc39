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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "committee/kernels.h"

namespace committee::kernels {

#if defined(COMMITTEE_HAVE_AVX2)
const KernelTable& Avx2KernelTable();
#endif

namespace {

const KernelTable* Choose() {
  const char* env = std::getenv("COMMITTEE_KERNELS");
  const std::string_view wanted = env != nullptr ? env : "";
  if (wanted == "scalar") return &ScalarKernels();
  if (const KernelTable* avx2 = Avx2Kernels(); avx2 != nullptr) return avx2;
  return &ScalarKernels();
}

std::atomic<const KernelTable*>& Slot() {
  static std::atomic<const KernelTable*> slot{Choose()};
  return slot;
}

}  // namespace

const KernelTable* Avx2Kernels() {
#if defined(COMMITTEE_HAVE_AVX2)
  static const bool supported = __builtin_cpu_supports("avx2");
  return supported ? &Avx2KernelTable() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& Active() { return *Slot().load(std::memory_order_acquire); }

std::vector<const KernelTable*> Available() {
  std::vector<const KernelTable*> tables = {&ScalarKernels()};
  if (const KernelTable* avx2 = Avx2Kernels(); avx2 != nullptr) {
    tables.push_back(avx2);
  }
  return tables;
}

void SetActive(const KernelTable& table) {
  Slot().store(&table, std::memory_order_release);
}

}  // namespace committee::kernels
