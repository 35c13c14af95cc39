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

#ifndef COMMITTEE_PARALLEL_H_
#define COMMITTEE_PARALLEL_H_

#include <cstddef>
#include <functional>

namespace committee {

// Worker count used when a caller passes jobs <= 0: COMMITTEE_JOBS if set to
// a positive integer, otherwise 1.
int DefaultJobs();

// Splits [0, n) into at most `jobs` contiguous chunks and runs
// body(begin, end) on each, blocking until all finish. Callers write results
// into per-index slots, so the outcome never depends on the schedule.
void ParallelFor(size_t n, int jobs,
                 const std::function<void(size_t, size_t)>& body);

}  // namespace committee

#endif  // COMMITTEE_PARALLEL_H_
