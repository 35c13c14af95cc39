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

#ifndef COMMITTEE_STATUS_H_
#define COMMITTEE_STATUS_H_

#include <string>
#include <string_view>

#include "absl/status/status.h"

namespace committee {

// A well-formed request whose constraints no candidate meets. Carries the
// nearest miss in its message. Distinct from input errors so the CLI can map
// it to its own exit code.
inline absl::Status InfeasibleError(std::string_view message) {
  return absl::FailedPreconditionError(std::string(message));
}

inline bool IsInfeasible(const absl::Status& status) {
  return absl::IsFailedPrecondition(status);
}

}  // namespace committee

#endif  // COMMITTEE_STATUS_H_
