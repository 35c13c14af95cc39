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

// Choosing exit thresholds for a fixed model sequence.
//
// Candidate thresholds for each stage are percentiles of that stage's
// confidence scores (computed as if every example reached the stage) plus
// the metric's two sentinels. The search walks the product of the candidate
// lists in lexicographic order and prunes with the one property that always
// holds: raising a threshold never lowers the average cost.

#ifndef COMMITTEE_THRESHOLD_SEARCH_H_
#define COMMITTEE_THRESHOLD_SEARCH_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "committee/cascade_engine.h"

namespace committee {

inline constexpr int kDefaultGridResolution = 100;
// 0.1 percentage points.
inline constexpr double kDefaultMatchSlack = 0.001;

struct ThresholdGrid {
  // One ascending, deduplicated candidate list per thresholded stage.
  std::vector<std::vector<double>> stages;

  // Size of the full product.
  uint64_t NumPoints() const;
};

// Maximize accuracy subject to avg_cost <= budget.
struct CostBudget {
  double budget = 0.0;
};
// Minimize avg_cost subject to accuracy >= floor.
struct AccuracyFloor {
  double floor = 0.0;
};
// AccuracyFloor at the full ensemble's accuracy minus `slack`.
struct MatchEnsemble {
  double slack = kDefaultMatchSlack;
};
using ThresholdTarget = std::variant<CostBudget, AccuracyFloor, MatchEnsemble>;

std::string DescribeTarget(const ThresholdTarget& target);

// Percentiles j * 100 / resolution, j = 0..resolution, of each stage's scores
// (nearest rank: the value at sorted index floor(j * (N - 1) / resolution)),
// plus LowestThreshold and HighestThreshold of the metric.
absl::StatusOr<ThresholdGrid> BuildThresholdGrid(const CascadeProfile& profile,
                                                 int grid_resolution);
absl::StatusOr<ThresholdGrid> BuildThresholdGrid(
    std::span<const std::string> models, const ModelPool& pool,
    ConfidenceMetric metric, AggregationMode aggregation, int grid_resolution);

struct ThresholdSearchResult {
  std::vector<double> thresholds;
  CascadeEvaluation evaluation;
  // Accuracy constraint actually applied (AccuracyFloor and MatchEnsemble).
  double accuracy_floor = 0.0;
  uint64_t points_evaluated = 0;
};

// Best grid point for the target. Ties: CostBudget prefers higher accuracy,
// then lower cost; AccuracyFloor prefers lower cost, then higher accuracy;
// remaining ties go to the lexicographically smallest threshold vector.
// An unreachable target yields an InfeasibleError naming the best value
// the grid can reach.
absl::StatusOr<ThresholdSearchResult> SearchThresholds(
    const CascadeProfile& profile, const ThresholdGrid& grid,
    const ThresholdTarget& target);
absl::StatusOr<ThresholdSearchResult> SearchThresholds(
    std::span<const std::string> models, const ModelPool& pool,
    const ThresholdTarget& target, ConfidenceMetric metric,
    AggregationMode aggregation, const ThresholdGrid& grid);

struct SweepPoint {
  double threshold = 0.0;
  double accuracy = 0.0;
  double avg_cost = 0.0;
};

// Evaluates every candidate of `stage` (1-based) with the other thresholds at
// `base_thresholds`; an empty base puts them at the metric's highest
// threshold.
absl::StatusOr<std::vector<SweepPoint>> ThresholdSweep(
    const CascadeProfile& profile, const ThresholdGrid& grid, size_t stage,
    std::span<const double> base_thresholds = {});

// `t,accuracy,avg_cost` with a header row.
std::string SweepCsv(const std::vector<SweepPoint>& points);

}  // namespace committee

#endif  // COMMITTEE_THRESHOLD_SEARCH_H_
