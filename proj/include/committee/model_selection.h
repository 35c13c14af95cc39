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

// Choosing which models form a cascade.

#ifndef COMMITTEE_MODEL_SELECTION_H_
#define COMMITTEE_MODEL_SELECTION_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "absl/status/statusor.h"
#include "committee/cascade_engine.h"
#include "committee/prediction_store.h"
#include "committee/threshold_search.h"

namespace committee {

// Highest accuracy with avg_cost <= budget.
struct MaxAccuracy {
  double budget = 0.0;
};
// Lowest avg_cost with accuracy >= floor.
struct MinCost {
  double floor = 0.0;
};
using SelectionObjective = std::variant<MaxAccuracy, MinCost>;

enum class OrderPolicy {
  kAllOrders,
  // Only tuples whose per-model costs never decrease along the cascade.
  kNonDecreasingCost,
};

std::string_view OrderPolicyName(OrderPolicy policy);
absl::StatusOr<OrderPolicy> ParseOrderPolicy(std::string_view name);

struct SelectionProblem {
  const ModelPool* pool = nullptr;
  int max_models = 4;
  SelectionObjective objective = MaxAccuracy{};
  // Bound on the summed cost of all stages.
  std::optional<double> worst_case_bound;
  ConfidenceMetric metric = ConfidenceMetric::kMaxProb;
  AggregationMode aggregation = AggregationMode::kMeanLogits;
  int grid_resolution = kDefaultGridResolution;
  OrderPolicy order_policy = OrderPolicy::kAllOrders;
  int jobs = 1;
};

// Models are grouped by kind: model_type, plus "@<resolution>" when the
// entry has one. Replicates of a kind are the entries sharing it, ordered by
// replicate_index.
std::string ModelKind(const PredictionSet& entry);

struct CandidateStats {
  uint64_t emitted = 0;
  // Tuples needing more replicates of a kind than the pool has.
  uint64_t skipped_replicates = 0;
  uint64_t filtered_order = 0;
  uint64_t filtered_worst_case = 0;
};

// Calls `visit` with the pool entry indices of every ordered tuple of kinds
// of length 2..max_models (kinds sorted by name, tuples in lexicographic
// order of kind positions). The r-th use of a kind within a tuple takes its
// r-th replicate.
CandidateStats ForEachCandidate(
    const SelectionProblem& problem,
    const std::function<void(const std::vector<size_t>&)>& visit);

std::vector<std::vector<size_t>> EnumerateCandidates(
    const SelectionProblem& problem, CandidateStats* stats = nullptr);

struct SelectionResult {
  CascadeSpec spec;
  CascadeEvaluation evaluation;
  uint64_t candidates_searched = 0;
  uint64_t candidates_feasible = 0;
  CandidateStats enumeration;
};

// Exhaustive search over every solitary model and every enumerated tuple,
// each with its thresholds chosen by SearchThresholds against the matching
// target. Ties: fewer models, then lower worst-case cost, then
// lexicographically smaller model ids.
absl::StatusOr<SelectionResult> SelectCascade(const SelectionProblem& problem);

struct FrontierPoint {
  CascadeSpec spec;
  CascadeEvaluation evaluation;
};

// The non-dominated points sorted by avg_cost; among identical (cost,
// accuracy) points the SpecLess-smallest one is kept.
std::vector<FrontierPoint> ParetoFrontier(std::vector<FrontierPoint> points);

// `avg_cost,accuracy,worst_case_cost,models,thresholds` with `+`-joined ids
// and `;`-joined thresholds.
std::string FrontierCsv(const std::vector<FrontierPoint>& frontier);

// Frontier inputs: the ensemble of every solitary model and tuple, or with
// `cascades` every threshold grid point of every tuple.
absl::StatusOr<std::vector<FrontierPoint>> CollectFrontierCandidates(
    const SelectionProblem& problem, bool cascades);

struct SelfCascadeResult {
  CascadeSpec spec;
  CascadeEvaluation evaluation;
  ThresholdSearchResult search;
  // Cost of the high-resolution model alone over the cascade's avg_cost.
  double speedup = 0.0;
};

// Two-stage cascade of one model at a low and a high input resolution.
absl::StatusOr<SelfCascadeResult> AssembleSelfCascade(
    const ModelPool& pool, std::string_view low_id, std::string_view high_id,
    const ThresholdTarget& target, ConfidenceMetric metric,
    AggregationMode aggregation, int grid_resolution);

// baseline_cost / cascade_cost.
double Speedup(double baseline_cost, double cascade_cost);

// "b3+b5+b5": the entries' model types joined by '+'.
std::string TypeNotation(const ModelPool& pool, const std::vector<std::string>& ids);

}  // namespace committee

#endif  // COMMITTEE_MODEL_SELECTION_H_
