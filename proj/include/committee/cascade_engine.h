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

// Simulation of ensembles and confidence-gated cascades over a prediction
// pool.
//
// A cascade applies its models one at a time. After stage k the running mean
// of the first k outputs (logits or probabilities) is scored, and the example
// exits if the score is >= t_k. The last stage has no threshold. An ensemble
// is the cascade in which nothing exits early.

#ifndef COMMITTEE_CASCADE_ENGINE_H_
#define COMMITTEE_CASCADE_ENGINE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "committee/confidence.h"
#include "committee/prediction_store.h"

namespace committee {

enum class AggregationMode {
  kMeanLogits,
  kMeanProbs,
};

std::string_view AggregationName(AggregationMode mode);
absl::StatusOr<AggregationMode> ParseAggregation(std::string_view name);

struct CascadeSpec {
  std::vector<std::string> models;
  // One per stage except the last.
  std::vector<double> thresholds;
  ConfidenceMetric metric = ConfidenceMetric::kMaxProb;
  AggregationMode aggregation = AggregationMode::kMeanLogits;

  bool operator==(const CascadeSpec&) const = default;
};

// Lexicographic on (models, thresholds); used to break ties.
bool SpecLess(const CascadeSpec& a, const CascadeSpec& b);

struct CascadeEvaluation {
  CascadeSpec spec;
  size_t num_examples = 0;
  uint64_t num_correct = 0;
  double accuracy = 0.0;
  // Mean over examples of the summed cost of the stages run.
  double avg_cost = 0.0;
  // Cost of running every stage.
  double worst_case_cost = 0.0;
  std::vector<double> stage_costs;
  std::vector<uint64_t> exit_counts;
  std::vector<double> exit_ratios;
  // Per example. Stages are numbered from 1.
  std::vector<uint32_t> exit_stage;
  std::vector<uint32_t> predicted_labels;
  std::vector<double> confidence_at_exit;

  bool operator==(const CascadeEvaluation&) const = default;
};

// Counts-only result, cheap enough for grid searches.
struct CascadeSummary {
  size_t num_examples = 0;
  uint64_t num_correct = 0;
  double accuracy = 0.0;
  double avg_cost = 0.0;
  double worst_case_cost = 0.0;
  std::vector<uint64_t> exit_counts;
};

// Sum over stages of ratio_k times the cost of stages 1..k. The ratios must
// sum to 1 (within rounding of published percentages).
absl::StatusOr<double> CostFromExitRatios(std::span<const double> costs,
                                          std::span<const double> exit_ratios);

// Checks that the spec is evaluable against the pool: at least one model,
// known and distinct ids, n - 1 non-NaN thresholds, and enough classes for a
// gap metric.
absl::Status ValidateSpec(const CascadeSpec& spec, const ModelPool& pool);

// The aggregate after each stage for every example, as if every example ran
// every stage. Thresholds only decide where each example stops, so one
// profile serves every threshold vector for a model sequence.
class CascadeProfile {
 public:
  static absl::StatusOr<CascadeProfile> Build(
      const ModelPool& pool, std::span<const std::string> models,
      ConfidenceMetric metric, AggregationMode aggregation, int jobs = 1);

  size_t num_stages() const { return stage_costs_.size(); }
  size_t num_examples() const { return num_examples_; }
  const std::vector<std::string>& models() const { return models_; }
  ConfidenceMetric metric() const { return metric_; }
  AggregationMode aggregation() const { return aggregation_; }

  // `stage` counts from 0.
  std::span<const double> confidences(size_t stage) const;
  std::span<const uint32_t> predictions(size_t stage) const;
  std::span<const uint8_t> correct(size_t stage) const;
  uint64_t correct_count(size_t stage) const { return correct_counts_[stage]; }

  std::span<const double> stage_costs() const { return stage_costs_; }
  // cumulative_costs()[k] is the cost of running stages 0..k.
  std::span<const double> cumulative_costs() const { return cumulative_costs_; }

  // Per-example walk through the stages, with the full trace. `thresholds`
  // has num_stages() - 1 values.
  CascadeEvaluation Evaluate(std::span<const double> thresholds) const;

  // Same outcome as Evaluate() without the per-example trace.
  CascadeSummary Summarize(std::span<const double> thresholds) const;

  // Summarize() packaged as an evaluation with empty per-example vectors.
  CascadeEvaluation EvaluateWithoutTrace(std::span<const double> thresholds) const;

  // Every example runs every stage.
  CascadeEvaluation EvaluateAll() const;

 private:
  CascadeProfile() = default;

  std::vector<std::string> models_;
  ConfidenceMetric metric_ = ConfidenceMetric::kMaxProb;
  AggregationMode aggregation_ = AggregationMode::kMeanLogits;
  size_t num_examples_ = 0;
  std::vector<double> stage_costs_;
  std::vector<double> cumulative_costs_;
  // Stage-major, num_stages() x num_examples().
  std::vector<double> confidences_;
  std::vector<uint32_t> predictions_;
  std::vector<uint8_t> correct_;
  std::vector<uint64_t> correct_counts_;
};

// Exit accounting shared by every evaluation path.
double AverageCost(std::span<const double> stage_costs,
                   std::span<const uint64_t> exit_counts, size_t num_examples);

absl::StatusOr<CascadeEvaluation> EvaluateCascade(const CascadeSpec& spec,
                                                  const ModelPool& pool,
                                                  int jobs = 1);

// All models applied to every example. The reported spec uses MaxProb and
// thresholds of 1, i.e. the cascade this ensemble is the limit of.
absl::StatusOr<CascadeEvaluation> EvaluateEnsemble(
    std::span<const std::string> models, const ModelPool& pool,
    AggregationMode aggregation, int jobs = 1);

}  // namespace committee

#endif  // COMMITTEE_CASCADE_ENGINE_H_
