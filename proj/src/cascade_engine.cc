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

#include "committee/cascade_engine.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "absl/strings/str_cat.h"
#include "committee/kernels.h"
#include "committee/parallel.h"

namespace committee {
namespace {

// Stage k's exit ratio times the cost of stages 0..k, accumulated in stage
// order.
double WeightedCumulativeCost(std::span<const double> costs,
                              std::span<const double> ratios) {
  double cumulative = 0.0;
  double total = 0.0;
  for (size_t k = 0; k < costs.size(); ++k) {
    cumulative += costs[k];
    total += ratios[k] * cumulative;
  }
  return total;
}

std::vector<double> Ratios(std::span<const uint64_t> counts, size_t n) {
  std::vector<double> ratios(counts.size());
  for (size_t k = 0; k < counts.size(); ++k) {
    ratios[k] = static_cast<double>(counts[k]) / static_cast<double>(n);
  }
  return ratios;
}

}  // namespace

std::string_view AggregationName(AggregationMode mode) {
  switch (mode) {
    case AggregationMode::kMeanLogits:
      return "mean-logits";
    case AggregationMode::kMeanProbs:
      return "mean-probs";
  }
  return "unknown";
}

absl::StatusOr<AggregationMode> ParseAggregation(std::string_view name) {
  if (name == "mean-logits") return AggregationMode::kMeanLogits;
  if (name == "mean-probs") return AggregationMode::kMeanProbs;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown aggregation '", std::string(name), "' (expected mean-logits or mean-probs)"));
}

bool SpecLess(const CascadeSpec& a, const CascadeSpec& b) {
  if (a.models != b.models) return a.models < b.models;
  return a.thresholds < b.thresholds;
}

double AverageCost(std::span<const double> stage_costs,
                   std::span<const uint64_t> exit_counts, size_t num_examples) {
  return WeightedCumulativeCost(stage_costs, Ratios(exit_counts, num_examples));
}

absl::StatusOr<double> CostFromExitRatios(std::span<const double> costs,
                                          std::span<const double> exit_ratios) {
  if (costs.size() != exit_ratios.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "length mismatch: ", costs.size(), " costs and ", exit_ratios.size(),
        " exit ratios"));
  }
  if (costs.empty()) return absl::InvalidArgumentError("no stages");
  double sum = 0.0;
  for (double r : exit_ratios) {
    if (!(r >= 0.0)) return absl::InvalidArgumentError("negative exit ratio");
    sum += r;
  }
  // Published ratios are rounded to 0.1%, so allow a little slack.
  if (std::abs(sum - 1.0) > 5e-3) {
    return absl::InvalidArgumentError(
        absl::StrCat("exit ratios sum to ", sum, ", not 1"));
  }
  return WeightedCumulativeCost(costs, exit_ratios);
}

absl::Status ValidateSpec(const CascadeSpec& spec, const ModelPool& pool) {
  if (spec.models.empty()) return absl::InvalidArgumentError("cascade has no models");
  if (spec.thresholds.size() + 1 != spec.models.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "threshold count mismatch: ", spec.models.size(), " models need ",
        spec.models.size() - 1, " thresholds, got ", spec.thresholds.size()));
  }
  std::set<std::string_view> seen;
  for (const std::string& id : spec.models) {
    if (absl::StatusOr<size_t> index = pool.IndexOf(id); !index.ok()) {
      return index.status();
    }
    if (!seen.insert(id).second) {
      return absl::InvalidArgumentError(absl::StrCat(
          "model '", id, "' is used twice; replicates must be distinct entries"));
    }
  }
  for (double t : spec.thresholds) {
    if (std::isnan(t)) return absl::InvalidArgumentError("threshold is NaN");
  }
  if (IsGapMetric(spec.metric) && pool.num_classes < 2) {
    return absl::InvalidArgumentError(
        absl::StrCat(std::string(MetricName(spec.metric)), " needs at least two classes"));
  }
  return absl::OkStatus();
}

absl::StatusOr<CascadeProfile> CascadeProfile::Build(
    const ModelPool& pool, std::span<const std::string> models,
    ConfidenceMetric metric, AggregationMode aggregation, int jobs) {
  CascadeSpec probe;
  probe.models.assign(models.begin(), models.end());
  probe.thresholds.assign(models.empty() ? 0 : models.size() - 1, 0.0);
  probe.metric = metric;
  if (absl::Status s = ValidateSpec(probe, pool); !s.ok()) return s;

  CascadeProfile profile;
  profile.models_ = probe.models;
  profile.metric_ = metric;
  profile.aggregation_ = aggregation;
  const size_t n = pool.num_examples();
  const size_t c = pool.num_classes;
  const size_t stages = models.size();
  profile.num_examples_ = n;

  std::vector<const PredictionSet*> entries;
  for (const std::string& id : models) {
    const PredictionSet& entry = pool.entries[*pool.IndexOf(id)];
    entries.push_back(&entry);
    profile.stage_costs_.push_back(entry.cost);
    const double before =
        profile.cumulative_costs_.empty() ? 0.0 : profile.cumulative_costs_.back();
    profile.cumulative_costs_.push_back(before + entry.cost);
  }
  profile.confidences_.resize(stages * n);
  profile.predictions_.resize(stages * n);
  profile.correct_.resize(stages * n);

  ParallelFor(n, jobs, [&](size_t begin, size_t end) {
    const kernels::KernelTable& kt = kernels::Active();
    std::vector<double> sum(c), mean(c), scratch(c), widened(c);
    for (size_t i = begin; i < end; ++i) {
      std::fill(sum.begin(), sum.end(), 0.0);
      for (size_t k = 0; k < stages; ++k) {
        const float* row = entries[k]->logits.data() + i * c;
        if (aggregation == AggregationMode::kMeanLogits) {
          kt.accumulate_f32(row, sum.data(), c);
        } else {
          std::copy(row, row + c, widened.begin());
          SoftmaxInto(widened, scratch);
          kt.accumulate_f64(scratch.data(), sum.data(), c);
        }
        kt.divide(sum.data(), static_cast<double>(k + 1), mean.data(), c);
        const double score = aggregation == AggregationMode::kMeanLogits
                                 ? ConfidenceOfLogits(mean, metric, scratch)
                                 : ConfidenceOfProbs(mean, metric);
        const uint32_t predicted = static_cast<uint32_t>(kt.argmax(mean.data(), c));
        profile.confidences_[k * n + i] = score;
        profile.predictions_[k * n + i] = predicted;
        profile.correct_[k * n + i] = predicted == pool.labels.labels[i] ? 1 : 0;
      }
    }
  });

  profile.correct_counts_.assign(stages, 0);
  for (size_t k = 0; k < stages; ++k) {
    for (size_t i = 0; i < n; ++i) profile.correct_counts_[k] += profile.correct_[k * n + i];
  }
  return profile;
}

std::span<const double> CascadeProfile::confidences(size_t stage) const {
  return std::span<const double>(confidences_).subspan(stage * num_examples_,
                                                       num_examples_);
}

std::span<const uint32_t> CascadeProfile::predictions(size_t stage) const {
  return std::span<const uint32_t>(predictions_).subspan(stage * num_examples_,
                                                         num_examples_);
}

std::span<const uint8_t> CascadeProfile::correct(size_t stage) const {
  return std::span<const uint8_t>(correct_).subspan(stage * num_examples_,
                                                    num_examples_);
}

CascadeEvaluation CascadeProfile::Evaluate(std::span<const double> thresholds) const {
  const size_t n = num_examples_;
  const size_t stages = num_stages();
  CascadeEvaluation eval;
  eval.spec.models = models_;
  eval.spec.thresholds.assign(thresholds.begin(), thresholds.end());
  eval.spec.metric = metric_;
  eval.spec.aggregation = aggregation_;
  eval.num_examples = n;
  eval.stage_costs = stage_costs_;
  eval.worst_case_cost = cumulative_costs_.back();
  eval.exit_counts.assign(stages, 0);
  eval.exit_stage.resize(n);
  eval.predicted_labels.resize(n);
  eval.confidence_at_exit.resize(n);

  for (size_t i = 0; i < n; ++i) {
    size_t k = 0;
    while (k + 1 < stages && !(confidences_[k * n + i] >= thresholds[k])) ++k;
    ++eval.exit_counts[k];
    eval.num_correct += correct_[k * n + i];
    eval.exit_stage[i] = static_cast<uint32_t>(k + 1);
    eval.predicted_labels[i] = predictions_[k * n + i];
    eval.confidence_at_exit[i] = confidences_[k * n + i];
  }
  eval.accuracy = static_cast<double>(eval.num_correct) / static_cast<double>(n);
  eval.exit_ratios = Ratios(eval.exit_counts, n);
  eval.avg_cost = WeightedCumulativeCost(stage_costs_, eval.exit_ratios);
  return eval;
}

CascadeSummary CascadeProfile::Summarize(std::span<const double> thresholds) const {
  const size_t n = num_examples_;
  const size_t stages = num_stages();
  const kernels::KernelTable& kt = kernels::Active();
  std::vector<uint8_t> alive(n, 1);
  CascadeSummary summary;
  summary.num_examples = n;
  summary.exit_counts.assign(stages, 0);
  for (size_t k = 0; k < stages; ++k) {
    const double t = k + 1 < stages ? thresholds[k]
                                    : -std::numeric_limits<double>::infinity();
    const kernels::ExitCounts counts = kt.exit_scan(
        confidences_.data() + k * n, correct_.data() + k * n, alive.data(), n, t);
    summary.exit_counts[k] = counts.exited;
    summary.num_correct += counts.exited_correct;
  }
  summary.accuracy =
      static_cast<double>(summary.num_correct) / static_cast<double>(n);
  summary.avg_cost = AverageCost(stage_costs_, summary.exit_counts, n);
  summary.worst_case_cost = cumulative_costs_.back();
  return summary;
}

CascadeEvaluation CascadeProfile::EvaluateWithoutTrace(
    std::span<const double> thresholds) const {
  const CascadeSummary summary = Summarize(thresholds);
  CascadeEvaluation eval;
  eval.spec.models = models_;
  eval.spec.thresholds.assign(thresholds.begin(), thresholds.end());
  eval.spec.metric = metric_;
  eval.spec.aggregation = aggregation_;
  eval.num_examples = num_examples_;
  eval.num_correct = summary.num_correct;
  eval.accuracy = summary.accuracy;
  eval.avg_cost = summary.avg_cost;
  eval.worst_case_cost = summary.worst_case_cost;
  eval.stage_costs = stage_costs_;
  eval.exit_counts = summary.exit_counts;
  eval.exit_ratios = Ratios(summary.exit_counts, num_examples_);
  return eval;
}

CascadeEvaluation CascadeProfile::EvaluateAll() const {
  const std::vector<double> never(num_stages() - 1,
                                  std::numeric_limits<double>::infinity());
  return Evaluate(never);
}

absl::StatusOr<CascadeEvaluation> EvaluateCascade(const CascadeSpec& spec,
                                                  const ModelPool& pool, int jobs) {
  if (absl::Status s = ValidateSpec(spec, pool); !s.ok()) return s;
  absl::StatusOr<CascadeProfile> profile = CascadeProfile::Build(
      pool, spec.models, spec.metric, spec.aggregation, jobs);
  if (!profile.ok()) return profile.status();
  return profile->Evaluate(spec.thresholds);
}

absl::StatusOr<CascadeEvaluation> EvaluateEnsemble(
    std::span<const std::string> models, const ModelPool& pool,
    AggregationMode aggregation, int jobs) {
  absl::StatusOr<CascadeProfile> profile = CascadeProfile::Build(
      pool, models, ConfidenceMetric::kMaxProb, aggregation, jobs);
  if (!profile.ok()) return profile.status();
  CascadeEvaluation eval = profile->EvaluateAll();
  eval.spec.thresholds.assign(models.size() - 1, 1.0);
  return eval;
}

}  // namespace committee
