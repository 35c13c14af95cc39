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

// Softmax and the confidence scores used to decide early exits.

#ifndef COMMITTEE_CONFIDENCE_H_
#define COMMITTEE_CONFIDENCE_H_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "committee/prediction_store.h"

namespace committee {

// Higher is always more confident.
enum class ConfidenceMetric {
  kMaxProb,     // max softmax probability, in (0, 1]
  kLogitGap,    // largest minus second largest logit, >= 0
  kProbGap,     // largest minus second largest probability, in [0, 1)
  kNegEntropy,  // sum p ln p, in [-ln C, 0]
};

std::string_view MetricName(ConfidenceMetric metric);
absl::StatusOr<ConfidenceMetric> ParseMetric(std::string_view name);

// True for metrics that need at least two classes.
bool IsGapMetric(ConfidenceMetric metric);

// Threshold that every score meets, and one that no score below saturation
// reaches (1 for the probability metrics, 0 for NegEntropy, +inf for
// LogitGap).
double LowestThreshold(ConfidenceMetric metric);
double HighestThreshold(ConfidenceMetric metric);

// Writes softmax(logits) into `probs` (same length). Subtracts the maximum
// first, so any finite input is safe.
void SoftmaxInto(std::span<const double> logits, std::span<double> probs);
std::vector<double> Softmax(std::span<const double> logits);

// Score of a logit vector. Errors on an empty vector or a gap metric with a
// single class.
absl::StatusOr<double> Confidence(std::span<const double> logits,
                                  ConfidenceMetric metric);

// Internal fast paths; the caller guarantees the preconditions.
// `scratch` needs logits.size() doubles.
double ConfidenceOfLogits(std::span<const double> logits,
                          ConfidenceMetric metric, std::span<double> scratch);
// Score of an already normalized distribution. LogitGap uses log-probabilities
// as logits.
double ConfidenceOfProbs(std::span<const double> probs, ConfidenceMetric metric);

struct SelectivePoint {
  double k = 0.0;  // percent of examples kept, in (0, 100]
  double accuracy = 0.0;
};

struct SelectiveAccuracyCurve {
  std::vector<SelectivePoint> points;
};

// Accuracy over the ceil(k * N / 100) most confident examples, for each k
// (ties broken by lower example index). `ks` are sorted and deduplicated
// before evaluation.
absl::StatusOr<SelectiveAccuracyCurve> SelectiveAccuracy(
    const PredictionSet& predictions, const LabeledDataset& labels,
    size_t num_classes, ConfidenceMetric metric, std::vector<double> ks);

// `k,accuracy` with a header row.
std::string SelectiveAccuracyCsv(const SelectiveAccuracyCurve& curve);

}  // namespace committee

#endif  // COMMITTEE_CONFIDENCE_H_
