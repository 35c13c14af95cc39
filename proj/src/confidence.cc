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

#include "committee/confidence.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "committee/kernels.h"

namespace committee {
namespace {

struct TopTwo {
  double first = -std::numeric_limits<double>::infinity();
  double second = -std::numeric_limits<double>::infinity();
};

TopTwo FindTopTwo(std::span<const double> x) {
  TopTwo top;
  for (double v : x) {
    if (v > top.first) {
      top.second = top.first;
      top.first = v;
    } else if (v > top.second) {
      top.second = v;
    }
  }
  return top;
}

double NegEntropyOfProbs(std::span<const double> probs, std::span<double> terms) {
  for (size_t c = 0; c < probs.size(); ++c) {
    const double p = probs[c];
    terms[c] = p > 0.0 ? p * std::log(p) : 0.0;
  }
  const double value = kernels::Active().lane_sum(terms.data(), terms.size());
  const double floor = -std::log(static_cast<double>(probs.size()));
  return std::clamp(value, floor, 0.0);
}

}  // namespace

std::string_view MetricName(ConfidenceMetric metric) {
  switch (metric) {
    case ConfidenceMetric::kMaxProb:
      return "max-prob";
    case ConfidenceMetric::kLogitGap:
      return "logit-gap";
    case ConfidenceMetric::kProbGap:
      return "prob-gap";
    case ConfidenceMetric::kNegEntropy:
      return "neg-entropy";
  }
  return "unknown";
}

absl::StatusOr<ConfidenceMetric> ParseMetric(std::string_view name) {
  for (ConfidenceMetric m :
       {ConfidenceMetric::kMaxProb, ConfidenceMetric::kLogitGap,
        ConfidenceMetric::kProbGap, ConfidenceMetric::kNegEntropy}) {
    if (name == MetricName(m)) return m;
  }
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown confidence metric '", std::string(name),
      "' (expected max-prob, logit-gap, prob-gap or neg-entropy)"));
}

bool IsGapMetric(ConfidenceMetric metric) {
  return metric == ConfidenceMetric::kLogitGap ||
         metric == ConfidenceMetric::kProbGap;
}

double LowestThreshold(ConfidenceMetric metric) {
  return metric == ConfidenceMetric::kNegEntropy
             ? -std::numeric_limits<double>::infinity()
             : 0.0;
}

double HighestThreshold(ConfidenceMetric metric) {
  switch (metric) {
    case ConfidenceMetric::kMaxProb:
    case ConfidenceMetric::kProbGap:
      return 1.0;
    case ConfidenceMetric::kNegEntropy:
      return 0.0;
    case ConfidenceMetric::kLogitGap:
      return std::numeric_limits<double>::infinity();
  }
  return 1.0;
}

void SoftmaxInto(std::span<const double> logits, std::span<double> probs) {
  const kernels::KernelTable& k = kernels::Active();
  const size_t n = logits.size();
  const double shift = k.max(logits.data(), n);
  for (size_t c = 0; c < n; ++c) probs[c] = std::exp(logits[c] - shift);
  const double total = k.lane_sum(probs.data(), n);
  k.divide(probs.data(), total, probs.data(), n);
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> probs(logits.size());
  if (!logits.empty()) SoftmaxInto(logits, probs);
  return probs;
}

double ConfidenceOfProbs(std::span<const double> probs, ConfidenceMetric metric) {
  switch (metric) {
    case ConfidenceMetric::kMaxProb:
      return kernels::Active().max(probs.data(), probs.size());
    case ConfidenceMetric::kProbGap: {
      const TopTwo top = FindTopTwo(probs);
      return top.first - top.second;
    }
    case ConfidenceMetric::kLogitGap: {
      const TopTwo top = FindTopTwo(probs);
      if (top.second <= 0.0) return std::numeric_limits<double>::infinity();
      return std::log(top.first) - std::log(top.second);
    }
    case ConfidenceMetric::kNegEntropy: {
      std::vector<double> terms(probs.size());
      return NegEntropyOfProbs(probs, terms);
    }
  }
  return 0.0;
}

double ConfidenceOfLogits(std::span<const double> logits,
                          ConfidenceMetric metric, std::span<double> scratch) {
  if (metric == ConfidenceMetric::kLogitGap) {
    const TopTwo top = FindTopTwo(logits);
    return top.first - top.second;
  }
  SoftmaxInto(logits, scratch);
  if (metric == ConfidenceMetric::kNegEntropy) {
    std::vector<double> terms(scratch.size());
    return NegEntropyOfProbs(scratch, terms);
  }
  return ConfidenceOfProbs(scratch, metric);
}

absl::StatusOr<double> Confidence(std::span<const double> logits,
                                  ConfidenceMetric metric) {
  if (logits.empty()) return absl::InvalidArgumentError("empty logit vector");
  if (IsGapMetric(metric) && logits.size() < 2) {
    return absl::InvalidArgumentError(absl::StrCat(
        std::string(MetricName(metric)), " needs at least two classes"));
  }
  for (double v : logits) {
    if (!std::isfinite(v)) return absl::InvalidArgumentError("non-finite logit");
  }
  std::vector<double> scratch(logits.size());
  return ConfidenceOfLogits(logits, metric, scratch);
}

absl::StatusOr<SelectiveAccuracyCurve> SelectiveAccuracy(
    const PredictionSet& predictions, const LabeledDataset& labels,
    size_t num_classes, ConfidenceMetric metric, std::vector<double> ks) {
  if (ks.empty()) return absl::InvalidArgumentError("no k values given");
  for (double k : ks) {
    if (!(k > 0.0 && k <= 100.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("k = ", k, " is outside (0, 100]"));
    }
  }
  const size_t n = labels.labels.size();
  if (n == 0 || predictions.logits.size() != n * num_classes) {
    return absl::InvalidArgumentError("predictions do not match labels");
  }
  if (IsGapMetric(metric) && num_classes < 2) {
    return absl::InvalidArgumentError(
        absl::StrCat(std::string(MetricName(metric)), " needs at least two classes"));
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());

  const kernels::KernelTable& kt = kernels::Active();
  std::vector<double> score(n);
  std::vector<uint8_t> correct(n);
  std::vector<double> row(num_classes), scratch(num_classes);
  for (size_t i = 0; i < n; ++i) {
    std::span<const float> src = predictions.Row(i, num_classes);
    std::copy(src.begin(), src.end(), row.begin());
    score[i] = ConfidenceOfLogits(row, metric, scratch);
    correct[i] = kt.argmax(row.data(), num_classes) == labels.labels[i];
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return score[a] > score[b]; });
  std::vector<size_t> prefix(n + 1, 0);
  for (size_t r = 0; r < n; ++r) prefix[r + 1] = prefix[r] + correct[order[r]];

  SelectiveAccuracyCurve curve;
  for (double k : ks) {
    size_t kept = static_cast<size_t>(
        std::ceil(k * static_cast<double>(n) / 100.0 - 1e-9));
    kept = std::clamp<size_t>(kept, 1, n);
    curve.points.push_back(
        {k, static_cast<double>(prefix[kept]) / static_cast<double>(kept)});
  }
  return curve;
}

std::string SelectiveAccuracyCsv(const SelectiveAccuracyCurve& curve) {
  std::string out = "k,accuracy\n";
  for (const SelectivePoint& p : curve.points) {
    absl::StrAppendFormat(&out, "%.17g,%.17g\n", p.k, p.accuracy);
  }
  return out;
}

}  // namespace committee
