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

#include "committee/report.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"

namespace committee {

using nlohmann::json;

json NumberJson(double value) {
  if (std::isnan(value)) return nullptr;
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

json EvaluationJson(const CascadeEvaluation& eval) {
  json thresholds = json::array();
  for (double t : eval.spec.thresholds) thresholds.push_back(NumberJson(t));
  return {
      {"accuracy", eval.accuracy},
      {"avg_cost", eval.avg_cost},
      {"worst_case_cost", eval.worst_case_cost},
      {"exit_ratios", eval.exit_ratios},
      {"exit_counts", eval.exit_counts},
      {"stage_costs", eval.stage_costs},
      {"n", eval.spec.models.size()},
      {"num_examples", eval.num_examples},
      {"num_correct", eval.num_correct},
      {"model_ids", eval.spec.models},
      {"thresholds", std::move(thresholds)},
      {"metric", MetricName(eval.spec.metric)},
      {"aggregation", AggregationName(eval.spec.aggregation)},
  };
}

json DenseEvaluationJson(const DenseEvaluation& eval) {
  json thresholds = json::array();
  for (double t : eval.spec.thresholds) thresholds.push_back(NumberJson(t));
  json per_class = json::array();
  for (double iou : eval.per_class_iou) per_class.push_back(NumberJson(iou));
  return {
      {"miou", NumberJson(eval.miou)},
      {"per_class_iou", std::move(per_class)},
      {"avg_cost", eval.avg_cost},
      {"worst_case_cost", eval.worst_case_cost},
      {"cells_per_image", eval.cells_per_image},
      {"cell_exit_ratios", eval.cell_exit_ratios},
      {"cell_exit_counts", eval.cell_exit_counts},
      {"n", eval.spec.models.size()},
      {"model_ids", eval.spec.models},
      {"thresholds", std::move(thresholds)},
      {"t_unlab", eval.spec.t_unlab},
      {"cell_size", eval.spec.cell_size.has_value() ? json(*eval.spec.cell_size)
                                                    : json("full")},
      {"metric", MetricName(ConfidenceMetric::kMaxProb)},
      {"aggregation", AggregationName(eval.spec.aggregation)},
  };
}

std::string TraceCsv(const CascadeEvaluation& eval, const LabeledDataset& labels) {
  std::string out = "example,exit_stage,predicted,label,confidence_at_exit\n";
  for (size_t i = 0; i < eval.exit_stage.size(); ++i) {
    absl::StrAppendFormat(&out, "%d,%d,%d,%d,%.17g\n", i, eval.exit_stage[i],
                          eval.predicted_labels[i], labels.labels[i],
                          eval.confidence_at_exit[i]);
  }
  return out;
}

std::string ExitTableCsv(const std::vector<CascadeEvaluation>& evals,
                         const std::vector<std::string>& names) {
  size_t stages = 0;
  for (const CascadeEvaluation& e : evals) stages = std::max(stages, e.exit_ratios.size());
  std::string out = "cascade,accuracy_pct,avg_cost";
  for (size_t k = 1; k <= stages; ++k) absl::StrAppend(&out, ",model_", k, "_exit_pct");
  out += "\n";
  for (size_t r = 0; r < evals.size(); ++r) {
    const CascadeEvaluation& e = evals[r];
    absl::StrAppendFormat(&out, "%s,%.2f,%.6g", names[r], 100.0 * e.accuracy, e.avg_cost);
    for (size_t k = 0; k < stages; ++k) {
      if (k < e.exit_ratios.size()) {
        absl::StrAppendFormat(&out, ",%.2f", 100.0 * e.exit_ratios[k]);
      } else {
        out += ",";
      }
    }
    out += "\n";
  }
  return out;
}

}  // namespace committee
