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

// JSON and CSV renderings of evaluation results.

#ifndef COMMITTEE_REPORT_H_
#define COMMITTEE_REPORT_H_

#include <string>

#include "committee/cascade_engine.h"
#include "committee/dense_cascade.h"
#include "committee/prediction_store.h"
#include "json.hpp"

namespace committee {

// Finite values as numbers; infinities as the strings "inf" / "-inf"; NaN as
// null.
nlohmann::json NumberJson(double value);

// {accuracy, avg_cost, worst_case_cost, exit_ratios[], exit_counts[],
//  stage_costs[], n, num_examples, model_ids[], thresholds[], metric,
//  aggregation}
nlohmann::json EvaluationJson(const CascadeEvaluation& eval);

nlohmann::json DenseEvaluationJson(const DenseEvaluation& eval);

// `example,exit_stage,predicted,label,confidence_at_exit`.
std::string TraceCsv(const CascadeEvaluation& eval, const LabeledDataset& labels);

// One row per cascade in the `b3+b5+b5` notation with accuracy, average cost
// and exit percentages per stage; columns padded to the longest cascade.
std::string ExitTableCsv(const std::vector<CascadeEvaluation>& evals,
                         const std::vector<std::string>& names);

}  // namespace committee

#endif  // COMMITTEE_REPORT_H_
