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

#include "committee/model_selection.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "committee/parallel.h"
#include "committee/status.h"

namespace committee {
namespace {

absl::Status ValidateProblem(const SelectionProblem& problem, bool with_objective) {
  if (problem.pool == nullptr) return absl::InvalidArgumentError("no pool");
  if (absl::Status s = ValidatePool(*problem.pool); !s.ok()) return s;
  if (problem.max_models < 1) {
    return absl::InvalidArgumentError("max_models must be at least 1");
  }
  if (problem.grid_resolution < 2) {
    return absl::InvalidArgumentError("grid resolution must be at least 2");
  }
  if (problem.worst_case_bound.has_value() && !(*problem.worst_case_bound > 0.0)) {
    return absl::InvalidArgumentError("worst-case bound must be positive");
  }
  if (!with_objective) return absl::OkStatus();
  if (const auto* o = std::get_if<MaxAccuracy>(&problem.objective)) {
    if (!(o->budget > 0.0)) return absl::InvalidArgumentError("cost budget must be positive");
  } else {
    const double floor = std::get<MinCost>(problem.objective).floor;
    if (!(floor >= 0.0 && floor <= 1.0)) {
      return absl::InvalidArgumentError("accuracy floor must be in [0, 1]");
    }
  }
  return absl::OkStatus();
}

std::vector<std::string> IdsOf(const ModelPool& pool, const std::vector<size_t>& entries) {
  std::vector<std::string> ids;
  ids.reserve(entries.size());
  for (size_t e : entries) ids.push_back(pool.entries[e].model_id);
  return ids;
}

double SumCost(const ModelPool& pool, const std::vector<size_t>& entries) {
  double total = 0.0;
  for (size_t e : entries) total += pool.entries[e].cost;
  return total;
}

// True when `a` should be preferred over `b` (both feasible).
bool Preferred(const SelectionObjective& objective, const CascadeEvaluation& a,
               const CascadeEvaluation& b) {
  if (std::holds_alternative<MaxAccuracy>(objective)) {
    if (a.num_correct != b.num_correct) return a.num_correct > b.num_correct;
  } else if (a.avg_cost != b.avg_cost) {
    return a.avg_cost < b.avg_cost;
  }
  if (a.spec.models.size() != b.spec.models.size()) {
    return a.spec.models.size() < b.spec.models.size();
  }
  if (a.worst_case_cost != b.worst_case_cost) {
    return a.worst_case_cost < b.worst_case_cost;
  }
  return a.spec.models < b.spec.models;
}

std::string FormatThreshold(double t) {
  if (std::isinf(t)) return t > 0 ? "inf" : "-inf";
  return absl::StrFormat("%.17g", t);
}

// Solitary entries followed by the enumerated tuples.
std::vector<std::vector<size_t>> AllCandidates(const SelectionProblem& problem,
                                               CandidateStats* stats) {
  const ModelPool& pool = *problem.pool;
  std::vector<std::vector<size_t>> candidates;
  for (size_t e = 0; e < pool.entries.size(); ++e) {
    if (problem.worst_case_bound.has_value() &&
        pool.entries[e].cost > *problem.worst_case_bound) {
      continue;
    }
    candidates.push_back({e});
  }
  std::vector<std::vector<size_t>> tuples = EnumerateCandidates(problem, stats);
  candidates.insert(candidates.end(), std::make_move_iterator(tuples.begin()),
                    std::make_move_iterator(tuples.end()));
  return candidates;
}

}  // namespace

std::string_view OrderPolicyName(OrderPolicy policy) {
  return policy == OrderPolicy::kAllOrders ? "all" : "non-decreasing-cost";
}

absl::StatusOr<OrderPolicy> ParseOrderPolicy(std::string_view name) {
  if (name == "all") return OrderPolicy::kAllOrders;
  if (name == "non-decreasing-cost") return OrderPolicy::kNonDecreasingCost;
  return absl::InvalidArgumentError(absl::StrCat(
      "unknown order policy '", std::string(name), "' (expected all or non-decreasing-cost)"));
}

std::string ModelKind(const PredictionSet& entry) {
  if (!entry.resolution.has_value()) return entry.model_type;
  return absl::StrCat(entry.model_type, "@", *entry.resolution);
}

CandidateStats ForEachCandidate(
    const SelectionProblem& problem,
    const std::function<void(const std::vector<size_t>&)>& visit) {
  CandidateStats stats;
  if (problem.pool == nullptr) return stats;
  const ModelPool& pool = *problem.pool;

  std::map<std::string, std::vector<size_t>> by_kind;
  for (size_t e = 0; e < pool.entries.size(); ++e) {
    by_kind[ModelKind(pool.entries[e])].push_back(e);
  }
  std::vector<std::vector<size_t>> replicas;
  for (auto& [kind, entries] : by_kind) {
    std::stable_sort(entries.begin(), entries.end(), [&](size_t a, size_t b) {
      return pool.entries[a].replicate_index < pool.entries[b].replicate_index;
    });
    replicas.push_back(entries);
  }
  const size_t kinds = replicas.size();
  if (kinds == 0) return stats;

  std::vector<size_t> digits;
  std::vector<size_t> used(kinds);
  std::vector<size_t> tuple;
  for (int length = 2; length <= problem.max_models; ++length) {
    digits.assign(static_cast<size_t>(length), 0);
    while (true) {
      std::fill(used.begin(), used.end(), 0);
      tuple.clear();
      bool enough = true;
      for (size_t d : digits) {
        if (used[d] >= replicas[d].size()) {
          enough = false;
          break;
        }
        tuple.push_back(replicas[d][used[d]++]);
      }
      if (!enough) {
        ++stats.skipped_replicates;
      } else if (problem.order_policy == OrderPolicy::kNonDecreasingCost &&
                 !std::is_sorted(tuple.begin(), tuple.end(), [&](size_t a, size_t b) {
                   return pool.entries[a].cost < pool.entries[b].cost;
                 })) {
        ++stats.filtered_order;
      } else if (problem.worst_case_bound.has_value() &&
                 SumCost(pool, tuple) > *problem.worst_case_bound) {
        ++stats.filtered_worst_case;
      } else {
        ++stats.emitted;
        visit(tuple);
      }
      // Odometer increment, last position fastest.
      size_t pos = digits.size();
      while (pos > 0 && ++digits[pos - 1] == kinds) digits[--pos] = 0;
      if (pos == 0) break;
    }
  }
  return stats;
}

std::vector<std::vector<size_t>> EnumerateCandidates(const SelectionProblem& problem,
                                                     CandidateStats* stats) {
  std::vector<std::vector<size_t>> tuples;
  CandidateStats s = ForEachCandidate(
      problem, [&](const std::vector<size_t>& t) { tuples.push_back(t); });
  if (stats != nullptr) *stats = s;
  return tuples;
}

absl::StatusOr<SelectionResult> SelectCascade(const SelectionProblem& problem) {
  if (absl::Status s = ValidateProblem(problem, /*with_objective=*/true); !s.ok()) return s;
  const ModelPool& pool = *problem.pool;
  CandidateStats stats;
  const std::vector<std::vector<size_t>> candidates = AllCandidates(problem, &stats);
  if (candidates.empty()) {
    double cheapest = std::numeric_limits<double>::infinity();
    for (const PredictionSet& e : pool.entries) cheapest = std::min(cheapest, e.cost);
    return InfeasibleError(absl::StrFormat(
        "no candidate satisfies worst-case bound %.6g; the cheapest model costs %.6g",
        problem.worst_case_bound.value_or(0.0), cheapest));
  }

  ThresholdTarget target;
  if (const auto* o = std::get_if<MaxAccuracy>(&problem.objective)) {
    target = CostBudget{o->budget};
  } else {
    target = AccuracyFloor{std::get<MinCost>(problem.objective).floor};
  }

  std::vector<std::optional<CascadeEvaluation>> found(candidates.size());
  std::vector<absl::Status> errors(candidates.size());
  ParallelFor(candidates.size(), problem.jobs, [&](size_t begin, size_t end) {
    for (size_t c = begin; c < end; ++c) {
      const std::vector<std::string> ids = IdsOf(pool, candidates[c]);
      absl::StatusOr<CascadeProfile> profile =
          CascadeProfile::Build(pool, ids, problem.metric, problem.aggregation);
      if (!profile.ok()) {
        errors[c] = profile.status();
        continue;
      }
      absl::StatusOr<ThresholdGrid> grid =
          BuildThresholdGrid(*profile, problem.grid_resolution);
      if (!grid.ok()) {
        errors[c] = grid.status();
        continue;
      }
      absl::StatusOr<ThresholdSearchResult> result =
          SearchThresholds(*profile, *grid, target);
      if (result.ok()) {
        found[c] = profile->EvaluateWithoutTrace(result->thresholds);
      } else if (!IsInfeasible(result.status())) {
        errors[c] = result.status();
      }
    }
  });
  for (const absl::Status& s : errors) {
    if (!s.ok()) return s;
  }

  const CascadeEvaluation* best = nullptr;
  uint64_t feasible = 0;
  for (const auto& f : found) {
    if (!f.has_value()) continue;
    ++feasible;
    if (best == nullptr || Preferred(problem.objective, *f, *best)) best = &*f;
  }
  if (best == nullptr) {
    if (std::holds_alternative<MaxAccuracy>(problem.objective)) {
      double cheapest = std::numeric_limits<double>::infinity();
      for (const auto& c : candidates) cheapest = std::min(cheapest, pool.entries[c[0]].cost);
      return InfeasibleError(absl::StrFormat(
          "no cascade fits cost budget %.6g; the cheapest candidate costs %.6g",
          std::get<MaxAccuracy>(problem.objective).budget, cheapest));
    }
    // Nearest miss: the most accurate grid point of any candidate.
    double reachable = 0.0;
    std::string where;
    for (const auto& c : candidates) {
      const std::vector<std::string> ids = IdsOf(pool, c);
      absl::StatusOr<CascadeProfile> profile =
          CascadeProfile::Build(pool, ids, problem.metric, problem.aggregation);
      if (!profile.ok()) continue;
      absl::StatusOr<ThresholdGrid> grid =
          BuildThresholdGrid(*profile, problem.grid_resolution);
      if (!grid.ok()) continue;
      absl::StatusOr<ThresholdSearchResult> r = SearchThresholds(
          *profile, *grid, CostBudget{std::numeric_limits<double>::max()});
      if (r.ok() && r->evaluation.accuracy > reachable) {
        reachable = r->evaluation.accuracy;
        where = absl::StrJoin(ids, "+");
      }
    }
    return InfeasibleError(absl::StrFormat(
        "no cascade reaches accuracy %.6g; the best reachable is %.6g (%s)",
        std::get<MinCost>(problem.objective).floor, reachable, where));
  }

  SelectionResult result;
  result.spec = best->spec;
  absl::StatusOr<CascadeEvaluation> full = EvaluateCascade(best->spec, pool, problem.jobs);
  if (!full.ok()) return full.status();
  result.evaluation = *std::move(full);
  result.candidates_searched = candidates.size();
  result.candidates_feasible = feasible;
  result.enumeration = stats;
  return result;
}

std::vector<FrontierPoint> ParetoFrontier(std::vector<FrontierPoint> points) {
  std::sort(points.begin(), points.end(),
            [](const FrontierPoint& a, const FrontierPoint& b) {
              if (a.evaluation.avg_cost != b.evaluation.avg_cost) {
                return a.evaluation.avg_cost < b.evaluation.avg_cost;
              }
              if (a.evaluation.accuracy != b.evaluation.accuracy) {
                return a.evaluation.accuracy > b.evaluation.accuracy;
              }
              return SpecLess(a.spec, b.spec);
            });
  std::vector<FrontierPoint> frontier;
  for (FrontierPoint& p : points) {
    if (frontier.empty() || p.evaluation.accuracy > frontier.back().evaluation.accuracy) {
      frontier.push_back(std::move(p));
    }
  }
  return frontier;
}

std::string FrontierCsv(const std::vector<FrontierPoint>& frontier) {
  std::string out = "avg_cost,accuracy,worst_case_cost,models,thresholds\n";
  for (const FrontierPoint& p : frontier) {
    std::vector<std::string> ts;
    for (double t : p.spec.thresholds) ts.push_back(FormatThreshold(t));
    absl::StrAppendFormat(&out, "%.17g,%.17g,%.17g,%s,%s\n", p.evaluation.avg_cost,
                          p.evaluation.accuracy, p.evaluation.worst_case_cost,
                          absl::StrJoin(p.spec.models, "+"), absl::StrJoin(ts, ";"));
  }
  return out;
}

absl::StatusOr<std::vector<FrontierPoint>> CollectFrontierCandidates(
    const SelectionProblem& problem, bool cascades) {
  if (absl::Status s = ValidateProblem(problem, /*with_objective=*/false); !s.ok()) return s;
  const ModelPool& pool = *problem.pool;
  const std::vector<std::vector<size_t>> candidates = AllCandidates(problem, nullptr);
  std::vector<std::vector<FrontierPoint>> per(candidates.size());
  std::vector<absl::Status> errors(candidates.size());
  ParallelFor(candidates.size(), problem.jobs, [&](size_t begin, size_t end) {
    for (size_t c = begin; c < end; ++c) {
      const std::vector<std::string> ids = IdsOf(pool, candidates[c]);
      absl::StatusOr<CascadeProfile> profile =
          CascadeProfile::Build(pool, ids, problem.metric, problem.aggregation);
      if (!profile.ok()) {
        errors[c] = profile.status();
        continue;
      }
      if (!cascades || ids.size() == 1) {
        const std::vector<double> never(ids.size() - 1,
                                        std::numeric_limits<double>::infinity());
        CascadeEvaluation eval = profile->EvaluateWithoutTrace(never);
        eval.spec.thresholds.assign(ids.size() - 1, HighestThreshold(problem.metric));
        per[c].push_back({eval.spec, std::move(eval)});
        continue;
      }
      absl::StatusOr<ThresholdGrid> grid =
          BuildThresholdGrid(*profile, problem.grid_resolution);
      if (!grid.ok()) {
        errors[c] = grid.status();
        continue;
      }
      std::vector<size_t> at(grid->stages.size(), 0);
      std::vector<double> t(grid->stages.size());
      while (true) {
        for (size_t s = 0; s < at.size(); ++s) t[s] = grid->stages[s][at[s]];
        CascadeEvaluation eval = profile->EvaluateWithoutTrace(t);
        per[c].push_back({eval.spec, std::move(eval)});
        size_t pos = at.size();
        while (pos > 0 && ++at[pos - 1] == grid->stages[pos - 1].size()) at[--pos] = 0;
        if (pos == 0) break;
      }
    }
  });
  for (const absl::Status& s : errors) {
    if (!s.ok()) return s;
  }
  std::vector<FrontierPoint> points;
  for (auto& v : per) {
    points.insert(points.end(), std::make_move_iterator(v.begin()),
                  std::make_move_iterator(v.end()));
  }
  return points;
}

double Speedup(double baseline_cost, double cascade_cost) {
  return baseline_cost / cascade_cost;
}

absl::StatusOr<SelfCascadeResult> AssembleSelfCascade(
    const ModelPool& pool, std::string_view low_id, std::string_view high_id,
    const ThresholdTarget& target, ConfidenceMetric metric,
    AggregationMode aggregation, int grid_resolution) {
  absl::StatusOr<size_t> low_index = pool.IndexOf(low_id);
  if (!low_index.ok()) return low_index.status();
  absl::StatusOr<size_t> high_index = pool.IndexOf(high_id);
  if (!high_index.ok()) return high_index.status();
  const PredictionSet& low = pool.entries[*low_index];
  const PredictionSet& high = pool.entries[*high_index];
  if (low.model_type != high.model_type) {
    return absl::InvalidArgumentError(absl::StrCat(
        "self-cascade needs one model type, got '", low.model_type, "' and '",
        high.model_type, "'"));
  }
  if (!low.resolution.has_value() || !high.resolution.has_value()) {
    return absl::InvalidArgumentError("self-cascade entries need resolution metadata");
  }
  if (!(*low.resolution < *high.resolution)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "low resolution ", *low.resolution, " is not below high resolution ",
        *high.resolution));
  }
  if (!(low.cost < high.cost)) {
    return absl::InvalidArgumentError("low-resolution entry must be cheaper");
  }
  const std::vector<std::string> ids = {low.model_id, high.model_id};
  absl::StatusOr<CascadeProfile> profile =
      CascadeProfile::Build(pool, ids, metric, aggregation);
  if (!profile.ok()) return profile.status();
  absl::StatusOr<ThresholdGrid> grid = BuildThresholdGrid(*profile, grid_resolution);
  if (!grid.ok()) return grid.status();
  absl::StatusOr<ThresholdSearchResult> search = SearchThresholds(*profile, *grid, target);
  if (!search.ok()) return search.status();
  SelfCascadeResult result;
  result.spec = search->evaluation.spec;
  result.evaluation = search->evaluation;
  result.speedup = Speedup(high.cost, result.evaluation.avg_cost);
  result.search = *std::move(search);
  return result;
}

std::string TypeNotation(const ModelPool& pool, const std::vector<std::string>& ids) {
  std::vector<std::string> types;
  for (const std::string& id : ids) {
    absl::StatusOr<size_t> i = pool.IndexOf(id);
    types.push_back(i.ok() ? pool.entries[*i].model_type : id);
  }
  return absl::StrJoin(types, "+");
}

}  // namespace committee
