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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "absl/strings/str_format.h"
#include "committee/cascade_engine.h"
#include "committee/confidence.h"
#include "committee/dense_cascade.h"
#include "committee/model_selection.h"
#include "committee/random.h"
#include "committee/status.h"
#include "committee/threshold_search.h"
#include "test_util.h"

namespace committee {
namespace {

using testing::BruteBest;
using testing::BruteForceSelect;
using testing::CalibratedPredictions;
using testing::CorruptedQuadrantPool;
using testing::ExhaustiveGrid;
using testing::RefDenseRoute;
using testing::ReplicatedSynth;
using testing::Synth;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome Fail(std::string detail) { return {false, std::move(detail)}; }

// A random pool: 2-4 models, 200-600 examples, 3-20 classes, costs rising.
ModelPool RandomPool(Rng& rng, size_t min_models = 2, size_t max_models = 4) {
  const size_t models = min_models + rng.Below(max_models - min_models + 1);
  const size_t classes = 3 + rng.Below(18);
  std::vector<double> acc, cost;
  double c = 0.5 + rng.Uniform();
  for (size_t m = 0; m < models; ++m) {
    acc.push_back(0.45 + 0.5 * rng.Uniform());
    cost.push_back(c);
    c *= 1.5 + 2 * rng.Uniform();
  }
  SynthConfig config = Synth(acc, cost, 200 + rng.Below(401), rng.NextU64(), classes,
                             rng.Uniform());
  return *GenerateSyntheticPool(config);
}

std::vector<std::string> Ids(const ModelPool& pool) {
  std::vector<std::string> ids;
  for (const auto& e : pool.entries) ids.push_back(e.model_id);
  return ids;
}

Outcome FlopsAccounting() {
  const std::vector<double> costs = {1.8, 10.3, 10.3, 10.3};
  auto avg = CostFromExitRatios(costs, std::vector<double>{0.673, 0.216, 0.056, 0.055});
  auto worst = CostFromExitRatios(costs, std::vector<double>{0, 0, 0, 1});
  if (!avg.ok() || !worst.ok()) return Fail("accounting rejected its inputs");
  const bool ok = std::abs(*avg - 6.9) <= 0.1 && std::abs(*worst - 32.6) <= 0.15;
  return {ok, absl::StrFormat("average %.4f (want 6.9 +- 0.1), worst case %.4f "
                              "(want 32.6 +- 0.15)",
                              *avg, *worst)};
}

Outcome Degeneracy() {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const ModelPool pool = RandomPool(rng);
    const std::vector<std::string> ids = Ids(pool);
    const size_t n = ids.size();
    auto ensemble = EvaluateEnsemble(ids, pool, AggregationMode::kMeanLogits);
    auto ones = EvaluateCascade(CascadeSpec{ids, std::vector<double>(n - 1, 1.0)}, pool);
    std::vector<double> zero(n - 1, 1.0);
    zero[0] = 0.0;
    auto first = EvaluateCascade(CascadeSpec{ids, zero}, pool);
    auto solo = EvaluateEnsemble(std::vector<std::string>{ids[0]}, pool,
                                 AggregationMode::kMeanLogits);
    if (!ensemble.ok() || !ones.ok() || !first.ok() || !solo.ok()) {
      return Fail(absl::StrFormat("seed %d: evaluation failed", seed));
    }
    if (!(*ones == *ensemble)) {
      return Fail(absl::StrFormat("seed %d: all-ones cascade differs from the ensemble", seed));
    }
    const bool same_as_first =
        first->num_correct == solo->num_correct && first->accuracy == solo->accuracy &&
        first->avg_cost == solo->avg_cost &&
        first->predicted_labels == solo->predicted_labels &&
        first->confidence_at_exit == solo->confidence_at_exit &&
        first->exit_counts[0] == pool.num_examples();
    if (!same_as_first) {
      return Fail(absl::StrFormat("seed %d: t_1 = 0 differs from the first model", seed));
    }
  }
  return {true, "20 seeds, all thresholds 1 == ensemble and t_1 = 0 == first model"};
}

Outcome ThresholdOracle() {
  uint64_t checks = 0;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(2000 + seed);
    const size_t models = 2 + seed % 2;
    std::vector<double> acc, cost;
    for (size_t m = 0; m < models; ++m) {
      acc.push_back(0.55 + 0.12 * static_cast<double>(m) + 0.05 * rng.Uniform());
      cost.push_back(std::pow(2.0 + rng.Uniform(), static_cast<double>(m)));
    }
    auto pool = GenerateSyntheticPool(Synth(acc, cost, 500, rng.NextU64()));
    const std::vector<std::string> ids = Ids(*pool);
    auto profile = CascadeProfile::Build(*pool, ids, ConfidenceMetric::kMaxProb,
                                         AggregationMode::kMeanLogits);
    const int resolution = models == 2 ? 20 : 12;
    auto grid = BuildThresholdGrid(*profile, resolution);
    const double full = profile->EvaluateAll().avg_cost;
    const std::vector<ThresholdTarget> targets = {CostBudget{full * 0.4},
                                                  CostBudget{full * 0.75},
                                                  AccuracyFloor{acc.back()},
                                                  MatchEnsemble{0.0}};
    for (const ThresholdTarget& target : targets) {
      const auto oracle = ExhaustiveGrid(*profile, *grid, target);
      auto found = SearchThresholds(*profile, *grid, target);
      ++checks;
      if (!oracle) {
        if (!IsInfeasible(found.status())) {
          return Fail(absl::StrFormat("seed %d, %s: oracle infeasible, search did not say so",
                                      seed, DescribeTarget(target)));
        }
        continue;
      }
      if (!found.ok()) {
        return Fail(absl::StrFormat("seed %d, %s: %s", seed, DescribeTarget(target),
                                    found.status().ToString()));
      }
      const double oracle_acc =
          static_cast<double>(oracle->correct) / static_cast<double>(pool->num_examples());
      if (found->evaluation.accuracy != oracle_acc ||
          found->evaluation.avg_cost != oracle->avg_cost) {
        return Fail(absl::StrFormat(
            "seed %d, %s: search (%.6f, %.6f) vs exhaustive (%.6f, %.6f)", seed,
            DescribeTarget(target), found->evaluation.accuracy,
            found->evaluation.avg_cost, oracle_acc, oracle->avg_cost));
      }
    }
  }
  return {true, absl::StrFormat("10 seeds, %d targets, accuracy and avg_cost identical "
                                "to exhaustive grid enumeration",
                                checks)};
}

Outcome SelectionOracle() {
  uint64_t checks = 0;
  for (uint64_t seed = 0; seed < 5; ++seed) {
    auto pool = GenerateSyntheticPool(ReplicatedSynth(3, 2, 500, 3000 + seed));
    const std::vector<SelectionObjective> objectives = {MaxAccuracy{2.0}, MaxAccuracy{6.0},
                                                        MinCost{0.8}};
    for (const SelectionObjective& objective : objectives) {
      SelectionProblem problem;
      problem.pool = &*pool;
      problem.max_models = 3;
      problem.objective = objective;
      problem.grid_resolution = 10;
      const BruteBest oracle = BruteForceSelect(*pool, 3, objective, 10);
      auto r = SelectCascade(problem);
      ++checks;
      if (!oracle.found) {
        if (!IsInfeasible(r.status())) return Fail("oracle infeasible, selector not");
        continue;
      }
      if (!r.ok()) return Fail(r.status().ToString());
      const bool max_acc = std::holds_alternative<MaxAccuracy>(objective);
      const double got = max_acc ? r->evaluation.accuracy : r->evaluation.avg_cost;
      const double want = max_acc ? oracle.accuracy : oracle.avg_cost;
      if (got != want) {
        return Fail(absl::StrFormat("seed %d: selector objective %.6f, brute force %.6f",
                                    seed, got, want));
      }
    }
  }
  return {true, absl::StrFormat("5 seeds, %d objectives match brute force over every "
                                "tuple and grid point",
                                checks)};
}

Outcome CostMonotonicity() {
  uint64_t raises = 0;
  for (uint64_t instance = 0; instance < 100; ++instance) {
    Rng rng(4000 + instance);
    const ModelPool pool = RandomPool(rng);
    const std::vector<std::string> ids = Ids(pool);
    const ConfidenceMetric metric = static_cast<ConfidenceMetric>(rng.Below(4));
    const AggregationMode agg = rng.Below(2) == 0 ? AggregationMode::kMeanLogits
                                                  : AggregationMode::kMeanProbs;
    auto grid = BuildThresholdGrid(ids, pool, metric, agg, 5 + static_cast<int>(rng.Below(30)));
    if (!grid.ok()) return Fail(grid.status().ToString());
    std::vector<size_t> at;
    CascadeSpec spec{ids, {}, metric, agg};
    for (const auto& s : grid->stages) {
      at.push_back(rng.Below(s.size()));
      spec.thresholds.push_back(s[at.back()]);
    }
    auto base = EvaluateCascade(spec, pool);
    if (!base.ok()) return Fail(base.status().ToString());
    for (size_t k = 0; k < at.size(); ++k) {
      if (at[k] + 1 == grid->stages[k].size()) continue;
      CascadeSpec raised = spec;
      raised.thresholds[k] = grid->stages[k][at[k] + 1];
      auto e = EvaluateCascade(raised, pool);
      ++raises;
      if (!e.ok() || e->avg_cost < base->avg_cost) {
        return Fail(absl::StrFormat("instance %d stage %d: avg_cost fell from %.9f",
                                    instance, k + 1, base->avg_cost));
      }
    }
  }
  return {true, absl::StrFormat("100 instances, %d single-threshold raises, avg_cost "
                                "never decreased",
                                raises)};
}

Outcome CascadeEfficiency() {
  int wins = 0;
  std::vector<std::string> ratios;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    auto pool = GenerateSyntheticPool(Synth({0.72, 0.8}, {1.0, 3.0}, 4000, 5000 + seed));
    auto split = SplitDataset(*pool, 0.5, seed);
    if (!split.ok()) return Fail(split.status().ToString());
    const ModelPool& selection = split->first;
    const std::vector<std::string> ids = {"m0", "m1"};
    auto profile = CascadeProfile::Build(selection, ids, ConfidenceMetric::kMaxProb,
                                         AggregationMode::kMeanLogits);
    auto grid = BuildThresholdGrid(*profile, kDefaultGridResolution);
    auto r = SearchThresholds(*profile, *grid, MatchEnsemble{0.0});
    if (!r.ok()) return Fail(r.status().ToString());
    const CascadeEvaluation ens = profile->EvaluateAll();
    const double ratio = r->evaluation.avg_cost / ens.avg_cost;
    if (r->evaluation.accuracy >= ens.accuracy && ratio <= 0.85) ++wins;
    ratios.push_back(absl::StrFormat("%.2f", ratio));
  }
  std::string joined;
  for (const auto& s : ratios) joined += (joined.empty() ? "" : " ") + s;
  return {wins >= 8, absl::StrFormat("%d/10 seeds at ensemble accuracy with <= 85%% of "
                                     "its cost (cost ratios: %s)",
                                     wins, joined)};
}

Outcome EnumerationCount() {
  auto pool = GenerateSyntheticPool(ReplicatedSynth(8, 4, 10, 1));
  SelectionProblem problem;
  problem.pool = &*pool;
  problem.max_models = 4;
  CandidateStats stats;
  const size_t count = EnumerateCandidates(problem, &stats).size();
  return {count == 4672, absl::StrFormat("%d tuples (want 4672)", count)};
}

Outcome SelectiveEndpoint() {
  auto pool = GenerateSyntheticPool(Synth({0.771}, {1}, 1000, 6000));
  auto overall = EvaluateEnsemble(std::vector<std::string>{"m0"}, *pool,
                                  AggregationMode::kMeanLogits);
  std::vector<double> ks;
  for (int k = 1; k <= 100; ++k) ks.push_back(k);
  auto curve = SelectiveAccuracy(pool->entries[0], pool->labels, pool->num_classes,
                                 ConfidenceMetric::kMaxProb, ks);
  if (!curve.ok()) return Fail(curve.status().ToString());
  if (curve->points.back().accuracy != overall->accuracy) {
    return Fail(absl::StrFormat("k = 100 gives %.6f, overall %.6f",
                                curve->points.back().accuracy, overall->accuracy));
  }
  const auto [preds, labels] = CalibratedPredictions(1000, 771, 10, 6001);
  auto calibrated = SelectiveAccuracy(preds, labels, 10, ConfidenceMetric::kMaxProb, ks);
  if (!calibrated.ok()) return Fail(calibrated.status().ToString());
  for (size_t i = 1; i < calibrated->points.size(); ++i) {
    if (calibrated->points[i].accuracy > calibrated->points[i - 1].accuracy) {
      return Fail(absl::StrFormat("calibrated curve rises at k = %g",
                                  calibrated->points[i].k));
    }
  }
  if (calibrated->points.back().accuracy != 0.771) {
    return Fail("calibrated fixture does not end at 0.771");
  }
  return {true, absl::StrFormat("k = 100 equals overall accuracy %.3f; calibrated "
                                "curve non-increasing, ends at 0.771",
                                overall->accuracy)};
}

Outcome DenseOracle() {
  DenseLabelSet labels{{0, 0, 1, 255}, 255};
  auto hand = Miou(std::vector<uint32_t>{0, 1, 1, 0}, labels, 2);
  if (!hand.ok() || hand->miou != 0.5 || hand->per_class_iou[0] != 0.5 ||
      hand->per_class_iou[1] != 0.5) {
    return Fail("2x2 mIoU differs from the hand count");
  }
  double worst_gap = 0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const DensePool pool = CorruptedQuadrantPool(7000 + seed);
    for (double t1 : {0.0, 0.4123, 0.7071, 0.8811, 1.0}) {
      DenseCascadeSpec spec;
      spec.models = {"coarse", "fine"};
      spec.thresholds = {t1};
      spec.cell_size = 8;
      auto eval = EvaluateDenseCascade(spec, pool);
      if (!eval.ok()) return Fail(eval.status().ToString());
      const auto ref = RefDenseRoute(pool, {t1}, 8, spec.t_unlab);
      worst_gap = std::max(worst_gap, std::abs(eval->miou - static_cast<double>(ref.miou)));
      if (eval->avg_cost != static_cast<double>(ref.avg_cost)) {
        return Fail(absl::StrFormat("t_1 = %g: cost %.17g vs %.17g", t1, eval->avg_cost,
                                    static_cast<double>(ref.avg_cost)));
      }
    }
  }
  return {worst_gap <= 1e-9,
          absl::StrFormat("16x16 fixture: max mIoU gap %.3g, costs exact; 2x2 mIoU = 0.5",
                          worst_gap)};
}

Outcome WorstCaseGuarantee() {
  uint64_t checks = 0;
  for (uint64_t seed = 0; seed < 3; ++seed) {
    auto pool = GenerateSyntheticPool(ReplicatedSynth(3, 2, 500, 8000 + seed));
    for (const SelectionObjective& objective :
         {SelectionObjective{MaxAccuracy{4.0}}, SelectionObjective{MinCost{0.75}}}) {
      SelectionProblem problem;
      problem.pool = &*pool;
      problem.max_models = 3;
      problem.objective = objective;
      problem.grid_resolution = 10;
      auto free = SelectCascade(problem);
      if (!free.ok()) return Fail(free.status().ToString());
      for (double bound : {1.5, 3.5, 7.0, 9.0}) {
        problem.worst_case_bound = bound;
        auto r = SelectCascade(problem);
        ++checks;
        if (IsInfeasible(r.status())) continue;
        if (!r.ok()) return Fail(r.status().ToString());
        if (r->evaluation.worst_case_cost > bound) {
          return Fail(absl::StrFormat("bound %g exceeded: %g", bound,
                                      r->evaluation.worst_case_cost));
        }
        const bool better = std::holds_alternative<MaxAccuracy>(objective)
                                ? r->evaluation.accuracy > free->evaluation.accuracy
                                : r->evaluation.avg_cost < free->evaluation.avg_cost;
        if (better) return Fail(absl::StrFormat("bound %g beats the unconstrained optimum", bound));
      }
    }
  }
  return {true, absl::StrFormat("%d bounded selections within bound and no better than "
                                "unconstrained",
                                checks)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace committee

int main() {
  using committee::Criterion;
  const std::vector<Criterion> criteria = {
      {"flops-accounting", committee::FlopsAccounting},
      {"degeneracy", committee::Degeneracy},
      {"threshold-search-oracle", committee::ThresholdOracle},
      {"model-selection-oracle", committee::SelectionOracle},
      {"cost-monotonicity", committee::CostMonotonicity},
      {"cascade-efficiency", committee::CascadeEfficiency},
      {"enumeration-count", committee::EnumerationCount},
      {"selective-accuracy-endpoint", committee::SelectiveEndpoint},
      {"dense-oracle", committee::DenseOracle},
      {"worst-case-guarantee", committee::WorstCaseGuarantee},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    const committee::Outcome o = c.run();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %s (%.2fs): %s\n", o.pass ? "PASS" : "FAIL", c.name, secs,
                o.detail.c_str());
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures,
              criteria.size());
  return failures == 0 ? 0 : 1;
}
