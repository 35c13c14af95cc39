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

#include "committee/threshold_search.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "committee/kernels.h"
#include "committee/status.h"

namespace committee {
namespace {

// Prune only when a bound clears the limit by more than rounding could.
bool ClearlyAbove(double value, double limit) {
  return value > limit + 1e-12 * std::max(1.0, std::abs(limit));
}

struct Candidate {
  std::vector<double> thresholds;
  uint64_t num_correct = 0;
  double avg_cost = 0.0;
};

class GridSearcher {
 public:
  GridSearcher(const CascadeProfile& profile, const ThresholdGrid& grid,
               bool cost_budget, double limit)
      : profile_(profile),
        grid_(grid),
        cost_budget_(cost_budget),
        limit_(limit),
        n_(profile.num_examples()),
        stages_(profile.num_stages()),
        counts_(stages_, 0),
        current_(stages_ - 1, 0.0) {}

  void Run() {
    std::vector<uint8_t> alive(n_, 1);
    Descend(0, alive, 0);
  }

  const std::optional<Candidate>& best() const { return best_; }
  uint64_t points_evaluated() const { return points_; }
  uint64_t best_correct_seen() const { return max_correct_; }
  double min_cost_seen() const { return min_cost_; }

 private:
  void Descend(size_t depth, const std::vector<uint8_t>& alive, uint64_t correct) {
    const kernels::KernelTable& kt = kernels::Active();
    if (depth + 1 == stages_) {
      std::vector<uint8_t> rest = alive;
      const kernels::ExitCounts last = kt.exit_scan(
          profile_.confidences(depth).data(), profile_.correct(depth).data(),
          rest.data(), n_, -std::numeric_limits<double>::infinity());
      counts_[depth] = last.exited;
      Consider(correct + last.exited_correct);
      return;
    }
    std::vector<uint8_t> next(n_);
    for (double t : grid_.stages[depth]) {
      next = alive;
      const kernels::ExitCounts here = kt.exit_scan(
          profile_.confidences(depth).data(), profile_.correct(depth).data(),
          next.data(), n_, t);
      counts_[depth] = here.exited;
      current_[depth] = t;

      // Cheapest point below this node: everything still running stops at
      // the next stage. Grows with t.
      uint64_t remaining = n_;
      for (size_t k = 0; k <= depth; ++k) remaining -= counts_[k];
      std::vector<uint64_t> floor_counts(counts_.begin(), counts_.begin() + depth + 1);
      floor_counts.resize(stages_, 0);
      floor_counts[depth + 1] = remaining;
      const double bound = AverageCost(profile_.stage_costs(), floor_counts, n_);
      if (cost_budget_) {
        if (ClearlyAbove(bound, limit_)) {
          min_cost_ = std::min(min_cost_, bound);
          break;
        }
      } else if (best_.has_value() && ClearlyAbove(bound, best_->avg_cost)) {
        break;
      }
      Descend(depth + 1, next, correct + here.exited_correct);
    }
    std::fill(counts_.begin() + static_cast<std::ptrdiff_t>(depth), counts_.end(), 0);
  }

  void Consider(uint64_t correct) {
    ++points_;
    const double cost = AverageCost(profile_.stage_costs(), counts_, n_);
    const double accuracy = static_cast<double>(correct) / static_cast<double>(n_);
    min_cost_ = std::min(min_cost_, cost);
    bool feasible;
    bool better;
    if (cost_budget_) {
      feasible = cost <= limit_;
      if (feasible) max_correct_ = std::max(max_correct_, correct);
      better = !best_.has_value() || correct > best_->num_correct ||
               (correct == best_->num_correct && cost < best_->avg_cost);
    } else {
      max_correct_ = std::max(max_correct_, correct);
      feasible = accuracy >= limit_;
      better = !best_.has_value() || cost < best_->avg_cost ||
               (cost == best_->avg_cost && correct > best_->num_correct);
    }
    if (feasible && better) best_ = Candidate{current_, correct, cost};
  }

  const CascadeProfile& profile_;
  const ThresholdGrid& grid_;
  const bool cost_budget_;
  const double limit_;
  const size_t n_;
  const size_t stages_;
  std::vector<uint64_t> counts_;
  std::vector<double> current_;
  std::optional<Candidate> best_;
  uint64_t points_ = 0;
  uint64_t max_correct_ = 0;
  double min_cost_ = std::numeric_limits<double>::infinity();
};

}  // namespace

uint64_t ThresholdGrid::NumPoints() const {
  uint64_t total = 1;
  for (const auto& s : stages) total *= s.size();
  return total;
}

std::string DescribeTarget(const ThresholdTarget& target) {
  if (const auto* t = std::get_if<CostBudget>(&target)) {
    return absl::StrFormat("cost budget %.6g", t->budget);
  }
  if (const auto* t = std::get_if<AccuracyFloor>(&target)) {
    return absl::StrFormat("accuracy floor %.6g", t->floor);
  }
  return absl::StrFormat("match ensemble (slack %.6g)",
                         std::get<MatchEnsemble>(target).slack);
}

absl::StatusOr<ThresholdGrid> BuildThresholdGrid(const CascadeProfile& profile,
                                                 int grid_resolution) {
  if (grid_resolution < 2) {
    return absl::InvalidArgumentError("grid resolution must be at least 2");
  }
  const size_t n = profile.num_examples();
  const uint64_t g = static_cast<uint64_t>(grid_resolution);
  ThresholdGrid grid;
  std::vector<double> sorted(n);
  for (size_t k = 0; k + 1 < profile.num_stages(); ++k) {
    std::span<const double> scores = profile.confidences(k);
    std::copy(scores.begin(), scores.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> candidates = {LowestThreshold(profile.metric()),
                                      HighestThreshold(profile.metric())};
    for (uint64_t j = 0; j <= g; ++j) {
      candidates.push_back(sorted[j * (n - 1) / g]);
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()),
                     candidates.end());
    grid.stages.push_back(std::move(candidates));
  }
  return grid;
}

absl::StatusOr<ThresholdGrid> BuildThresholdGrid(
    std::span<const std::string> models, const ModelPool& pool,
    ConfidenceMetric metric, AggregationMode aggregation, int grid_resolution) {
  absl::StatusOr<CascadeProfile> profile =
      CascadeProfile::Build(pool, models, metric, aggregation);
  if (!profile.ok()) return profile.status();
  return BuildThresholdGrid(*profile, grid_resolution);
}

absl::StatusOr<ThresholdSearchResult> SearchThresholds(
    const CascadeProfile& profile, const ThresholdGrid& grid,
    const ThresholdTarget& target) {
  if (grid.stages.size() + 1 != profile.num_stages()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "grid has ", grid.stages.size(), " stages, cascade needs ",
        profile.num_stages() - 1));
  }
  for (const auto& s : grid.stages) {
    if (s.empty()) return absl::InvalidArgumentError("empty candidate list");
  }
  const size_t n = profile.num_examples();
  const bool cost_budget = std::holds_alternative<CostBudget>(target);
  double limit = 0.0;
  if (cost_budget) {
    limit = std::get<CostBudget>(target).budget;
    if (!(limit > 0.0)) return absl::InvalidArgumentError("cost budget must be positive");
  } else if (const auto* floor = std::get_if<AccuracyFloor>(&target)) {
    limit = floor->floor;
    if (!(limit >= 0.0 && limit <= 1.0)) {
      return absl::InvalidArgumentError("accuracy floor must be in [0, 1]");
    }
  } else {
    const double slack = std::get<MatchEnsemble>(target).slack;
    if (!(slack >= 0.0)) return absl::InvalidArgumentError("slack must be >= 0");
    const double ensemble =
        static_cast<double>(profile.correct_count(profile.num_stages() - 1)) /
        static_cast<double>(n);
    limit = ensemble - slack;
  }

  GridSearcher searcher(profile, grid, cost_budget, limit);
  searcher.Run();
  if (!searcher.best().has_value()) {
    if (cost_budget) {
      return InfeasibleError(absl::StrFormat(
          "%s is unreachable: the cheapest grid point costs %.6g",
          DescribeTarget(target), searcher.min_cost_seen()));
    }
    return InfeasibleError(absl::StrFormat(
        "accuracy %.6g (%s) is unreachable: the best grid point reaches %.6g",
        limit, DescribeTarget(target),
        static_cast<double>(searcher.best_correct_seen()) / static_cast<double>(n)));
  }
  ThresholdSearchResult result;
  result.thresholds = searcher.best()->thresholds;
  result.evaluation = profile.Evaluate(result.thresholds);
  result.accuracy_floor = cost_budget ? 0.0 : limit;
  result.points_evaluated = searcher.points_evaluated();
  return result;
}

absl::StatusOr<ThresholdSearchResult> SearchThresholds(
    std::span<const std::string> models, const ModelPool& pool,
    const ThresholdTarget& target, ConfidenceMetric metric,
    AggregationMode aggregation, const ThresholdGrid& grid) {
  absl::StatusOr<CascadeProfile> profile =
      CascadeProfile::Build(pool, models, metric, aggregation);
  if (!profile.ok()) return profile.status();
  return SearchThresholds(*profile, grid, target);
}

absl::StatusOr<std::vector<SweepPoint>> ThresholdSweep(
    const CascadeProfile& profile, const ThresholdGrid& grid, size_t stage,
    std::span<const double> base_thresholds) {
  const size_t thresholded = profile.num_stages() - 1;
  if (stage < 1 || stage > thresholded) {
    return absl::OutOfRangeError(absl::StrCat(
        "stage ", stage, " is out of range; the cascade has ", thresholded,
        " thresholded stages"));
  }
  if (grid.stages.size() != thresholded) {
    return absl::InvalidArgumentError("grid does not match the cascade");
  }
  std::vector<double> thresholds;
  if (base_thresholds.empty()) {
    thresholds.assign(thresholded, HighestThreshold(profile.metric()));
  } else if (base_thresholds.size() == thresholded) {
    thresholds.assign(base_thresholds.begin(), base_thresholds.end());
  } else {
    return absl::InvalidArgumentError("base thresholds do not match the cascade");
  }
  std::vector<SweepPoint> points;
  for (double t : grid.stages[stage - 1]) {
    thresholds[stage - 1] = t;
    const CascadeSummary s = profile.Summarize(thresholds);
    points.push_back({t, s.accuracy, s.avg_cost});
  }
  return points;
}

std::string SweepCsv(const std::vector<SweepPoint>& points) {
  std::string out = "t,accuracy,avg_cost\n";
  for (const SweepPoint& p : points) {
    absl::StrAppendFormat(&out, "%.17g,%.17g,%.17g\n", p.threshold, p.accuracy,
                          p.avg_cost);
  }
  return out;
}

}  // namespace committee
