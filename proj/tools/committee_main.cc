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

// committee: command-line front end. Machine-readable output (JSON, CSV)
// goes to the named file or stdout; human summaries go to stderr.
//
// Exit codes: 0 success, 1 bad input, 2 infeasible target.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "committee/cascade_engine.h"
#include "committee/confidence.h"
#include "committee/dense_cascade.h"
#include "committee/model_selection.h"
#include "committee/parallel.h"
#include "committee/prediction_store.h"
#include "committee/report.h"
#include "committee/status.h"
#include "committee/threshold_search.h"
#include "json.hpp"

namespace committee {
namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInfeasible = 2;

// Every flag any subcommand may use. Unused ones keep their defaults.
struct Flags {
  std::string manifest;
  std::string models;
  std::optional<std::string> thresholds;
  std::string metric = "max-prob";
  std::string aggregation = "mean-logits";
  int grid = kDefaultGridResolution;
  std::optional<double> target_flops;
  std::optional<double> target_accuracy;
  std::optional<double> match_ensemble;
  std::optional<double> worst_case;
  int max_models = 4;
  std::string order = "all";
  std::optional<double> selection_fraction;
  uint64_t seed = 0;
  int jobs = 1;
  std::string report;
  std::string trace;
  std::string csv;
  std::string exit_table;
  std::string out;
  std::string cell_size = "full";
  double t_unlab = kDefaultUnlabeledThreshold;
  int stage = 1;
  std::string ks;
  bool dense = false;
  bool ensembles_only = false;
  // synth
  size_t examples = 1000;
  size_t classes = 10;
  std::string accuracies;
  std::string costs;
  double correlation = 0.5;
  double sharpness = 2.0;
  std::string ids;
  std::string types;
  std::string replicates;
  std::string resolutions;
};

int Fail(const absl::Status& status) {
  const bool infeasible = IsInfeasible(status);
  std::cerr << (infeasible ? "infeasible: " : "error: ") << status.message() << "\n";
  return infeasible ? kExitInfeasible : kExitInput;
}

absl::Status WriteText(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return absl::OkStatus();
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) return absl::PermissionDeniedError(absl::StrCat("cannot write ", path));
  return absl::OkStatus();
}

absl::Status WriteJson(const std::string& path, const json& doc) {
  return WriteText(path, doc.dump(2) + "\n");
}

std::vector<std::string> SplitList(const std::string& text) {
  std::vector<std::string> out;
  for (absl::string_view piece : absl::StrSplit(text, absl::ByAnyChar(",+"), absl::SkipWhitespace())) {
    out.emplace_back(absl::StripAsciiWhitespace(piece));
  }
  return out;
}

absl::StatusOr<std::vector<double>> ParseDoubles(const std::string& text,
                                                 const std::string& what) {
  std::vector<double> out;
  for (absl::string_view piece : absl::StrSplit(text, ',', absl::SkipWhitespace())) {
    double v;
    if (!absl::SimpleAtod(absl::StripAsciiWhitespace(piece), &v) || std::isnan(v)) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad number '", piece, "' in ", what));
    }
    out.push_back(v);
  }
  return out;
}

// The parsed flags of the active subcommand, defaults included, so a report
// can be replayed exactly.
json ConfigJson(const CLI::App* sub) {
  json flags = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_name();
    if (name == "--help" || name == "-h" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      flags[name] = r.size() == 1 ? json(r[0]) : json(r);
    } else if (!opt->get_default_str().empty()) {
      flags[name] = opt->get_default_str();
    }
  }
  return {{"subcommand", sub->get_name()}, {"flags", std::move(flags)}};
}

struct Modes {
  ConfidenceMetric metric;
  AggregationMode aggregation;
};

absl::StatusOr<Modes> ParseModes(const Flags& f) {
  absl::StatusOr<ConfidenceMetric> metric = ParseMetric(f.metric);
  if (!metric.ok()) return metric.status();
  absl::StatusOr<AggregationMode> agg = ParseAggregation(f.aggregation);
  if (!agg.ok()) return agg.status();
  return Modes{*metric, *agg};
}

absl::StatusOr<ThresholdTarget> ParseTarget(const Flags& f, bool allow_match) {
  const int given = f.target_flops.has_value() + f.target_accuracy.has_value() +
                    f.match_ensemble.has_value();
  if (given != 1) {
    return absl::InvalidArgumentError(
        allow_match ? "give exactly one of --target-flops, --target-accuracy, "
                      "--match-ensemble"
                    : "give exactly one of --target-flops, --target-accuracy");
  }
  if (f.target_flops) return CostBudget{*f.target_flops};
  if (f.target_accuracy) return AccuracyFloor{*f.target_accuracy};
  if (!allow_match) return absl::InvalidArgumentError("--match-ensemble is not valid here");
  return MatchEnsemble{*f.match_ensemble};
}

// Loads the pool and, when --selection-fraction is set, splits it. The
// second member is the held-out evaluation split, if any.
absl::StatusOr<std::pair<ModelPool, std::optional<ModelPool>>> LoadSplit(const Flags& f) {
  absl::StatusOr<ModelPool> pool = LoadPool(f.manifest);
  if (!pool.ok()) return pool.status();
  if (!f.selection_fraction) {
    return std::pair<ModelPool, std::optional<ModelPool>>{*std::move(pool), std::nullopt};
  }
  auto halves = SplitDataset(*pool, *f.selection_fraction, f.seed);
  if (!halves.ok()) return halves.status();
  return std::pair<ModelPool, std::optional<ModelPool>>{std::move(halves->first),
                                                         std::move(halves->second)};
}

std::string Summary(const ModelPool& pool, const CascadeEvaluation& e) {
  std::vector<std::string> ratios, thresholds;
  for (double r : e.exit_ratios) ratios.push_back(absl::StrFormat("%.1f%%", 100.0 * r));
  for (double t : e.spec.thresholds) thresholds.push_back(absl::StrFormat("%.6g", t));
  return absl::StrFormat(
      "%s [%s] thresholds (%s): accuracy %.4f, avg cost %.6g, worst case %.6g, "
      "exit ratios %s\n",
      TypeNotation(pool, e.spec.models), absl::StrJoin(e.spec.models, "+"),
      absl::StrJoin(thresholds, ", "), e.accuracy, e.avg_cost, e.worst_case_cost,
      absl::StrJoin(ratios, " / "));
}

// Trace and exit-table side outputs shared by the classification commands.
absl::Status WriteSideOutputs(const Flags& f, const ModelPool& pool,
                              const CascadeEvaluation& e) {
  if (!f.trace.empty()) {
    if (absl::Status s = WriteText(f.trace, TraceCsv(e, pool.labels)); !s.ok()) return s;
  }
  if (!f.exit_table.empty()) {
    const std::string table = ExitTableCsv({e}, {TypeNotation(pool, e.spec.models)});
    if (absl::Status s = WriteText(f.exit_table, table); !s.ok()) return s;
  }
  return absl::OkStatus();
}

// ---- subcommands -----------------------------------------------------------

int RunValidate(const Flags& f, const CLI::App* sub) {
  json doc = {{"config", ConfigJson(sub)}};
  json warnings = json::array();
  if (f.dense) {
    absl::StatusOr<DensePool> pool = LoadDensePool(f.manifest);
    if (!pool.ok()) return Fail(pool.status());
    doc["num_images"] = pool->num_images;
    doc["height"] = pool->height;
    doc["width"] = pool->width;
    doc["num_classes"] = pool->num_classes;
    json entries = json::array();
    for (const auto& e : pool->entries) {
      entries.push_back({{"model_id", e.model_id}, {"model_type", e.model_type},
                         {"cost", e.cost}});
    }
    doc["entries"] = std::move(entries);
  } else {
    absl::StatusOr<ModelPool> pool = LoadPool(f.manifest);
    if (!pool.ok()) return Fail(pool.status());
    doc["num_examples"] = pool->num_examples();
    doc["num_classes"] = pool->num_classes;
    json entries = json::array();
    const double chance = 1.0 / static_cast<double>(pool->num_classes);
    for (size_t i = 0; i < pool->entries.size(); ++i) {
      const PredictionSet& e = pool->entries[i];
      auto eval = EvaluateEnsemble(std::vector<std::string>{e.model_id}, *pool,
                                   AggregationMode::kMeanLogits);
      if (!eval.ok()) return Fail(eval.status());
      entries.push_back({{"model_id", e.model_id},
                         {"model_type", e.model_type},
                         {"cost", e.cost},
                         {"resolution", e.resolution ? json(*e.resolution) : json(nullptr)},
                         {"replicate_index", e.replicate_index},
                         {"accuracy", eval->accuracy}});
      if (eval->accuracy <= chance) {
        warnings.push_back(absl::StrFormat("entry '%s': accuracy %.4f is at or below chance",
                                           e.model_id, eval->accuracy));
      }
      for (size_t j = 0; j < i; ++j) {
        if (pool->entries[j].logits == e.logits) {
          warnings.push_back(absl::StrFormat("entries '%s' and '%s' have identical logits",
                                             pool->entries[j].model_id, e.model_id));
        }
      }
    }
    doc["entries"] = std::move(entries);
  }
  doc["warnings"] = warnings;
  for (const auto& w : warnings) std::cerr << "warning: " << w.get<std::string>() << "\n";
  if (absl::Status s = WriteJson(f.report, doc); !s.ok()) return Fail(s);
  std::cerr << "ok: " << f.manifest << "\n";
  return kExitOk;
}

int RunSplit(const Flags& f) {
  absl::StatusOr<ModelPool> pool = LoadPool(f.manifest);
  if (!pool.ok()) return Fail(pool.status());
  auto halves = SplitDataset(*pool, f.selection_fraction.value_or(0.5), f.seed);
  if (!halves.ok()) return Fail(halves.status());
  const std::filesystem::path out(f.out);
  for (const auto& [half, name] : {std::pair{&halves->first, "selection"},
                                   std::pair{&halves->second, "evaluation"}}) {
    absl::StatusOr<PoolManifest> m = SavePool(*half, out / name);
    if (!m.ok()) return Fail(m.status());
    std::cerr << name << ": " << half->num_examples() << " examples -> "
              << (out / name / "pool.json").string() << "\n";
  }
  return kExitOk;
}

int RunSynth(const Flags& f) {
  SynthConfig config;
  config.num_examples = f.examples;
  config.num_classes = f.classes;
  config.correlation = f.correlation;
  config.sharpness = f.sharpness;
  config.seed = f.seed;
  auto acc = ParseDoubles(f.accuracies, "--accuracies");
  if (!acc.ok()) return Fail(acc.status());
  auto costs = ParseDoubles(f.costs, "--costs");
  if (!costs.ok()) return Fail(costs.status());
  config.accuracies = *acc;
  config.costs = *costs;
  config.model_ids = SplitList(f.ids);
  config.model_types = SplitList(f.types);
  for (const std::string& r : SplitList(f.replicates)) {
    int v;
    if (!absl::SimpleAtoi(r, &v) || v < 0) {
      return Fail(absl::InvalidArgumentError(absl::StrCat("bad replicate index '", r, "'")));
    }
    config.replicate_indices.push_back(v);
  }
  for (const std::string& r : SplitList(f.resolutions)) {
    int v;
    if (r == "none" || r == "null") {
      config.resolutions.push_back(std::nullopt);
    } else if (absl::SimpleAtoi(r, &v) && v > 0) {
      config.resolutions.push_back(v);
    } else {
      return Fail(absl::InvalidArgumentError(absl::StrCat("bad resolution '", r, "'")));
    }
  }
  absl::StatusOr<ModelPool> pool = GenerateSyntheticPool(config);
  if (!pool.ok()) return Fail(pool.status());
  absl::StatusOr<PoolManifest> m = SavePool(*pool, f.out);
  if (!m.ok()) return Fail(m.status());
  std::cerr << "wrote " << pool->entries.size() << " entries x " << pool->num_examples()
            << " examples to " << (std::filesystem::path(f.out) / "pool.json").string()
            << "\n";
  return kExitOk;
}

int RunEvaluate(const Flags& f, const CLI::App* sub) {
  auto modes = ParseModes(f);
  if (!modes.ok()) return Fail(modes.status());
  absl::StatusOr<ModelPool> pool = LoadPool(f.manifest);
  if (!pool.ok()) return Fail(pool.status());
  CascadeSpec spec;
  spec.models = SplitList(f.models);
  spec.metric = modes->metric;
  spec.aggregation = modes->aggregation;
  if (f.thresholds.has_value()) {
    auto t = ParseDoubles(*f.thresholds, "--thresholds");
    if (!t.ok()) return Fail(t.status());
    spec.thresholds = *t;
  } else if (!spec.models.empty()) {
    // No thresholds: the full ensemble.
    spec.thresholds.assign(spec.models.size() - 1, HighestThreshold(spec.metric));
  }
  absl::StatusOr<CascadeEvaluation> eval =
      f.thresholds.has_value()
          ? EvaluateCascade(spec, *pool, f.jobs)
          : EvaluateEnsemble(spec.models, *pool, spec.aggregation, f.jobs);
  if (!eval.ok()) return Fail(eval.status());
  json doc = {{"config", ConfigJson(sub)}, {"evaluation", EvaluationJson(*eval)},
              {"notation", TypeNotation(*pool, eval->spec.models)}};
  if (absl::Status s = WriteJson(f.report, doc); !s.ok()) return Fail(s);
  if (absl::Status s = WriteSideOutputs(f, *pool, *eval); !s.ok()) return Fail(s);
  std::cerr << Summary(*pool, *eval);
  return kExitOk;
}

int RunSweep(const Flags& f) {
  auto modes = ParseModes(f);
  if (!modes.ok()) return Fail(modes.status());
  absl::StatusOr<ModelPool> pool = LoadPool(f.manifest);
  if (!pool.ok()) return Fail(pool.status());
  const std::vector<std::string> ids = SplitList(f.models);
  auto profile = CascadeProfile::Build(*pool, ids, modes->metric, modes->aggregation, f.jobs);
  if (!profile.ok()) return Fail(profile.status());
  auto grid = BuildThresholdGrid(*profile, f.grid);
  if (!grid.ok()) return Fail(grid.status());
  std::vector<double> base;
  if (f.thresholds.has_value()) {
    auto t = ParseDoubles(*f.thresholds, "--thresholds");
    if (!t.ok()) return Fail(t.status());
    base = *t;
  }
  auto sweep = ThresholdSweep(*profile, *grid, static_cast<size_t>(f.stage), base);
  if (!sweep.ok()) return Fail(sweep.status());
  if (absl::Status s = WriteText(f.csv, SweepCsv(*sweep)); !s.ok()) return Fail(s);
  std::cerr << "swept " << sweep->size() << " thresholds for stage " << f.stage << "\n";
  return kExitOk;
}

int RunSearchThresholds(const Flags& f, const CLI::App* sub) {
  auto modes = ParseModes(f);
  if (!modes.ok()) return Fail(modes.status());
  auto target = ParseTarget(f, /*allow_match=*/true);
  if (!target.ok()) return Fail(target.status());
  auto pools = LoadSplit(f);
  if (!pools.ok()) return Fail(pools.status());
  const ModelPool& selection = pools->first;
  const std::vector<std::string> ids = SplitList(f.models);
  auto profile =
      CascadeProfile::Build(selection, ids, modes->metric, modes->aggregation, f.jobs);
  if (!profile.ok()) return Fail(profile.status());
  auto grid = BuildThresholdGrid(*profile, f.grid);
  if (!grid.ok()) return Fail(grid.status());
  auto result = SearchThresholds(*profile, *grid, *target);
  if (!result.ok()) return Fail(result.status());
  json doc = {{"config", ConfigJson(sub)},
              {"target", DescribeTarget(*target)},
              {"accuracy_floor", result->accuracy_floor},
              {"grid_points", grid->NumPoints()},
              {"points_evaluated", result->points_evaluated},
              {"notation", TypeNotation(selection, ids)},
              {"selection", EvaluationJson(result->evaluation)}};
  std::cerr << "selection split: " << Summary(selection, result->evaluation);
  if (pools->second.has_value()) {
    auto held_out = EvaluateCascade(result->evaluation.spec, *pools->second, f.jobs);
    if (!held_out.ok()) return Fail(held_out.status());
    doc["evaluation"] = EvaluationJson(*held_out);
    std::cerr << "evaluation split: " << Summary(*pools->second, *held_out);
  }
  if (absl::Status s = WriteJson(f.report, doc); !s.ok()) return Fail(s);
  if (absl::Status s = WriteSideOutputs(f, selection, result->evaluation); !s.ok()) {
    return Fail(s);
  }
  return kExitOk;
}

absl::StatusOr<SelectionProblem> MakeProblem(const Flags& f, const ModelPool* pool) {
  auto modes = ParseModes(f);
  if (!modes.ok()) return modes.status();
  auto order = ParseOrderPolicy(f.order);
  if (!order.ok()) return order.status();
  SelectionProblem problem;
  problem.pool = pool;
  problem.max_models = f.max_models;
  problem.worst_case_bound = f.worst_case;
  problem.metric = modes->metric;
  problem.aggregation = modes->aggregation;
  problem.grid_resolution = f.grid;
  problem.order_policy = *order;
  problem.jobs = f.jobs;
  return problem;
}

int RunSelect(const Flags& f, const CLI::App* sub) {
  auto target = ParseTarget(f, /*allow_match=*/false);
  if (!target.ok()) return Fail(target.status());
  auto pools = LoadSplit(f);
  if (!pools.ok()) return Fail(pools.status());
  const ModelPool& selection = pools->first;
  auto problem = MakeProblem(f, &selection);
  if (!problem.ok()) return Fail(problem.status());
  if (const auto* b = std::get_if<CostBudget>(&*target)) {
    problem->objective = MaxAccuracy{b->budget};
  } else {
    problem->objective = MinCost{std::get<AccuracyFloor>(*target).floor};
  }
  auto result = SelectCascade(*problem);
  if (!result.ok()) return Fail(result.status());
  const CandidateStats& st = result->enumeration;
  json doc = {{"config", ConfigJson(sub)},
              {"objective", std::holds_alternative<CostBudget>(*target)
                                ? "max-accuracy" : "min-cost"},
              {"target", DescribeTarget(*target)},
              {"notation", TypeNotation(selection, result->spec.models)},
              {"candidates_searched", result->candidates_searched},
              {"candidates_feasible", result->candidates_feasible},
              {"enumeration",
               {{"emitted", st.emitted},
                {"skipped_replicates", st.skipped_replicates},
                {"filtered_order", st.filtered_order},
                {"filtered_worst_case", st.filtered_worst_case}}},
              {"selection", EvaluationJson(result->evaluation)}};
  std::cerr << "selection split: " << Summary(selection, result->evaluation);
  if (pools->second.has_value()) {
    auto held_out = EvaluateCascade(result->spec, *pools->second, f.jobs);
    if (!held_out.ok()) return Fail(held_out.status());
    doc["evaluation"] = EvaluationJson(*held_out);
    std::cerr << "evaluation split: " << Summary(*pools->second, *held_out);
  }
  if (absl::Status s = WriteJson(f.report, doc); !s.ok()) return Fail(s);
  if (absl::Status s = WriteSideOutputs(f, selection, result->evaluation); !s.ok()) {
    return Fail(s);
  }
  return kExitOk;
}

int RunPareto(const Flags& f) {
  absl::StatusOr<ModelPool> pool = LoadPool(f.manifest);
  if (!pool.ok()) return Fail(pool.status());
  auto problem = MakeProblem(f, &*pool);
  if (!problem.ok()) return Fail(problem.status());
  auto points = CollectFrontierCandidates(*problem, /*cascades=*/!f.ensembles_only);
  if (!points.ok()) return Fail(points.status());
  const size_t considered = points->size();
  const std::vector<FrontierPoint> frontier = ParetoFrontier(*std::move(points));
  if (absl::Status s = WriteText(f.csv, FrontierCsv(frontier)); !s.ok()) return Fail(s);
  std::cerr << frontier.size() << " frontier points out of " << considered << "\n";
  return kExitOk;
}

int RunSelectiveAccuracy(const Flags& f) {
  auto metric = ParseMetric(f.metric);
  if (!metric.ok()) return Fail(metric.status());
  absl::StatusOr<ModelPool> pool = LoadPool(f.manifest);
  if (!pool.ok()) return Fail(pool.status());
  const std::vector<std::string> ids = SplitList(f.models);
  if (ids.size() != 1) {
    return Fail(absl::InvalidArgumentError("--models takes exactly one model id here"));
  }
  auto index = pool->IndexOf(ids[0]);
  if (!index.ok()) return Fail(index.status());
  std::vector<double> ks;
  if (f.ks.empty()) {
    for (int k = 1; k <= 100; ++k) ks.push_back(k);
  } else {
    auto parsed = ParseDoubles(f.ks, "--ks");
    if (!parsed.ok()) return Fail(parsed.status());
    ks = *parsed;
  }
  auto curve = SelectiveAccuracy(pool->entries[*index], pool->labels, pool->num_classes,
                                 *metric, ks);
  if (!curve.ok()) return Fail(curve.status());
  if (absl::Status s = WriteText(f.csv, SelectiveAccuracyCsv(*curve)); !s.ok()) {
    return Fail(s);
  }
  return kExitOk;
}

absl::StatusOr<DenseCascadeSpec> DenseSpecFromFlags(const Flags& f) {
  auto agg = ParseAggregation(f.aggregation);
  if (!agg.ok()) return agg.status();
  DenseCascadeSpec spec;
  spec.models = SplitList(f.models);
  spec.aggregation = *agg;
  spec.t_unlab = f.t_unlab;
  if (f.cell_size != "full") {
    size_t cell;
    if (!absl::SimpleAtoi(f.cell_size, &cell) || cell == 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("--cell-size must be a positive integer or 'full', got '",
                       f.cell_size, "'"));
    }
    spec.cell_size = cell;
  }
  if (f.thresholds.has_value()) {
    auto t = ParseDoubles(*f.thresholds, "--thresholds");
    if (!t.ok()) return t.status();
    spec.thresholds = *t;
  } else if (!spec.models.empty()) {
    spec.thresholds.assign(spec.models.size() - 1, std::numeric_limits<double>::infinity());
  }
  return spec;
}

std::string DenseSummary(const DenseEvaluation& e) {
  std::vector<std::string> ratios;
  for (double r : e.cell_exit_ratios) ratios.push_back(absl::StrFormat("%.1f%%", 100.0 * r));
  return absl::StrFormat("%s: mIoU %.4f, avg cost %.6g, worst case %.6g, cell exit ratios %s\n",
                         absl::StrJoin(e.spec.models, "+"), e.miou, e.avg_cost,
                         e.worst_case_cost, absl::StrJoin(ratios, " / "));
}

int RunDenseEvaluate(const Flags& f, const CLI::App* sub) {
  auto spec = DenseSpecFromFlags(f);
  if (!spec.ok()) return Fail(spec.status());
  absl::StatusOr<DensePool> pool = LoadDensePool(f.manifest);
  if (!pool.ok()) return Fail(pool.status());
  auto eval = EvaluateDenseCascade(*spec, *pool, f.jobs);
  if (!eval.ok()) return Fail(eval.status());
  json doc = {{"config", ConfigJson(sub)}, {"evaluation", DenseEvaluationJson(*eval)}};
  if (absl::Status s = WriteJson(f.report, doc); !s.ok()) return Fail(s);
  std::cerr << DenseSummary(*eval);
  return kExitOk;
}

int RunDenseSearch(const Flags& f, const CLI::App* sub) {
  auto spec = DenseSpecFromFlags(f);
  if (!spec.ok()) return Fail(spec.status());
  auto target = ParseTarget(f, /*allow_match=*/true);
  if (!target.ok()) return Fail(target.status());
  absl::StatusOr<DensePool> pool = LoadDensePool(f.manifest);
  if (!pool.ok()) return Fail(pool.status());
  auto result = SearchDenseThresholds(*spec, *pool, *target, f.grid, f.jobs);
  if (!result.ok()) return Fail(result.status());
  json doc = {{"config", ConfigJson(sub)},
              {"target", DescribeTarget(*target)},
              {"points_evaluated", result->points_evaluated},
              {"evaluation", DenseEvaluationJson(result->evaluation)}};
  if (absl::Status s = WriteJson(f.report, doc); !s.ok()) return Fail(s);
  std::cerr << DenseSummary(result->evaluation);
  return kExitOk;
}

// ---- flag wiring -----------------------------------------------------------

void AddManifest(CLI::App* sub, Flags& f) {
  sub->add_option("--manifest", f.manifest, "Pool manifest (pool.json)")
      ->required()
      ->check(CLI::ExistingFile);
}

void AddModes(CLI::App* sub, Flags& f) {
  sub->add_option("--metric", f.metric,
                  "Confidence metric: max-prob, logit-gap, prob-gap, neg-entropy");
  sub->add_option("--aggregation", f.aggregation, "mean-logits or mean-probs");
}

void AddJobs(CLI::App* sub, Flags& f) {
  sub->add_option("--jobs", f.jobs,
                  "Worker threads; default from COMMITTEE_JOBS. Output does not depend on it")
      ->check(CLI::PositiveNumber);
}

void AddTargets(CLI::App* sub, Flags& f, bool with_match) {
  sub->add_option("--target-flops", f.target_flops,
                  "Maximize accuracy subject to average cost <= this");
  sub->add_option("--target-accuracy", f.target_accuracy,
                  "Minimize average cost subject to accuracy (mIoU for dense) >= this");
  if (with_match) {
    sub->add_option("--match-ensemble", f.match_ensemble,
                    "Minimize cost at the full ensemble's accuracy minus this slack");
  }
}

void AddSplit(CLI::App* sub, Flags& f) {
  sub->add_option("--selection-fraction", f.selection_fraction,
                  "Search on this fraction of the examples and report the rest "
                  "as a held-out evaluation split");
  sub->add_option("--seed", f.seed, "Seed for the split permutation");
}

}  // namespace
}  // namespace committee

int main(int argc, char** argv) {
  using committee::Flags;
  Flags f;
  f.jobs = committee::DefaultJobs();

  CLI::App app{"Post-hoc ensembles and early-exit cascades over pre-computed logits"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  CLI::App* validate = app.add_subcommand("validate", "Load and check a pool manifest");
  committee::AddManifest(validate, f);
  validate->add_flag("--dense", f.dense, "Manifest describes a dense (per-pixel) pool");
  validate->add_option("--report", f.report, "JSON summary path (default stdout)");

  CLI::App* split = app.add_subcommand("split", "Split a pool into selection/evaluation halves");
  committee::AddManifest(split, f);
  split->add_option("--selection-fraction", f.selection_fraction,
                    "Fraction for the selection half (default 0.5)");
  split->add_option("--seed", f.seed, "Permutation seed");
  split->add_option("--out", f.out, "Output directory")->required();

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic pool");
  synth->add_option("--examples", f.examples, "Number of examples");
  synth->add_option("--classes", f.classes, "Number of classes");
  synth->add_option("--accuracies", f.accuracies, "Per-model accuracy targets, comma separated")
      ->required();
  synth->add_option("--costs", f.costs, "Per-model costs, comma separated")->required();
  synth->add_option("--correlation", f.correlation, "Shared difficulty between models, [0, 1]");
  synth->add_option("--sharpness", f.sharpness, "Logit scale of the costliest model");
  synth->add_option("--ids", f.ids, "Model ids (default m0, m1, ...)");
  synth->add_option("--types", f.types, "Model types (default: the ids)");
  synth->add_option("--replicates", f.replicates, "Replicate indices");
  synth->add_option("--resolutions", f.resolutions, "Resolutions, or 'none' per entry");
  synth->add_option("--seed", f.seed, "Generator seed");
  synth->add_option("--out", f.out, "Output directory")->required();

  CLI::App* evaluate = app.add_subcommand("evaluate", "Evaluate an ensemble or cascade");
  committee::AddManifest(evaluate, f);
  evaluate->add_option("--models", f.models, "Ordered model ids, comma separated")->required();
  evaluate->add_option("--thresholds", f.thresholds,
                       "One threshold per stage but the last; omit for the ensemble");
  committee::AddModes(evaluate, f);
  committee::AddJobs(evaluate, f);
  evaluate->add_option("--report", f.report, "JSON report path (default stdout)");
  evaluate->add_option("--trace", f.trace, "Per-example trace CSV");
  evaluate->add_option("--exit-table", f.exit_table, "Exit-ratio table CSV");

  CLI::App* sweep = app.add_subcommand("sweep", "Sweep one stage's threshold over the grid");
  committee::AddManifest(sweep, f);
  sweep->add_option("--models", f.models, "Ordered model ids")->required();
  sweep->add_option("--stage", f.stage, "Stage to sweep, from 1");
  sweep->add_option("--thresholds", f.thresholds,
                    "Thresholds held for the other stages (default: never exit)");
  sweep->add_option("--grid", f.grid, "Grid resolution (percentile steps)");
  committee::AddModes(sweep, f);
  committee::AddJobs(sweep, f);
  sweep->add_option("--csv", f.csv, "Output CSV (default stdout)");

  CLI::App* search = app.add_subcommand("search-thresholds",
                                        "Pick thresholds for a fixed model sequence");
  committee::AddManifest(search, f);
  search->add_option("--models", f.models, "Ordered model ids")->required();
  committee::AddTargets(search, f, /*with_match=*/true);
  search->add_option("--grid", f.grid, "Grid resolution (percentile steps)");
  committee::AddModes(search, f);
  committee::AddSplit(search, f);
  committee::AddJobs(search, f);
  search->add_option("--report", f.report, "JSON report path (default stdout)");
  search->add_option("--trace", f.trace, "Per-example trace CSV (selection split)");
  search->add_option("--exit-table", f.exit_table, "Exit-ratio table CSV");

  CLI::App* select = app.add_subcommand("select", "Search model sequences and thresholds");
  committee::AddManifest(select, f);
  committee::AddTargets(select, f, /*with_match=*/false);
  select->add_option("--worst-case", f.worst_case, "Bound on the summed cost of all stages");
  select->add_option("--max-models", f.max_models, "Longest cascade considered")
      ->check(CLI::PositiveNumber);
  select->add_option("--order", f.order, "all or non-decreasing-cost");
  select->add_option("--grid", f.grid, "Grid resolution (percentile steps)");
  committee::AddModes(select, f);
  committee::AddSplit(select, f);
  committee::AddJobs(select, f);
  select->add_option("--report", f.report, "JSON report path (default stdout)");
  select->add_option("--trace", f.trace, "Per-example trace CSV (selection split)");
  select->add_option("--exit-table", f.exit_table, "Exit-ratio table CSV");

  CLI::App* pareto = app.add_subcommand("pareto", "Cost/accuracy frontier over all candidates");
  committee::AddManifest(pareto, f);
  pareto->add_option("--max-models", f.max_models, "Longest sequence considered")
      ->check(CLI::PositiveNumber);
  pareto->add_option("--order", f.order, "all or non-decreasing-cost");
  pareto->add_option("--worst-case", f.worst_case, "Bound on the summed cost of all stages");
  pareto->add_option("--grid", f.grid, "Grid resolution for cascade thresholds");
  pareto->add_flag("--ensembles-only", f.ensembles_only, "Ensembles without early exit");
  committee::AddModes(pareto, f);
  committee::AddJobs(pareto, f);
  pareto->add_option("--csv", f.csv, "Output CSV (default stdout)");

  CLI::App* selective = app.add_subcommand("selective-accuracy",
                                           "Accuracy on the k% most confident examples");
  committee::AddManifest(selective, f);
  selective->add_option("--models", f.models, "One model id")->required();
  selective->add_option("--metric", f.metric, "Confidence metric");
  selective->add_option("--ks", f.ks, "Percents in (0, 100], comma separated (default 1..100)");
  selective->add_option("--csv", f.csv, "Output CSV (default stdout)");

  CLI::App* dense_eval = app.add_subcommand("dense-evaluate", "Evaluate a dense cascade");
  committee::AddManifest(dense_eval, f);
  dense_eval->add_option("--models", f.models, "Ordered model ids")->required();
  dense_eval->add_option("--thresholds", f.thresholds,
                         "One threshold per stage but the last; omit for the ensemble");
  dense_eval->add_option("--cell-size", f.cell_size, "Square cell side in pixels, or 'full'");
  dense_eval->add_option("--t-unlab", f.t_unlab, "Pixels at or below this confidence are ignored");
  dense_eval->add_option("--aggregation", f.aggregation, "mean-logits or mean-probs");
  committee::AddJobs(dense_eval, f);
  dense_eval->add_option("--report", f.report, "JSON report path (default stdout)");

  CLI::App* dense_search = app.add_subcommand("dense-search", "Pick dense cascade thresholds");
  committee::AddManifest(dense_search, f);
  dense_search->add_option("--models", f.models, "Ordered model ids")->required();
  dense_search->add_option("--cell-size", f.cell_size, "Square cell side in pixels, or 'full'");
  dense_search->add_option("--t-unlab", f.t_unlab,
                           "Pixels at or below this confidence are ignored");
  dense_search->add_option("--aggregation", f.aggregation, "mean-logits or mean-probs");
  committee::AddTargets(dense_search, f, /*with_match=*/true);
  dense_search->add_option("--grid", f.grid, "Grid resolution (percentile steps)");
  committee::AddJobs(dense_search, f);
  dense_search->add_option("--report", f.report, "JSON report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? committee::kExitOk : committee::kExitInput;
  }

  if (validate->parsed()) return committee::RunValidate(f, validate);
  if (split->parsed()) return committee::RunSplit(f);
  if (synth->parsed()) return committee::RunSynth(f);
  if (evaluate->parsed()) return committee::RunEvaluate(f, evaluate);
  if (sweep->parsed()) return committee::RunSweep(f);
  if (search->parsed()) return committee::RunSearchThresholds(f, search);
  if (select->parsed()) return committee::RunSelect(f, select);
  if (pareto->parsed()) return committee::RunPareto(f);
  if (selective->parsed()) return committee::RunSelectiveAccuracy(f);
  if (dense_eval->parsed()) return committee::RunDenseEvaluate(f, dense_eval);
  if (dense_search->parsed()) return committee::RunDenseSearch(f, dense_search);
  return committee::kExitInput;
}
