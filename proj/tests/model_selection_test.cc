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

#include <map>
#include <set>

#include "committee/status.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace committee {
namespace {

using testing::BruteBest;
using testing::BruteForceSelect;
using testing::RefNonDominated;
using testing::ReplicatedSynth;
using testing::Synth;

// Pool with `kinds` types and `replicas` copies each; only the metadata
// matters for enumeration, so the logits are tiny.
ModelPool KindsPool(size_t kinds, size_t replicas) {
  auto pool = GenerateSyntheticPool(ReplicatedSynth(kinds, replicas, 20, 1));
  return *pool;
}

TEST(EnumerationTest, EightTypesFourDeep) {
  const ModelPool pool = KindsPool(8, 4);
  SelectionProblem problem;
  problem.pool = &pool;
  problem.max_models = 4;
  CandidateStats stats;
  const auto tuples = EnumerateCandidates(problem, &stats);
  EXPECT_EQ(tuples.size(), 4672u);
  EXPECT_EQ(stats.emitted, 4672u);
  EXPECT_EQ(stats.skipped_replicates, 0u);
  std::set<std::vector<size_t>> unique(tuples.begin(), tuples.end());
  EXPECT_EQ(unique.size(), tuples.size());
}

TEST(EnumerationTest, TwoTypes) {
  ModelPool pool = KindsPool(2, 2);
  SelectionProblem problem;
  problem.pool = &pool;
  problem.max_models = 2;
  auto names = [&](const std::vector<std::vector<size_t>>& tuples) {
    std::vector<std::string> out;
    for (const auto& t : tuples) {
      std::string s;
      for (size_t e : t) s += pool.entries[e].model_id + " ";
      out.push_back(s);
    }
    return out;
  };
  // Entries are t0r0, t0r1, t1r0, t1r1. The second use of a type takes its
  // second replicate.
  EXPECT_EQ(names(EnumerateCandidates(problem)),
            (std::vector<std::string>{"t0r0 t0r1 ", "t0r0 t1r0 ", "t1r0 t0r0 ",
                                      "t1r0 t1r1 "}));

  pool.entries.erase(pool.entries.begin() + 1);  // one t0 replicate left
  CandidateStats stats;
  EXPECT_EQ(names(EnumerateCandidates(problem, &stats)),
            (std::vector<std::string>{"t0r0 t1r0 ", "t1r0 t0r0 ", "t1r0 t1r1 "}));
  EXPECT_EQ(stats.skipped_replicates, 1u);
}

TEST(EnumerationTest, ResolutionSplitsKinds) {
  ModelPool pool = KindsPool(1, 2);
  pool.entries[0].resolution = 224;
  pool.entries[1].resolution = 300;
  EXPECT_EQ(ModelKind(pool.entries[0]), "t0@224");
  SelectionProblem problem;
  problem.pool = &pool;
  problem.max_models = 2;
  CandidateStats stats;
  EXPECT_EQ(EnumerateCandidates(problem, &stats).size(), 2u);  // 224->300, 300->224
  EXPECT_EQ(stats.skipped_replicates, 2u);
}

TEST(EnumerationTest, FiltersAndOrderPolicy) {
  const ModelPool pool = KindsPool(3, 2);  // costs 1, 2.5, 6.25
  SelectionProblem problem;
  problem.pool = &pool;
  problem.max_models = 3;
  problem.order_policy = OrderPolicy::kNonDecreasingCost;
  for (const auto& t : EnumerateCandidates(problem)) {
    for (size_t k = 1; k < t.size(); ++k) {
      EXPECT_LE(pool.entries[t[k - 1]].cost, pool.entries[t[k]].cost);
    }
  }
  problem.order_policy = OrderPolicy::kAllOrders;
  problem.worst_case_bound = 1.9;  // below the cheapest pair (2)
  CandidateStats stats;
  EXPECT_TRUE(EnumerateCandidates(problem, &stats).empty());
  // 9 + 27 type tuples, of which the three single-type triples lack a
  // third replicate.
  EXPECT_EQ(stats.filtered_worst_case, 33u);
  EXPECT_EQ(stats.skipped_replicates, 3u);
  problem.worst_case_bound = 4.0;
  for (const auto& t : EnumerateCandidates(problem)) {
    double sum = 0;
    for (size_t e : t) sum += pool.entries[e].cost;
    EXPECT_LE(sum, 4.0);
  }
  EXPECT_EQ(*ParseOrderPolicy(OrderPolicyName(OrderPolicy::kNonDecreasingCost)),
            OrderPolicy::kNonDecreasingCost);
  EXPECT_FALSE(ParseOrderPolicy("random").ok());
}

TEST(SelectCascadeTest, MatchesBruteForce) {
  for (uint64_t seed = 0; seed < 2; ++seed) {
    auto pool = GenerateSyntheticPool(ReplicatedSynth(3, 2, 300, 40 + seed));
    ASSERT_TRUE(pool.ok());
    for (const SelectionObjective& objective :
         {SelectionObjective{MaxAccuracy{2.0}}, SelectionObjective{MaxAccuracy{5.0}},
          SelectionObjective{MinCost{0.8}}}) {
      SelectionProblem problem;
      problem.pool = &*pool;
      problem.max_models = 3;
      problem.objective = objective;
      problem.grid_resolution = 6;
      const BruteBest oracle = BruteForceSelect(*pool, 3, objective, 6);
      auto r = SelectCascade(problem);
      if (!oracle.found) {
        EXPECT_TRUE(IsInfeasible(r.status()));
        continue;
      }
      ASSERT_TRUE(r.ok()) << r.status();
      if (std::holds_alternative<MaxAccuracy>(objective)) {
        EXPECT_EQ(r->evaluation.accuracy, oracle.accuracy);
      } else {
        EXPECT_EQ(r->evaluation.avg_cost, oracle.avg_cost);
      }
    }
  }
}

TEST(SelectCascadeTest, DominantSolitaryModel) {
  // m1 is cheap and perfect; nothing can beat it on either axis.
  auto pool = GenerateSyntheticPool(Synth({0.6, 1.0, 0.7}, {2, 1, 3}, 300, 2));
  ASSERT_TRUE(pool.ok());
  SelectionProblem problem;
  problem.pool = &*pool;
  problem.max_models = 3;
  problem.objective = MaxAccuracy{10.0};
  problem.grid_resolution = 8;
  auto r = SelectCascade(problem);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_EQ(r->spec.models, (std::vector<std::string>{"m1"}));
  EXPECT_EQ(r->evaluation.avg_cost, 1.0);
}

TEST(SelectCascadeTest, MinCostAtEnsembleAccuracy) {
  auto pool = GenerateSyntheticPool(ReplicatedSynth(2, 2, 400, 3));
  ASSERT_TRUE(pool.ok());
  auto ens = EvaluateEnsemble(std::vector<std::string>{"t0r0", "t1r0"}, *pool,
                              AggregationMode::kMeanLogits);
  SelectionProblem problem;
  problem.pool = &*pool;
  problem.max_models = 2;
  problem.objective = MinCost{ens->accuracy};
  problem.grid_resolution = 10;
  auto r = SelectCascade(problem);
  ASSERT_TRUE(r.ok()) << r.status();
  EXPECT_LE(r->evaluation.avg_cost, ens->avg_cost);
  EXPECT_GE(r->evaluation.accuracy, ens->accuracy);
}

TEST(SelectCascadeTest, WorstCaseBoundIsRespected) {
  auto pool = GenerateSyntheticPool(ReplicatedSynth(3, 2, 300, 5));
  ASSERT_TRUE(pool.ok());
  SelectionProblem problem;
  problem.pool = &*pool;
  problem.max_models = 3;
  problem.objective = MaxAccuracy{6.0};
  problem.grid_resolution = 6;
  auto free = SelectCascade(problem);
  ASSERT_TRUE(free.ok());
  for (double bound : {1.0, 3.0, 5.0, 8.0}) {
    problem.worst_case_bound = bound;
    auto r = SelectCascade(problem);
    ASSERT_TRUE(r.ok()) << r.status();
    EXPECT_LE(r->evaluation.worst_case_cost, bound);
    EXPECT_LE(r->evaluation.accuracy, free->evaluation.accuracy);
  }
  problem.worst_case_bound = 0.5;
  auto none = SelectCascade(problem);
  EXPECT_TRUE(IsInfeasible(none.status()));
}

TEST(SelectCascadeTest, InfeasibleFloorGivesNearestMiss) {
  auto pool = GenerateSyntheticPool(ReplicatedSynth(2, 1, 200, 5));
  ASSERT_TRUE(pool.ok());
  SelectionProblem problem;
  problem.pool = &*pool;
  problem.max_models = 2;
  problem.objective = MinCost{0.9999};
  problem.grid_resolution = 5;
  auto r = SelectCascade(problem);
  ASSERT_TRUE(IsInfeasible(r.status()));
  EXPECT_NE(r.status().message().find("best reachable"), std::string::npos);
}

TEST(SelectCascadeTest, ParallelJobsAgree) {
  auto pool = GenerateSyntheticPool(ReplicatedSynth(3, 2, 300, 8));
  ASSERT_TRUE(pool.ok());
  SelectionProblem problem;
  problem.pool = &*pool;
  problem.max_models = 3;
  problem.objective = MaxAccuracy{4.0};
  problem.grid_resolution = 5;
  auto one = SelectCascade(problem);
  problem.jobs = 3;
  auto three = SelectCascade(problem);
  ASSERT_TRUE(one.ok() && three.ok());
  EXPECT_EQ(one->spec, three->spec);
  EXPECT_EQ(one->evaluation, three->evaluation);
}

FrontierPoint Point(double cost, double acc, std::string id) {
  FrontierPoint p;
  p.spec.models = {std::move(id)};
  p.evaluation.avg_cost = cost;
  p.evaluation.accuracy = acc;
  p.evaluation.worst_case_cost = cost;
  return p;
}

TEST(ParetoFrontierTest, HandExample) {
  const auto f = ParetoFrontier({Point(1.0, 0.7, "a"), Point(2.0, 0.8, "b"),
                                 Point(1.5, 0.65, "c")});
  ASSERT_EQ(f.size(), 2u);
  EXPECT_EQ(f[0].spec.models[0], "a");
  EXPECT_EQ(f[1].spec.models[0], "b");
  const auto one = ParetoFrontier({Point(3, 0.5, "x")});
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0].spec.models[0], "x");
}

TEST(ParetoFrontierTest, EqualPointsKeepSmallestSpec) {
  const auto f = ParetoFrontier({Point(1, 0.5, "z"), Point(1, 0.5, "b"), Point(1, 0.4, "a")});
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].spec.models[0], "b");
}

TEST(ParetoFrontierTest, MatchesPairwiseOracle) {
  std::mt19937_64 gen(99);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<FrontierPoint> pts;
    std::vector<std::pair<double, double>> raw;
    for (int i = 0; i < 100; ++i) {
      const double cost = 1 + 9 * u(gen);
      const double acc = 0.5 + 0.5 * u(gen);
      pts.push_back(Point(cost, acc, "p" + std::to_string(i)));
      raw.emplace_back(cost, acc);
    }
    std::set<std::string> want;
    for (size_t i : RefNonDominated(raw)) want.insert("p" + std::to_string(i));
    const auto f = ParetoFrontier(pts);
    std::set<std::string> got;
    for (size_t i = 0; i < f.size(); ++i) {
      got.insert(f[i].spec.models[0]);
      if (i > 0) {
        EXPECT_GT(f[i].evaluation.avg_cost, f[i - 1].evaluation.avg_cost);
        EXPECT_GT(f[i].evaluation.accuracy, f[i - 1].evaluation.accuracy);
      }
    }
    EXPECT_EQ(got, want);
  }
}

TEST(ParetoFrontierTest, CsvLayout) {
  FrontierPoint p = Point(1.5, 0.75, "a");
  p.spec.models = {"a", "b"};
  p.spec.thresholds = {std::numeric_limits<double>::infinity()};
  const std::string csv = FrontierCsv({p});
  EXPECT_EQ(csv, "avg_cost,accuracy,worst_case_cost,models,thresholds\n"
                 "1.5,0.75,1.5,a+b,inf\n");
}

TEST(CollectFrontierTest, CascadesExtendTheEnsembleFrontier) {
  auto pool = GenerateSyntheticPool(ReplicatedSynth(2, 2, 300, 6));
  ASSERT_TRUE(pool.ok());
  SelectionProblem problem;
  problem.pool = &*pool;
  problem.max_models = 2;
  problem.grid_resolution = 5;
  auto ens = CollectFrontierCandidates(problem, false);
  auto cas = CollectFrontierCandidates(problem, true);
  ASSERT_TRUE(ens.ok() && cas.ok());
  EXPECT_GT(cas->size(), ens->size());
  const auto fe = ParetoFrontier(*ens);
  const auto fc = ParetoFrontier(*cas);
  // Every ensemble frontier point is matched or beaten by the cascade frontier.
  for (const auto& e : fe) {
    bool covered = false;
    for (const auto& c : fc) {
      covered |= c.evaluation.avg_cost <= e.evaluation.avg_cost &&
                 c.evaluation.accuracy >= e.evaluation.accuracy;
    }
    EXPECT_TRUE(covered);
  }
}

SynthConfig ResolutionPair(uint64_t seed) {
  SynthConfig config = Synth({0.74, 0.8}, {1.0, 2.0}, 1000, seed, 10, 0.8);
  config.model_ids = {"lo", "hi"};
  config.model_types = {"net", "net"};
  config.resolutions = {224, 320};
  // Same type, so the pair needs distinct replicate indices.
  config.replicate_indices = {0, 1};
  return config;
}

TEST(SelfCascadeTest, CheaperThanHighResolutionAlone) {
  auto pool = GenerateSyntheticPool(ResolutionPair(4));
  ASSERT_TRUE(pool.ok());
  auto r = AssembleSelfCascade(*pool, "lo", "hi", MatchEnsemble{0.0},
                               ConfidenceMetric::kMaxProb, AggregationMode::kMeanLogits, 50);
  ASSERT_TRUE(r.ok()) << r.status();
  auto hi = EvaluateEnsemble(std::vector<std::string>{"hi"}, *pool,
                             AggregationMode::kMeanLogits);
  EXPECT_LT(r->evaluation.avg_cost, 2.0);
  EXPECT_GE(r->evaluation.accuracy, hi->accuracy);
  EXPECT_GT(r->speedup, 1.0);
  EXPECT_DOUBLE_EQ(r->speedup, 2.0 / r->evaluation.avg_cost);
}

TEST(SelfCascadeTest, IdenticalLogitsStopAtTheFirstStage) {
  auto pool = GenerateSyntheticPool(ResolutionPair(5));
  ASSERT_TRUE(pool.ok());
  pool->entries[1].logits = pool->entries[0].logits;
  auto r = AssembleSelfCascade(*pool, "lo", "hi", MatchEnsemble{0.0},
                               ConfidenceMetric::kMaxProb, AggregationMode::kMeanLogits, 20);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->evaluation.avg_cost, 1.0);
  EXPECT_EQ(r->spec.thresholds, (std::vector<double>{0.0}));
}

TEST(SelfCascadeTest, MetadataErrors) {
  auto pool = GenerateSyntheticPool(ResolutionPair(6));
  ASSERT_TRUE(pool.ok());
  auto bad = [&](ModelPool p) {
    return AssembleSelfCascade(p, "lo", "hi", MatchEnsemble{},
                               ConfidenceMetric::kMaxProb, AggregationMode::kMeanLogits, 10)
        .ok();
  };
  ModelPool p = *pool;
  p.entries[0].resolution.reset();
  EXPECT_FALSE(bad(p));
  p = *pool;
  p.entries[0].model_type = "other";
  EXPECT_FALSE(bad(p));
  p = *pool;
  p.entries[0].resolution = 400;
  EXPECT_FALSE(bad(p));
  p = *pool;
  p.entries[0].cost = 3.0;
  EXPECT_FALSE(bad(p));
  EXPECT_TRUE(bad(*pool));
}

TEST(SpeedupTest, ReportedRatio) {
  EXPECT_NEAR(Speedup(37.0, 22.8), 1.62, 0.005);
  auto pool = GenerateSyntheticPool(ResolutionPair(1));
  EXPECT_EQ(TypeNotation(*pool, {"lo", "hi", "hi"}), "net+net+net");
}

}  // namespace
}  // namespace committee
