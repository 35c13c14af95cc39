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

#include "committee/dense_cascade.h"

#include <cmath>

#include "committee/status.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace committee {
namespace {

using testing::CorruptedQuadrantPool;
using testing::RefDenseRoute;
using testing::TempDir;

TEST(DenseConfidenceTest, UniformPixels) {
  const std::vector<double> logits(4 * 5, 0.0);
  EXPECT_NEAR(DenseConfidence(logits, 5, 0.0), 0.2, 1e-15);
}

TEST(DenseConfidenceTest, UnconfidentPixelsAreDropped) {
  // Four classes: max-probs 0.9 and 0.3.
  const double a = std::log(0.1 / 3.0);
  const std::vector<double> logits = {std::log(0.9), a, a, a,
                                      std::log(0.3), std::log(0.3), std::log(0.2),
                                      std::log(0.2)};
  EXPECT_NEAR(DenseConfidence(logits, 4, 0.5), 0.9, 1e-12);
  EXPECT_NEAR(DenseConfidence(logits, 4, 0.0), 0.6, 1e-12);
  EXPECT_EQ(DenseConfidence(logits, 4, 1.0), 0.0);
}

TEST(MiouTest, HandCountedTwoByTwo) {
  DenseLabelSet labels{{0, 0, 1, 255}, 255};
  const std::vector<uint32_t> predicted = {0, 1, 1, 0};
  auto r = Miou(predicted, labels, 2);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->per_class_iou[0], 0.5);
  EXPECT_EQ(r->per_class_iou[1], 0.5);
  EXPECT_EQ(r->miou, 0.5);
  EXPECT_EQ(r->confusion, (std::vector<uint64_t>{1, 1, 0, 1}));
}

TEST(MiouTest, PerfectAndAbsentClasses) {
  DenseLabelSet labels{{0, 2, 2, 0}, 255};
  auto r = Miou(std::vector<uint32_t>{0, 2, 2, 0}, labels, 4);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r->miou, 1.0);
  EXPECT_EQ(r->classes_counted, 2u);
  EXPECT_TRUE(std::isnan(r->per_class_iou[1]));
  EXPECT_TRUE(std::isnan(r->per_class_iou[3]));
}

TEST(MiouTest, Errors) {
  DenseLabelSet all_ignored{{255, 255}, 255};
  EXPECT_FALSE(Miou(std::vector<uint32_t>{0, 1}, all_ignored, 2).ok());
  DenseLabelSet labels{{0, 1}, 255};
  EXPECT_FALSE(Miou(std::vector<uint32_t>{0}, labels, 2).ok());
}

DenseCascadeSpec Spec(double t1, std::optional<size_t> cell) {
  DenseCascadeSpec spec;
  spec.models = {"coarse", "fine"};
  spec.thresholds = {t1};
  spec.cell_size = cell;
  return spec;
}

TEST(DenseCascadeTest, MatchesBruteForceRouter) {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const DensePool pool = CorruptedQuadrantPool(seed);
    ASSERT_TRUE(ValidateDensePool(pool).ok());
    for (size_t cell : {4, 8, 16}) {
      for (double t1 : {0.0, 0.33, 0.61, 0.77, 0.853, 0.9123, 1.0}) {
        auto eval = EvaluateDenseCascade(Spec(t1, cell), pool);
        ASSERT_TRUE(eval.ok()) << eval.status();
        const auto ref = RefDenseRoute(pool, {t1}, cell, kDefaultUnlabeledThreshold);
        EXPECT_NEAR(eval->miou, static_cast<double>(ref.miou), 1e-9);
        EXPECT_EQ(eval->avg_cost, static_cast<double>(ref.avg_cost)) << cell << " " << t1;
        EXPECT_EQ(eval->predicted, ref.predicted);
      }
    }
  }
}

TEST(DenseCascadeTest, TunedThresholdRoutesOnlyCorruptedCells) {
  const DensePool pool = CorruptedQuadrantPool(1);
  auto ens = EvaluateDenseCascade(Spec(1.0, 8), pool);
  auto r = SearchDenseThresholds(Spec(0.0, 8), pool, MatchEnsemble{0.0}, 20);
  ASSERT_TRUE(ens.ok() && r.ok()) << r.status();
  EXPECT_LT(r->evaluation.avg_cost, 4.0);
  EXPECT_EQ(r->evaluation.avg_cost, 1.0 + 3.0 / 4.0);
  EXPECT_NEAR(r->evaluation.miou, ens->miou, 1e-9);
  for (size_t cell = 0; cell < r->evaluation.cell_exit_stage.size(); ++cell) {
    const size_t image = cell / 4, quadrant = cell % 4;
    EXPECT_EQ(r->evaluation.cell_exit_stage[cell], quadrant == image % 4 ? 2u : 1u);
  }
}

TEST(DenseCascadeTest, FullRoutingDegeneracy) {
  const DensePool pool = CorruptedQuadrantPool(2);
  auto full = EvaluateDenseCascade(Spec(1.0, std::nullopt), pool);
  auto fine_cells = EvaluateDenseCascade(Spec(1.0, 4), pool);
  ASSERT_TRUE(full.ok() && fine_cells.ok());
  EXPECT_EQ(full->avg_cost, 4.0);
  EXPECT_EQ(full->cells_per_image, 1u);
  EXPECT_EQ(full->predicted, fine_cells->predicted);
  EXPECT_EQ(full->miou, fine_cells->miou);

  auto whole = EvaluateDenseCascade(Spec(0.8, std::nullopt), pool);
  auto one_cell = EvaluateDenseCascade(Spec(0.8, 16), pool);
  ASSERT_TRUE(whole.ok() && one_cell.ok());
  EXPECT_EQ(whole->cell_exit_stage, one_cell->cell_exit_stage);
  EXPECT_EQ(whole->avg_cost, one_cell->avg_cost);
}

TEST(DenseCascadeTest, GridRoutingIsNoCostlierAtMatchedQuality) {
  const DensePool pool = CorruptedQuadrantPool(3);
  auto grid = SearchDenseThresholds(Spec(0.0, 8), pool, MatchEnsemble{0.0}, 20);
  auto full = SearchDenseThresholds(Spec(0.0, std::nullopt), pool, MatchEnsemble{0.0}, 20);
  ASSERT_TRUE(grid.ok() && full.ok());
  EXPECT_LE(grid->evaluation.avg_cost, full->evaluation.avg_cost);
}

TEST(DenseCascadeTest, SpecErrors) {
  const DensePool pool = CorruptedQuadrantPool(0);
  EXPECT_FALSE(EvaluateDenseCascade(Spec(0.5, 5), pool).ok());  // 5 does not divide 16
  DenseCascadeSpec spec = Spec(0.5, 8);
  spec.thresholds.push_back(0.5);
  EXPECT_FALSE(EvaluateDenseCascade(spec, pool).ok());
  spec = Spec(0.5, 8);
  spec.models[1] = "missing";
  EXPECT_FALSE(EvaluateDenseCascade(spec, pool).ok());
}

TEST(DensePoolTest, SaveLoadRoundTrip) {
  const DensePool pool = CorruptedQuadrantPool(4);
  const auto dir = TempDir("dense");
  ASSERT_TRUE(SaveDensePool(pool, dir).ok());
  auto loaded = LoadDensePool(dir / "pool.json");
  ASSERT_TRUE(loaded.ok()) << loaded.status();
  EXPECT_EQ(*loaded, pool);
}

TEST(DensePoolTest, ValidationErrors) {
  DensePool pool = CorruptedQuadrantPool(0);
  pool.labels.labels[5] = 7;
  EXPECT_FALSE(ValidateDensePool(pool).ok());
  pool = CorruptedQuadrantPool(0);
  pool.entries[0].logits.pop_back();
  EXPECT_FALSE(ValidateDensePool(pool).ok());
  pool = CorruptedQuadrantPool(0);
  pool.entries[1].logits[10] = std::numeric_limits<float>::infinity();
  EXPECT_FALSE(ValidateDensePool(pool).ok());
}

}  // namespace
}  // namespace committee
