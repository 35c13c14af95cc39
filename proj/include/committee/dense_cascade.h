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

// Cascades for per-pixel prediction (semantic segmentation).
//
// Each image is cut into square cells of side `cell_size` (or kept whole).
// A cell runs stage k + 1 only if the mean max-probability of its confident
// pixels after stage k stays below t_k. Pixels whose own max-probability is
// at most t_unlab are left out of that mean; a cell with no pixel left scores
// 0 and always moves on.
//
// Cost model: a cell that runs stage k is charged cost_k times the fraction
// of the image it covers. This assumes fully convolutional models whose cost
// scales with area and ignores the context a real crop would need.

#ifndef COMMITTEE_DENSE_CASCADE_H_
#define COMMITTEE_DENSE_CASCADE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "committee/cascade_engine.h"
#include "committee/prediction_store.h"
#include "committee/threshold_search.h"

namespace committee {

inline constexpr double kDefaultUnlabeledThreshold = 0.5;
inline constexpr uint32_t kDefaultIgnoreLabel = 255;

struct DensePredictionSet {
  std::string model_id;
  std::string model_type;
  // Per full image.
  double cost = 0.0;
  int replicate_index = 0;
  // N x H x W x C, pixel-major within each image.
  std::vector<float> logits;

  bool operator==(const DensePredictionSet&) const = default;
};

struct DenseLabelSet {
  // N x H x W.
  std::vector<uint32_t> labels;
  uint32_t ignore_label = kDefaultIgnoreLabel;

  bool operator==(const DenseLabelSet&) const = default;
};

struct DensePool {
  size_t num_images = 0;
  size_t height = 0;
  size_t width = 0;
  size_t num_classes = 0;
  std::vector<DensePredictionSet> entries;
  DenseLabelSet labels;

  size_t pixels_per_image() const { return height * width; }
  absl::StatusOr<size_t> IndexOf(std::string_view model_id) const;

  bool operator==(const DensePool&) const = default;
};

absl::Status ValidateDensePool(const DensePool& pool);

// Same manifest as classification pools, with "shape":[H,W] on every entry
// and an optional top-level "ignore_label" (default 255).
absl::StatusOr<DensePool> LoadDensePool(const std::filesystem::path& manifest_path);
absl::Status SaveDensePool(const DensePool& pool, const std::filesystem::path& dir);

struct DenseCascadeSpec {
  std::vector<std::string> models;
  std::vector<double> thresholds;
  double t_unlab = kDefaultUnlabeledThreshold;
  // Side of a square cell; nullopt routes whole images.
  std::optional<size_t> cell_size;
  AggregationMode aggregation = AggregationMode::kMeanLogits;
};

// Mean max-probability over the pixels of `region_logits` (pixels x C) whose
// max-probability exceeds t_unlab; 0 when none does.
double DenseConfidence(std::span<const double> region_logits, size_t num_classes,
                       double t_unlab);

struct MiouResult {
  // NaN for classes absent from both prediction and labels.
  std::vector<double> per_class_iou;
  double miou = 0.0;
  size_t classes_counted = 0;
  // C x C, row = label, column = prediction, ignored pixels excluded.
  std::vector<uint64_t> confusion;
};

absl::StatusOr<MiouResult> MiouFromConfusion(std::vector<uint64_t> confusion,
                                             size_t num_classes);
absl::StatusOr<MiouResult> Miou(std::span<const uint32_t> predicted,
                                const DenseLabelSet& labels, size_t num_classes);

struct DenseEvaluation {
  DenseCascadeSpec spec;
  double miou = 0.0;
  std::vector<double> per_class_iou;
  double avg_cost = 0.0;
  double worst_case_cost = 0.0;
  size_t cells_per_image = 0;
  std::vector<uint64_t> cell_exit_counts;
  std::vector<double> cell_exit_ratios;
  // Per cell (image-major, cells row-major), 1-based.
  std::vector<uint32_t> cell_exit_stage;
  // N x H x W.
  std::vector<uint32_t> predicted;
};

// Per-stage cell scores and per-cell confusion matrices for one model
// sequence, independent of thresholds.
class DenseProfile {
 public:
  static absl::StatusOr<DenseProfile> Build(const DensePool& pool,
                                            const DenseCascadeSpec& spec,
                                            int jobs = 1);

  size_t num_stages() const { return stage_costs_.size(); }
  size_t num_cells() const { return num_cells_; }
  size_t cells_per_image() const { return cells_per_image_; }
  std::span<const double> cell_confidences(size_t stage) const;

  DenseEvaluation Evaluate(std::span<const double> thresholds,
                           bool with_pixels) const;

 private:
  DenseProfile() = default;

  DenseCascadeSpec spec_;
  const DensePool* pool_ = nullptr;
  size_t num_cells_ = 0;
  size_t cells_per_image_ = 0;
  size_t cell_h_ = 0;
  size_t cell_w_ = 0;
  std::vector<double> stage_costs_;
  // Stage-major.
  std::vector<double> cell_confidence_;
  std::vector<uint32_t> pixel_prediction_;  // stage x N x H x W
  std::vector<uint64_t> cell_confusion_;    // stage x cell x C x C
};

absl::StatusOr<DenseEvaluation> EvaluateDenseCascade(const DenseCascadeSpec& spec,
                                                     const DensePool& pool,
                                                     int jobs = 1);

struct DenseSearchResult {
  DenseEvaluation evaluation;
  uint64_t points_evaluated = 0;
};

// Grid search over cell-score percentiles (plus 0 and 1) with mIoU playing
// the role of accuracy in the target. Ties prefer the secondary criterion of
// SearchThresholds, then the lexicographically smallest thresholds.
absl::StatusOr<DenseSearchResult> SearchDenseThresholds(
    const DenseCascadeSpec& base, const DensePool& pool,
    const ThresholdTarget& target, int grid_resolution, int jobs = 1);

}  // namespace committee

#endif  // COMMITTEE_DENSE_CASCADE_H_
