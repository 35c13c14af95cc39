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

// In-memory and on-disk representation of pre-computed model predictions.
//
// A pool directory holds a `pool.json` manifest, one float32 logits blob per
// entry and a uint32 label blob:
//
//   {"version":1,"num_examples":N,"num_classes":C,"labels":"labels.u32",
//    "entries":[{"model_id":"b0","model_type":"b0","cost":0.39,
//                "resolution":null,"replicate_index":0,"logits":"b0.f32"}]}
//
// Blobs are raw little-endian, example-major. Small fixtures may use `.csv`
// files instead (one example per row).

#ifndef COMMITTEE_PREDICTION_STORE_H_
#define COMMITTEE_PREDICTION_STORE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace committee {

inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kManifestFileName = "pool.json";
// Upper bound on N * C for CSV blobs.
inline constexpr size_t kMaxCsvValues = 1'000'000;

// One model's logits over the evaluation examples.
struct PredictionSet {
  std::string model_id;
  // Architecture family; replicates share it.
  std::string model_type;
  // Average inference cost per example, in whatever unit the user chose.
  double cost = 0.0;
  std::optional<int> resolution;
  int replicate_index = 0;
  // N x C, row-major.
  std::vector<float> logits;

  std::span<const float> Row(size_t example, size_t num_classes) const {
    return std::span<const float>(logits).subspan(example * num_classes,
                                                  num_classes);
  }

  bool operator==(const PredictionSet&) const = default;
};

struct LabeledDataset {
  std::vector<uint32_t> labels;
  std::string split_tag = "evaluation";

  bool operator==(const LabeledDataset&) const = default;
};

struct ModelPool {
  size_t num_classes = 0;
  std::vector<PredictionSet> entries;
  LabeledDataset labels;

  size_t num_examples() const { return labels.labels.size(); }

  // Position of the entry with this id, or NotFound.
  absl::StatusOr<size_t> IndexOf(std::string_view model_id) const;

  bool operator==(const ModelPool&) const = default;
};

struct ManifestEntry {
  std::string model_id;
  std::string model_type;
  double cost = 0.0;
  std::optional<int> resolution;
  int replicate_index = 0;
  std::string logits_path;
};

struct PoolManifest {
  int version = kManifestVersion;
  size_t num_classes = 0;
  size_t num_examples = 0;
  std::string labels_path;
  std::vector<ManifestEntry> entries;
};

// Checks every pool invariant: N > 0, C > 0, at least one entry, logits sized
// N x C and finite, labels in [0, C), cost > 0, unique model ids and unique
// (model_type, replicate_index) pairs.
absl::Status ValidatePool(const ModelPool& pool);

absl::StatusOr<ModelPool> LoadPool(const std::filesystem::path& manifest_path);

// Writes `pool.json`, `labels.u32` and one `<model_id>.f32` per entry into
// `dir` (created if missing). The pool is validated first.
absl::StatusOr<PoolManifest> SavePool(const ModelPool& pool,
                                      const std::filesystem::path& dir);

// Deterministic random partition of the examples. The first pool receives
// floor(fraction * N) examples in permuted order, the second the rest.
absl::StatusOr<std::pair<ModelPool, ModelPool>> SplitDataset(
    const ModelPool& pool, double fraction, uint64_t seed);

// Restriction of every entry and the labels to `examples`, in that order.
ModelPool SelectExamples(const ModelPool& pool,
                         std::span<const size_t> examples);

struct SynthConfig {
  size_t num_examples = 1000;
  size_t num_classes = 10;
  // One target top-1 accuracy per model, each in (1/C, 1].
  std::vector<double> accuracies;
  // One cost per model, each > 0.
  std::vector<double> costs;
  // 0: models err independently; 1: every model ranks examples by the same
  // latent difficulty.
  double correlation = 0.5;
  // Optional per-model metadata; defaults are "m<i>" ids with distinct types.
  std::vector<std::string> model_ids;
  std::vector<std::string> model_types;
  std::vector<int> replicate_indices;
  std::vector<std::optional<int>> resolutions;
  // Logit scale of the most confident model; cheaper models get less.
  double sharpness = 2.0;
  uint64_t seed = 0;
};

// Builds a pool whose models hit their accuracy targets to within 1/N and
// whose confidence tracks correctness: correct predictions get a larger
// logit margin than wrong ones, and costlier models get larger margins.
absl::StatusOr<ModelPool> GenerateSyntheticPool(const SynthConfig& config);

// Raw blob helpers, shared with the dense pool loader.
absl::StatusOr<std::vector<float>> ReadFloatBlob(
    const std::filesystem::path& path, size_t expected_count,
    size_t row_width);
absl::StatusOr<std::vector<uint32_t>> ReadLabelBlob(
    const std::filesystem::path& path, size_t expected_count);
absl::Status WriteFloatBlob(const std::filesystem::path& path,
                            std::span<const float> values);
absl::Status WriteLabelBlob(const std::filesystem::path& path,
                            std::span<const uint32_t> values);

}  // namespace committee

#endif  // COMMITTEE_PREDICTION_STORE_H_
