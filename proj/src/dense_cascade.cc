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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <set>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "committee/kernels.h"
#include "committee/parallel.h"
#include "committee/status.h"
#include "json.hpp"

namespace committee {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Mean of the scores above t_unlab, 0 if there are none. `kept` is scratch.
double MeanOfConfident(std::span<const double> pixel_scores, double t_unlab,
                       std::vector<double>& kept) {
  kept.clear();
  for (double s : pixel_scores) {
    if (s > t_unlab) kept.push_back(s);
  }
  if (kept.empty()) return 0.0;
  return kernels::Active().lane_sum(kept.data(), kept.size()) /
         static_cast<double>(kept.size());
}

absl::Status ValidateDenseSpec(const DenseCascadeSpec& spec, const DensePool& pool) {
  if (spec.models.empty()) return absl::InvalidArgumentError("cascade has no models");
  if (spec.thresholds.size() + 1 != spec.models.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "threshold count mismatch: ", spec.models.size(), " models need ",
        spec.models.size() - 1, " thresholds, got ", spec.thresholds.size()));
  }
  std::set<std::string_view> seen;
  for (const std::string& id : spec.models) {
    if (absl::StatusOr<size_t> i = pool.IndexOf(id); !i.ok()) return i.status();
    if (!seen.insert(id).second) {
      return absl::InvalidArgumentError(absl::StrCat("model '", id, "' is used twice"));
    }
  }
  for (double t : spec.thresholds) {
    if (std::isnan(t)) return absl::InvalidArgumentError("threshold is NaN");
  }
  if (!(spec.t_unlab >= 0.0 && spec.t_unlab <= 1.0)) {
    return absl::InvalidArgumentError("t_unlab must be in [0, 1]");
  }
  if (spec.cell_size.has_value()) {
    const size_t r = *spec.cell_size;
    if (r == 0 || pool.height % r != 0 || pool.width % r != 0) {
      return absl::InvalidArgumentError(absl::StrCat(
          "grid mismatch: cell size ", r, " does not divide the ", pool.height,
          "x", pool.width, " image"));
    }
  }
  return absl::OkStatus();
}

std::vector<uint64_t> SumConfusions(size_t classes) {
  return std::vector<uint64_t>(classes * classes, 0);
}

}  // namespace

absl::StatusOr<size_t> DensePool::IndexOf(std::string_view model_id) const {
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].model_id == model_id) return i;
  }
  return absl::NotFoundError(absl::StrCat("unknown model id '", std::string(model_id), "'"));
}

absl::Status ValidateDensePool(const DensePool& pool) {
  if (pool.num_images == 0 || pool.height == 0 || pool.width == 0 ||
      pool.num_classes == 0) {
    return absl::InvalidArgumentError("dense pool dimensions must be positive");
  }
  if (pool.entries.empty()) return absl::InvalidArgumentError("pool has no entries");
  const size_t pixels = pool.num_images * pool.pixels_per_image();
  if (pool.labels.labels.size() != pixels) {
    return absl::InvalidArgumentError(absl::StrCat(
        "dimension mismatch: ", pool.labels.labels.size(), " labels, expected ", pixels));
  }
  if (pool.labels.ignore_label < pool.num_classes) {
    return absl::InvalidArgumentError("ignore_label collides with a class index");
  }
  for (size_t p = 0; p < pixels; ++p) {
    const uint32_t l = pool.labels.labels[p];
    if (l != pool.labels.ignore_label && l >= pool.num_classes) {
      return absl::InvalidArgumentError(absl::StrCat(
          "label ", l, " at offset ", p, " is outside [0, ", pool.num_classes,
          ") and is not the ignore label"));
    }
  }
  std::set<std::string> ids;
  for (const DensePredictionSet& e : pool.entries) {
    if (!ids.insert(e.model_id).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("entry '", e.model_id, "': duplicate model_id"));
    }
    if (!(e.cost > 0.0) || !std::isfinite(e.cost)) {
      return absl::InvalidArgumentError(
          absl::StrCat("entry '", e.model_id, "': cost must be positive"));
    }
    if (e.logits.size() != pixels * pool.num_classes) {
      return absl::InvalidArgumentError(absl::StrCat(
          "entry '", e.model_id, "': dimension mismatch: ", e.logits.size(),
          " logits, expected ", pixels * pool.num_classes));
    }
    for (size_t k = 0; k < e.logits.size(); ++k) {
      if (!std::isfinite(e.logits[k])) {
        return absl::InvalidArgumentError(absl::StrCat(
            "entry '", e.model_id, "': non-finite logit at offset ", k));
      }
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<DensePool> LoadDensePool(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", manifest_path.string()));
  const fs::path base = manifest_path.parent_path();
  DensePool pool;
  std::string labels_file;
  std::vector<std::pair<DensePredictionSet, std::string>> pending;
  try {
    const json manifest = json::parse(in);
    if (manifest.at("version").get<int>() != kManifestVersion) {
      return absl::InvalidArgumentError("unsupported manifest version");
    }
    pool.num_images = manifest.at("num_examples").get<size_t>();
    pool.num_classes = manifest.at("num_classes").get<size_t>();
    labels_file = manifest.at("labels").get<std::string>();
    pool.labels.ignore_label = manifest.value("ignore_label", kDefaultIgnoreLabel);
    for (const json& e : manifest.at("entries")) {
      DensePredictionSet entry;
      entry.model_id = e.at("model_id").get<std::string>();
      entry.model_type = e.at("model_type").get<std::string>();
      entry.cost = e.at("cost").get<double>();
      entry.replicate_index = e.value("replicate_index", 0);
      const auto shape = e.at("shape").get<std::vector<size_t>>();
      if (shape.size() != 2) {
        return absl::InvalidArgumentError(
            absl::StrCat("entry '", entry.model_id, "': shape must be [H, W]"));
      }
      if (pool.height == 0) {
        pool.height = shape[0];
        pool.width = shape[1];
      } else if (shape[0] != pool.height || shape[1] != pool.width) {
        return absl::InvalidArgumentError(absl::StrCat(
            "entry '", entry.model_id, "': shape differs from the first entry"));
      }
      pending.emplace_back(std::move(entry), e.at("logits").get<std::string>());
    }
  } catch (const json::exception& ex) {
    return absl::InvalidArgumentError(
        absl::StrCat(manifest_path.string(), ": malformed manifest: ", ex.what()));
  }
  if (pool.num_images == 0 || pool.num_classes == 0 || pool.height == 0 ||
      pool.width == 0) {
    return absl::InvalidArgumentError("dense pool dimensions must be positive");
  }
  const size_t pixels = pool.num_images * pool.pixels_per_image();
  absl::StatusOr<std::vector<uint32_t>> labels = ReadLabelBlob(base / labels_file, pixels);
  if (!labels.ok()) return labels.status();
  pool.labels.labels = *std::move(labels);
  for (auto& [entry, file] : pending) {
    absl::StatusOr<std::vector<float>> logits =
        ReadFloatBlob(base / file, pixels * pool.num_classes, pool.num_classes);
    if (!logits.ok()) {
      return absl::Status(logits.status().code(),
                          absl::StrCat("entry '", entry.model_id, "': ",
                                       logits.status().message()));
    }
    entry.logits = *std::move(logits);
    pool.entries.push_back(std::move(entry));
  }
  if (absl::Status s = ValidateDensePool(pool); !s.ok()) return s;
  return pool;
}

absl::Status SaveDensePool(const DensePool& pool, const fs::path& dir) {
  if (absl::Status s = ValidateDensePool(pool); !s.ok()) return s;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) return absl::InternalError(absl::StrCat("cannot create ", dir.string()));
  if (absl::Status s = WriteLabelBlob(dir / "labels.u32", pool.labels.labels); !s.ok()) {
    return s;
  }
  json entries = json::array();
  for (size_t e = 0; e < pool.entries.size(); ++e) {
    const DensePredictionSet& entry = pool.entries[e];
    const std::string file = absl::StrCat("entry", e, ".f32");
    if (absl::Status s = WriteFloatBlob(dir / file, entry.logits); !s.ok()) return s;
    entries.push_back({{"model_id", entry.model_id},
                       {"model_type", entry.model_type},
                       {"cost", entry.cost},
                       {"resolution", nullptr},
                       {"replicate_index", entry.replicate_index},
                       {"shape", {pool.height, pool.width}},
                       {"logits", file}});
  }
  json doc = {{"version", kManifestVersion},
              {"num_examples", pool.num_images},
              {"num_classes", pool.num_classes},
              {"labels", "labels.u32"},
              {"ignore_label", pool.labels.ignore_label},
              {"entries", std::move(entries)}};
  std::ofstream out(dir / kManifestFileName);
  out << doc.dump(2) << "\n";
  if (!out) return absl::InternalError("cannot write dense manifest");
  return absl::OkStatus();
}

double DenseConfidence(std::span<const double> region_logits, size_t num_classes,
                       double t_unlab) {
  if (num_classes == 0 || region_logits.empty()) return 0.0;
  const size_t pixels = region_logits.size() / num_classes;
  std::vector<double> scores(pixels), probs(num_classes), kept;
  for (size_t p = 0; p < pixels; ++p) {
    SoftmaxInto(region_logits.subspan(p * num_classes, num_classes), probs);
    scores[p] = kernels::Active().max(probs.data(), num_classes);
  }
  return MeanOfConfident(scores, t_unlab, kept);
}

absl::StatusOr<MiouResult> MiouFromConfusion(std::vector<uint64_t> confusion,
                                             size_t num_classes) {
  if (confusion.size() != num_classes * num_classes) {
    return absl::InvalidArgumentError("confusion matrix has the wrong size");
  }
  uint64_t total = 0;
  for (uint64_t v : confusion) total += v;
  if (total == 0) return absl::InvalidArgumentError("every pixel is ignored");
  MiouResult result;
  result.per_class_iou.assign(num_classes, std::numeric_limits<double>::quiet_NaN());
  double sum = 0.0;
  for (size_t c = 0; c < num_classes; ++c) {
    const uint64_t tp = confusion[c * num_classes + c];
    uint64_t fn = 0, fp = 0;
    for (size_t o = 0; o < num_classes; ++o) {
      if (o == c) continue;
      fn += confusion[c * num_classes + o];
      fp += confusion[o * num_classes + c];
    }
    const uint64_t denom = tp + fp + fn;
    if (denom == 0) continue;
    result.per_class_iou[c] = static_cast<double>(tp) / static_cast<double>(denom);
    sum += result.per_class_iou[c];
    ++result.classes_counted;
  }
  result.miou = sum / static_cast<double>(result.classes_counted);
  result.confusion = std::move(confusion);
  return result;
}

absl::StatusOr<MiouResult> Miou(std::span<const uint32_t> predicted,
                                const DenseLabelSet& labels, size_t num_classes) {
  if (predicted.size() != labels.labels.size()) {
    return absl::InvalidArgumentError("prediction and label shapes differ");
  }
  std::vector<uint64_t> confusion = SumConfusions(num_classes);
  for (size_t p = 0; p < predicted.size(); ++p) {
    const uint32_t l = labels.labels[p];
    if (l == labels.ignore_label) continue;
    if (l >= num_classes || predicted[p] >= num_classes) {
      return absl::InvalidArgumentError(absl::StrCat("class index out of range at pixel ", p));
    }
    ++confusion[l * num_classes + predicted[p]];
  }
  return MiouFromConfusion(std::move(confusion), num_classes);
}

absl::StatusOr<DenseProfile> DenseProfile::Build(const DensePool& pool,
                                                 const DenseCascadeSpec& spec,
                                                 int jobs) {
  if (absl::Status s = ValidateDensePool(pool); !s.ok()) return s;
  if (absl::Status s = ValidateDenseSpec(spec, pool); !s.ok()) return s;
  DenseProfile profile;
  profile.spec_ = spec;
  profile.pool_ = &pool;
  profile.cell_h_ = spec.cell_size.value_or(pool.height);
  profile.cell_w_ = spec.cell_size.value_or(pool.width);
  const size_t rows = pool.height / profile.cell_h_;
  const size_t cols = pool.width / profile.cell_w_;
  profile.cells_per_image_ = rows * cols;
  profile.num_cells_ = pool.num_images * profile.cells_per_image_;
  const size_t stages = spec.models.size();
  const size_t c = pool.num_classes;
  const size_t hw = pool.pixels_per_image();
  const size_t cell_pixels = profile.cell_h_ * profile.cell_w_;

  std::vector<const DensePredictionSet*> entries;
  for (const std::string& id : spec.models) {
    const DensePredictionSet& e = pool.entries[*pool.IndexOf(id)];
    entries.push_back(&e);
    profile.stage_costs_.push_back(e.cost);
  }
  profile.cell_confidence_.resize(stages * profile.num_cells_);
  profile.pixel_prediction_.resize(stages * pool.num_images * hw);
  profile.cell_confusion_.assign(stages * profile.num_cells_ * c * c, 0);

  ParallelFor(profile.num_cells_, jobs, [&](size_t begin, size_t end) {
    const kernels::KernelTable& kt = kernels::Active();
    std::vector<double> sum(cell_pixels * c), mean(c), probs(c), widened(c);
    std::vector<double> scores(cell_pixels), kept;
    for (size_t cell = begin; cell < end; ++cell) {
      const size_t image = cell / profile.cells_per_image_;
      const size_t within = cell % profile.cells_per_image_;
      const size_t y0 = (within / cols) * profile.cell_h_;
      const size_t x0 = (within % cols) * profile.cell_w_;
      std::fill(sum.begin(), sum.end(), 0.0);
      for (size_t k = 0; k < stages; ++k) {
        uint64_t* confusion =
            profile.cell_confusion_.data() + (k * profile.num_cells_ + cell) * c * c;
        size_t p = 0;
        for (size_t y = y0; y < y0 + profile.cell_h_; ++y) {
          for (size_t x = x0; x < x0 + profile.cell_w_; ++x, ++p) {
            const size_t pixel = image * hw + y * pool.width + x;
            const float* row = entries[k]->logits.data() + pixel * c;
            double* acc = sum.data() + p * c;
            if (spec.aggregation == AggregationMode::kMeanLogits) {
              kt.accumulate_f32(row, acc, c);
              kt.divide(acc, static_cast<double>(k + 1), mean.data(), c);
              SoftmaxInto(mean, probs);
            } else {
              std::copy(row, row + c, widened.begin());
              SoftmaxInto(widened, probs);
              kt.accumulate_f64(probs.data(), acc, c);
              kt.divide(acc, static_cast<double>(k + 1), mean.data(), c);
              std::copy(mean.begin(), mean.end(), probs.begin());
            }
            scores[p] = kt.max(probs.data(), c);
            const uint32_t predicted = static_cast<uint32_t>(kt.argmax(mean.data(), c));
            profile.pixel_prediction_[k * pool.num_images * hw + pixel] = predicted;
            const uint32_t label = pool.labels.labels[pixel];
            if (label != pool.labels.ignore_label) ++confusion[label * c + predicted];
          }
        }
        profile.cell_confidence_[k * profile.num_cells_ + cell] =
            MeanOfConfident(scores, spec.t_unlab, kept);
      }
    }
  });
  return profile;
}

std::span<const double> DenseProfile::cell_confidences(size_t stage) const {
  return std::span<const double>(cell_confidence_).subspan(stage * num_cells_, num_cells_);
}

DenseEvaluation DenseProfile::Evaluate(std::span<const double> thresholds,
                                       bool with_pixels) const {
  const DensePool& pool = *pool_;
  const size_t stages = num_stages();
  const size_t c = pool.num_classes;
  const size_t hw = pool.pixels_per_image();
  const size_t cols = pool.width / cell_w_;
  DenseEvaluation eval;
  eval.spec = spec_;
  eval.spec.thresholds.assign(thresholds.begin(), thresholds.end());
  eval.cells_per_image = cells_per_image_;
  eval.cell_exit_counts.assign(stages, 0);
  eval.cell_exit_stage.resize(num_cells_);
  if (with_pixels) eval.predicted.resize(pool.num_images * hw);
  std::vector<uint64_t> confusion = SumConfusions(c);

  for (size_t cell = 0; cell < num_cells_; ++cell) {
    size_t k = 0;
    while (k + 1 < stages && !(cell_confidence_[k * num_cells_ + cell] >= thresholds[k])) ++k;
    ++eval.cell_exit_counts[k];
    eval.cell_exit_stage[cell] = static_cast<uint32_t>(k + 1);
    const uint64_t* part = cell_confusion_.data() + (k * num_cells_ + cell) * c * c;
    for (size_t j = 0; j < c * c; ++j) confusion[j] += part[j];
    if (with_pixels) {
      const size_t image = cell / cells_per_image_;
      const size_t within = cell % cells_per_image_;
      const size_t y0 = (within / cols) * cell_h_;
      const size_t x0 = (within % cols) * cell_w_;
      for (size_t y = y0; y < y0 + cell_h_; ++y) {
        for (size_t x = x0; x < x0 + cell_w_; ++x) {
          const size_t pixel = image * hw + y * pool.width + x;
          eval.predicted[pixel] = pixel_prediction_[k * pool.num_images * hw + pixel];
        }
      }
    }
  }
  for (uint64_t n : eval.cell_exit_counts) {
    eval.cell_exit_ratios.push_back(static_cast<double>(n) / static_cast<double>(num_cells_));
  }
  eval.avg_cost = AverageCost(stage_costs_, eval.cell_exit_counts, num_cells_);
  for (double cost : stage_costs_) eval.worst_case_cost += cost;
  absl::StatusOr<MiouResult> miou = MiouFromConfusion(std::move(confusion), c);
  if (miou.ok()) {
    eval.miou = miou->miou;
    eval.per_class_iou = miou->per_class_iou;
  } else {
    eval.miou = std::numeric_limits<double>::quiet_NaN();
  }
  return eval;
}

absl::StatusOr<DenseEvaluation> EvaluateDenseCascade(const DenseCascadeSpec& spec,
                                                     const DensePool& pool, int jobs) {
  absl::StatusOr<DenseProfile> profile = DenseProfile::Build(pool, spec, jobs);
  if (!profile.ok()) return profile.status();
  DenseEvaluation eval = profile->Evaluate(spec.thresholds, /*with_pixels=*/true);
  if (std::isnan(eval.miou)) return absl::InvalidArgumentError("every pixel is ignored");
  return eval;
}

absl::StatusOr<DenseSearchResult> SearchDenseThresholds(
    const DenseCascadeSpec& base, const DensePool& pool,
    const ThresholdTarget& target, int grid_resolution, int jobs) {
  if (grid_resolution < 2) {
    return absl::InvalidArgumentError("grid resolution must be at least 2");
  }
  DenseCascadeSpec spec = base;
  spec.thresholds.assign(spec.models.empty() ? 0 : spec.models.size() - 1, 1.0);
  absl::StatusOr<DenseProfile> profile = DenseProfile::Build(pool, spec, jobs);
  if (!profile.ok()) return profile.status();
  const size_t stages = profile->num_stages();
  const size_t cells = profile->num_cells();

  std::vector<std::vector<double>> grid;
  std::vector<double> sorted(cells);
  const uint64_t g = static_cast<uint64_t>(grid_resolution);
  for (size_t k = 0; k + 1 < stages; ++k) {
    std::span<const double> scores = profile->cell_confidences(k);
    std::copy(scores.begin(), scores.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> candidates = {0.0, 1.0};
    for (uint64_t j = 0; j <= g; ++j) candidates.push_back(sorted[j * (cells - 1) / g]);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    grid.push_back(std::move(candidates));
  }

  const bool cost_budget = std::holds_alternative<CostBudget>(target);
  double limit;
  if (cost_budget) {
    limit = std::get<CostBudget>(target).budget;
  } else if (const auto* floor = std::get_if<AccuracyFloor>(&target)) {
    limit = floor->floor;
  } else {
    const std::vector<double> never(stages - 1, std::numeric_limits<double>::infinity());
    limit = profile->Evaluate(never, false).miou - std::get<MatchEnsemble>(target).slack;
  }

  std::optional<DenseEvaluation> best;
  uint64_t points = 0;
  double reach_miou = -1.0;
  double reach_cost = std::numeric_limits<double>::infinity();
  std::vector<size_t> at(grid.size(), 0);
  std::vector<double> t(grid.size());
  while (true) {
    for (size_t s = 0; s < at.size(); ++s) t[s] = grid[s][at[s]];
    DenseEvaluation e = profile->Evaluate(t, false);
    ++points;
    reach_cost = std::min(reach_cost, e.avg_cost);
    bool feasible, better;
    if (cost_budget) {
      feasible = e.avg_cost <= limit;
      if (feasible) reach_miou = std::max(reach_miou, e.miou);
      better = !best || e.miou > best->miou ||
               (e.miou == best->miou && e.avg_cost < best->avg_cost);
    } else {
      reach_miou = std::max(reach_miou, e.miou);
      feasible = e.miou >= limit;
      better = !best || e.avg_cost < best->avg_cost ||
               (e.avg_cost == best->avg_cost && e.miou > best->miou);
    }
    if (feasible && better) best = std::move(e);
    size_t pos = at.size();
    while (pos > 0 && ++at[pos - 1] == grid[pos - 1].size()) at[--pos] = 0;
    if (pos == 0) break;
  }
  if (!best) {
    if (cost_budget) {
      return InfeasibleError(absl::StrFormat(
          "%s is unreachable: the cheapest grid point costs %.6g",
          DescribeTarget(target), reach_cost));
    }
    return InfeasibleError(absl::StrFormat(
        "mIoU %.6g is unreachable: the best grid point reaches %.6g", limit, reach_miou));
  }
  DenseSearchResult result;
  result.evaluation = profile->Evaluate(best->spec.thresholds, /*with_pixels=*/true);
  result.points_evaluated = points;
  return result;
}

}  // namespace committee
