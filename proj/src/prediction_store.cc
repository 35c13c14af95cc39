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

#include "committee/prediction_store.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <set>
#include <sstream>

#include "absl/strings/str_cat.h"
#include "committee/random.h"
#include "json.hpp"

namespace committee {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

bool IsCsv(const fs::path& path) { return path.extension() == ".csv"; }

absl::StatusOr<std::string> ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path.string()));
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (in.bad()) return absl::DataLossError(absl::StrCat("read failed: ", path.string()));
  return bytes;
}

uint32_t LoadLe32(const char* p) {
  const auto* b = reinterpret_cast<const unsigned char*>(p);
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void StoreLe32(uint32_t v, std::string& out) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

absl::Status WriteFile(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::InternalError(absl::StrCat("cannot write ", path.string()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) return absl::InternalError(absl::StrCat("write failed: ", path.string()));
  return absl::OkStatus();
}

// Parses whitespace/comma separated decimal numbers, one row per line.
absl::StatusOr<std::vector<double>> ParseCsvNumbers(const fs::path& path,
                                                    size_t row_width) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return text.status();
  std::vector<double> values;
  std::istringstream lines(*text);
  std::string line;
  size_t row = 0;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t,") == std::string::npos) continue;
    size_t in_row = 0;
    const char* p = line.data();
    const char* end = p + line.size();
    while (p < end) {
      while (p < end && (*p == ' ' || *p == '\t' || *p == ',')) ++p;
      if (p == end) break;
      if (*p == '+') ++p;
      double v = 0.0;
      auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        return absl::InvalidArgumentError(absl::StrCat(
            path.string(), ": row ", row, ": cannot parse number near '",
            std::string(p, std::min<size_t>(16, static_cast<size_t>(end - p))),
            "'"));
      }
      values.push_back(v);
      ++in_row;
      p = next;
    }
    if (in_row != row_width) {
      return absl::InvalidArgumentError(absl::StrCat(
          path.string(), ": row ", row, " has ", in_row, " values, expected ",
          row_width));
    }
    ++row;
    if (values.size() > kMaxCsvValues) {
      return absl::InvalidArgumentError(absl::StrCat(
          path.string(), ": CSV blobs are limited to ", kMaxCsvValues,
          " values; use the binary format"));
    }
  }
  return values;
}

std::string EntryTag(const PredictionSet& e, size_t index) {
  return e.model_id.empty() ? absl::StrCat("entry #", index)
                            : absl::StrCat("entry '", e.model_id, "'");
}

}  // namespace

absl::StatusOr<size_t> ModelPool::IndexOf(std::string_view model_id) const {
  for (size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].model_id == model_id) return i;
  }
  return absl::NotFoundError(absl::StrCat("unknown model id '", std::string(model_id), "'"));
}

absl::Status ValidatePool(const ModelPool& pool) {
  const size_t n = pool.num_examples();
  const size_t c = pool.num_classes;
  if (n == 0) return absl::InvalidArgumentError("pool has no examples");
  if (c == 0) return absl::InvalidArgumentError("pool has no classes");
  if (pool.entries.empty()) return absl::InvalidArgumentError("pool has no entries");
  for (size_t i = 0; i < n; ++i) {
    if (pool.labels.labels[i] >= c) {
      return absl::InvalidArgumentError(absl::StrCat(
          "label ", pool.labels.labels[i], " at offset ", i,
          " is outside [0, ", c, ")"));
    }
  }
  std::set<std::string> ids;
  std::set<std::pair<std::string, int>> replicas;
  for (size_t e = 0; e < pool.entries.size(); ++e) {
    const PredictionSet& entry = pool.entries[e];
    const std::string tag = EntryTag(entry, e);
    if (entry.model_id.empty()) {
      return absl::InvalidArgumentError(absl::StrCat(tag, ": empty model_id"));
    }
    if (!ids.insert(entry.model_id).second) {
      return absl::InvalidArgumentError(
          absl::StrCat(tag, ": duplicate model_id"));
    }
    if (!replicas.insert({entry.model_type, entry.replicate_index}).second) {
      return absl::InvalidArgumentError(absl::StrCat(
          tag, ": duplicate (model_type, replicate_index) = ('",
          entry.model_type, "', ", entry.replicate_index, ")"));
    }
    if (entry.replicate_index < 0) {
      return absl::InvalidArgumentError(
          absl::StrCat(tag, ": negative replicate_index"));
    }
    if (!(entry.cost > 0.0) || !std::isfinite(entry.cost)) {
      return absl::InvalidArgumentError(
          absl::StrCat(tag, ": cost must be positive and finite"));
    }
    if (entry.resolution.has_value() && *entry.resolution <= 0) {
      return absl::InvalidArgumentError(
          absl::StrCat(tag, ": resolution must be positive"));
    }
    if (entry.logits.size() != n * c) {
      return absl::InvalidArgumentError(absl::StrCat(
          tag, ": dimension mismatch: ", entry.logits.size(),
          " logits, expected ", n, " x ", c, " = ", n * c));
    }
    for (size_t k = 0; k < entry.logits.size(); ++k) {
      if (!std::isfinite(entry.logits[k])) {
        return absl::InvalidArgumentError(absl::StrCat(
            tag, ": non-finite logit at offset ", k, " (example ", k / c,
            ", class ", k % c, ")"));
      }
    }
  }
  return absl::OkStatus();
}

absl::StatusOr<std::vector<float>> ReadFloatBlob(const fs::path& path,
                                                 size_t expected_count,
                                                 size_t row_width) {
  std::vector<float> values;
  if (IsCsv(path)) {
    absl::StatusOr<std::vector<double>> parsed = ParseCsvNumbers(path, row_width);
    if (!parsed.ok()) return parsed.status();
    values.assign(parsed->begin(), parsed->end());
  } else {
    absl::StatusOr<std::string> bytes = ReadFile(path);
    if (!bytes.ok()) return bytes.status();
    if (bytes->size() % 4 != 0) {
      return absl::InvalidArgumentError(absl::StrCat(
          path.string(), ": dimension mismatch: size ", bytes->size(),
          " bytes is not a whole number of float32 values"));
    }
    values.resize(bytes->size() / 4);
    for (size_t i = 0; i < values.size(); ++i) {
      values[i] = std::bit_cast<float>(LoadLe32(bytes->data() + 4 * i));
    }
  }
  if (values.size() != expected_count) {
    return absl::InvalidArgumentError(absl::StrCat(
        path.string(), ": dimension mismatch: found ", values.size(),
        " values, expected ", expected_count));
  }
  return values;
}

absl::StatusOr<std::vector<uint32_t>> ReadLabelBlob(const fs::path& path,
                                                    size_t expected_count) {
  std::vector<uint32_t> labels;
  if (IsCsv(path)) {
    absl::StatusOr<std::vector<double>> parsed = ParseCsvNumbers(path, 1);
    if (!parsed.ok()) return parsed.status();
    for (size_t i = 0; i < parsed->size(); ++i) {
      const double v = (*parsed)[i];
      if (v < 0 || v != std::floor(v) || v > 4294967295.0) {
        return absl::InvalidArgumentError(absl::StrCat(
            path.string(), ": label at offset ", i, " is not a class index"));
      }
      labels.push_back(static_cast<uint32_t>(v));
    }
  } else {
    absl::StatusOr<std::string> bytes = ReadFile(path);
    if (!bytes.ok()) return bytes.status();
    if (bytes->size() % 4 != 0) {
      return absl::InvalidArgumentError(absl::StrCat(
          path.string(), ": dimension mismatch: size ", bytes->size(),
          " bytes is not a whole number of uint32 values"));
    }
    labels.resize(bytes->size() / 4);
    for (size_t i = 0; i < labels.size(); ++i) {
      labels[i] = LoadLe32(bytes->data() + 4 * i);
    }
  }
  if (labels.size() != expected_count) {
    return absl::InvalidArgumentError(absl::StrCat(
        path.string(), ": dimension mismatch: found ", labels.size(),
        " labels, expected ", expected_count));
  }
  return labels;
}

absl::Status WriteFloatBlob(const fs::path& path, std::span<const float> values) {
  std::string bytes;
  bytes.reserve(values.size() * 4);
  for (float v : values) StoreLe32(std::bit_cast<uint32_t>(v), bytes);
  return WriteFile(path, bytes);
}

absl::Status WriteLabelBlob(const fs::path& path,
                            std::span<const uint32_t> values) {
  std::string bytes;
  bytes.reserve(values.size() * 4);
  for (uint32_t v : values) StoreLe32(v, bytes);
  return WriteFile(path, bytes);
}

absl::StatusOr<ModelPool> LoadPool(const fs::path& manifest_path) {
  absl::StatusOr<std::string> text = ReadFile(manifest_path);
  if (!text.ok()) return text.status();
  const fs::path base = manifest_path.parent_path();

  ModelPool pool;
  size_t num_examples = 0;
  std::vector<std::pair<PredictionSet, std::string>> pending;
  std::string labels_file;
  try {
    const json manifest = json::parse(*text);
    const int version = manifest.at("version").get<int>();
    if (version != kManifestVersion) {
      return absl::InvalidArgumentError(absl::StrCat(
          manifest_path.string(), ": unsupported manifest version ", version));
    }
    num_examples = manifest.at("num_examples").get<size_t>();
    pool.num_classes = manifest.at("num_classes").get<size_t>();
    labels_file = manifest.at("labels").get<std::string>();
    for (const json& e : manifest.at("entries")) {
      PredictionSet entry;
      entry.model_id = e.at("model_id").get<std::string>();
      entry.model_type = e.at("model_type").get<std::string>();
      entry.cost = e.at("cost").get<double>();
      if (e.contains("resolution") && !e.at("resolution").is_null()) {
        entry.resolution = e.at("resolution").get<int>();
      }
      entry.replicate_index = e.value("replicate_index", 0);
      pending.emplace_back(std::move(entry), e.at("logits").get<std::string>());
    }
  } catch (const json::exception& ex) {
    return absl::InvalidArgumentError(
        absl::StrCat(manifest_path.string(), ": malformed manifest: ", ex.what()));
  }
  if (num_examples == 0 || pool.num_classes == 0) {
    return absl::InvalidArgumentError(absl::StrCat(
        manifest_path.string(), ": num_examples and num_classes must be positive"));
  }

  absl::StatusOr<std::vector<uint32_t>> labels =
      ReadLabelBlob(base / labels_file, num_examples);
  if (!labels.ok()) return labels.status();
  pool.labels.labels = *std::move(labels);

  for (auto& [entry, file] : pending) {
    absl::StatusOr<std::vector<float>> logits = ReadFloatBlob(
        base / file, num_examples * pool.num_classes, pool.num_classes);
    if (!logits.ok()) {
      return absl::Status(logits.status().code(),
                          absl::StrCat("entry '", entry.model_id, "': ",
                                       logits.status().message()));
    }
    entry.logits = *std::move(logits);
    pool.entries.push_back(std::move(entry));
  }
  if (absl::Status s = ValidatePool(pool); !s.ok()) return s;
  return pool;
}

absl::StatusOr<PoolManifest> SavePool(const ModelPool& pool, const fs::path& dir) {
  if (absl::Status s = ValidatePool(pool); !s.ok()) return s;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    return absl::InternalError(
        absl::StrCat("cannot create ", dir.string(), ": ", ec.message()));
  }

  PoolManifest manifest;
  manifest.num_classes = pool.num_classes;
  manifest.num_examples = pool.num_examples();
  manifest.labels_path = "labels.u32";
  if (absl::Status s = WriteLabelBlob(dir / manifest.labels_path, pool.labels.labels);
      !s.ok()) {
    return s;
  }

  json entries = json::array();
  for (size_t e = 0; e < pool.entries.size(); ++e) {
    const PredictionSet& entry = pool.entries[e];
    ManifestEntry record{entry.model_id, entry.model_type, entry.cost,
                         entry.resolution, entry.replicate_index,
                         absl::StrCat("entry", e, ".f32")};
    if (absl::Status s = WriteFloatBlob(dir / record.logits_path, entry.logits);
        !s.ok()) {
      return s;
    }
    entries.push_back({
        {"model_id", record.model_id},
        {"model_type", record.model_type},
        {"cost", record.cost},
        {"resolution", record.resolution.has_value() ? json(*record.resolution)
                                                     : json(nullptr)},
        {"replicate_index", record.replicate_index},
        {"logits", record.logits_path},
    });
    manifest.entries.push_back(std::move(record));
  }
  json doc = {
      {"version", manifest.version},
      {"num_examples", manifest.num_examples},
      {"num_classes", manifest.num_classes},
      {"labels", manifest.labels_path},
      {"entries", std::move(entries)},
  };
  if (absl::Status s = WriteFile(dir / kManifestFileName, doc.dump(2) + "\n");
      !s.ok()) {
    return s;
  }
  return manifest;
}

ModelPool SelectExamples(const ModelPool& pool, std::span<const size_t> examples) {
  ModelPool out;
  out.num_classes = pool.num_classes;
  out.labels.split_tag = pool.labels.split_tag;
  out.labels.labels.reserve(examples.size());
  for (size_t i : examples) out.labels.labels.push_back(pool.labels.labels[i]);
  const size_t c = pool.num_classes;
  for (const PredictionSet& entry : pool.entries) {
    PredictionSet copy = entry;
    copy.logits.clear();
    copy.logits.reserve(examples.size() * c);
    for (size_t i : examples) {
      std::span<const float> row = entry.Row(i, c);
      copy.logits.insert(copy.logits.end(), row.begin(), row.end());
    }
    out.entries.push_back(std::move(copy));
  }
  return out;
}

absl::StatusOr<std::pair<ModelPool, ModelPool>> SplitDataset(
    const ModelPool& pool, double fraction, uint64_t seed) {
  const size_t n = pool.num_examples();
  if (n < 2) return absl::InvalidArgumentError("split needs at least 2 examples");
  if (!(fraction > 0.0 && fraction < 1.0)) {
    return absl::InvalidArgumentError("split fraction must be in (0, 1)");
  }
  // The epsilon keeps products such as 0.29 * 100 from rounding down.
  const size_t first =
      static_cast<size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
  if (first == 0 || first >= n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "split fraction ", fraction, " of ", n, " examples leaves a half empty"));
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.Shuffle(order);
  std::vector<size_t> a(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(first));
  std::vector<size_t> b(order.begin() + static_cast<std::ptrdiff_t>(first), order.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  ModelPool selection = SelectExamples(pool, a);
  ModelPool evaluation = SelectExamples(pool, b);
  selection.labels.split_tag = "threshold-selection";
  evaluation.labels.split_tag = "evaluation";
  return std::make_pair(std::move(selection), std::move(evaluation));
}

absl::StatusOr<ModelPool> GenerateSyntheticPool(const SynthConfig& config) {
  const size_t n = config.num_examples;
  const size_t c = config.num_classes;
  const size_t models = config.accuracies.size();
  if (n == 0) return absl::InvalidArgumentError("num_examples must be positive");
  if (c < 2) return absl::InvalidArgumentError("num_classes must be at least 2");
  if (models == 0) return absl::InvalidArgumentError("no models requested");
  if (config.costs.size() != models) {
    return absl::InvalidArgumentError("one cost per model is required");
  }
  if (!(config.correlation >= 0.0 && config.correlation <= 1.0)) {
    return absl::InvalidArgumentError("correlation must be in [0, 1]");
  }
  if (!(config.sharpness > 0.0)) {
    return absl::InvalidArgumentError("sharpness must be positive");
  }
  auto check_size = [&](size_t size, std::string_view what) -> absl::Status {
    if (size != 0 && size != models) {
      return absl::InvalidArgumentError(
          absl::StrCat(std::string(what), " must be empty or have one value per model"));
    }
    return absl::OkStatus();
  };
  for (auto [size, what] : {std::pair<size_t, std::string_view>{config.model_ids.size(), "model_ids"},
                            {config.model_types.size(), "model_types"},
                            {config.replicate_indices.size(), "replicate_indices"},
                            {config.resolutions.size(), "resolutions"}}) {
    if (absl::Status s = check_size(size, what); !s.ok()) return s;
  }
  const double chance = 1.0 / static_cast<double>(c);
  for (size_t m = 0; m < models; ++m) {
    const double a = config.accuracies[m];
    if (!(a > chance && a <= 1.0)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "accuracy target ", a, " for model ", m, " is infeasible: must be in (",
          chance, ", 1]"));
    }
    if (!(config.costs[m] > 0.0)) {
      return absl::InvalidArgumentError(absl::StrCat("cost of model ", m, " must be positive"));
    }
  }

  Rng rng(config.seed);
  ModelPool pool;
  pool.num_classes = c;
  pool.labels.labels.resize(n);
  std::vector<double> difficulty(n);
  for (size_t i = 0; i < n; ++i) {
    pool.labels.labels[i] = static_cast<uint32_t>(rng.Below(c));
    difficulty[i] = rng.Normal();
  }

  const auto [min_cost, max_cost] =
      std::minmax_element(config.costs.begin(), config.costs.end());
  const double log_span = std::log(*max_cost) - std::log(*min_cost);
  const double shared = std::sqrt(config.correlation);
  const double own = std::sqrt(1.0 - config.correlation);

  for (size_t m = 0; m < models; ++m) {
    PredictionSet entry;
    entry.model_id = config.model_ids.empty() ? absl::StrCat("m", m) : config.model_ids[m];
    entry.model_type =
        config.model_types.empty() ? entry.model_id : config.model_types[m];
    entry.replicate_index =
        config.replicate_indices.empty() ? 0 : config.replicate_indices[m];
    if (!config.resolutions.empty()) entry.resolution = config.resolutions[m];
    entry.cost = config.costs[m];

    // Cost-ranked sharpness in [0.5, 1] x sharpness.
    const double rel = log_span > 0.0
                           ? (std::log(config.costs[m]) - std::log(*min_cost)) / log_span
                           : 1.0;
    const double scale = config.sharpness * (0.5 + 0.5 * rel);

    std::vector<double> latent(n);
    for (size_t i = 0; i < n; ++i) latent[i] = shared * difficulty[i] + own * rng.Normal();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t x, size_t y) { return latent[x] < latent[y]; });
    const double a = config.accuracies[m];
    const size_t num_correct = static_cast<size_t>(std::llround(a * static_cast<double>(n)));

    entry.logits.resize(n * c);
    std::vector<double> noise(c);
    for (size_t rank = 0; rank < n; ++rank) {
      const size_t i = order[rank];
      const bool correct = rank < num_correct;
      const uint32_t label = pool.labels.labels[i];
      const size_t predicted =
          correct ? label : (label + 1 + rng.Below(c - 1)) % c;
      double margin;
      if (correct) {
        // Easiest examples (lowest latent rank) get the widest margin.
        const double ease = 1.0 - static_cast<double>(rank) /
                                      static_cast<double>(std::max<size_t>(num_correct, 1));
        margin = scale * (0.5 + 2.5 * ease);
      } else {
        margin = scale * rng.Uniform();
      }
      margin = std::max(margin, 1e-2);
      double top_other = -1e300;
      for (size_t k = 0; k < c; ++k) {
        noise[k] = rng.Normal();
        if (k != predicted) top_other = std::max(top_other, noise[k]);
      }
      noise[predicted] = top_other + margin;
      // A wrong prediction keeps the true class as its runner-up.
      // A wrong prediction still leans toward the true class, as trained
      // models do; without this, mean-of-probs and mean-of-logits ensembles
      // drift apart by several points.
      if (!correct) {
        noise[label] = std::min(noise[label] + 0.5 * scale, noise[predicted] - 1e-3);
      }
      for (size_t k = 0; k < c; ++k) {
        entry.logits[i * c + k] = static_cast<float>(noise[k]);
      }
    }
    pool.entries.push_back(std::move(entry));
  }
  if (absl::Status s = ValidatePool(pool); !s.ok()) return s;
  return pool;
}

}  // namespace committee
