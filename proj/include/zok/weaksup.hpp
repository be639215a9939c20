// Copyright 2026 The zok Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "zok/core_io.hpp"
#include "zok/learner.hpp"
#include "zok/zoomout.hpp"

namespace zok::weaksup {

// Foreground / background scores of one class over an H' x W' grid,
// row-major.
struct ScoreField {
  int height = 0;
  int width = 0;
  std::vector<double> fg;
  std::vector<double> bg;

  ScoreField() = default;
  ScoreField(int h, int w) : height(h), width(w), fg(std::size_t(h) * w), bg(std::size_t(h) * w) {}
  std::size_t size() const { return fg.size(); }
};

enum class LocalizationModel { kPixel, kGlobal };

// max_i sigma(S_i - Sbar_i).
double pixel_softmax_prob(const ScoreField& field);
// sigma(max S - max Sbar).
double global_softmax_prob(const ScoreField& field);
double class_prob(const ScoreField& field, LocalizationModel model);

struct ImageLossGrad {
  double loss = 0.0;
  std::vector<double> d_fg;
  std::vector<double> d_bg;
};

// Binary log-loss of the image-level probability. The gradient is nonzero
// only at the argmax location(s); ties go to the smallest index.
ImageLossGrad image_loss_and_grad(const ScoreField& field, bool present,
                                  LocalizationModel model);

// Unit-norm per-location vectors, location-major (z[i * dims + d]).
// Locations whose standardized vector is zero are invalid.
struct NormalizedField {
  int height = 0;
  int width = 0;
  int dims = 0;
  std::vector<float> z;
  std::vector<std::uint8_t> valid;

  std::size_t size() const { return valid.size(); }
  std::span<const float> at(std::size_t i) const {
    return {z.data() + i * static_cast<std::size_t>(dims), static_cast<std::size_t>(dims)};
  }
  double dot(std::size_t i, std::size_t j) const;
};

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

inline constexpr double kStdEpsilon = 1e-8;

StandardizationStats fit_standardization(const std::vector<zoomout::FeatureMap>& fields);
NormalizedField normalize_field(const zoomout::FeatureMap& raw,
                                const StandardizationStats& stats);

struct NormalizedSet {
  std::vector<NormalizedField> fields;
  StandardizationStats stats;
};

NormalizedSet normalize_features(const std::vector<zoomout::FeatureMap>& fields);

// Greedy picks by score damped by similarity to earlier picks. Candidates
// after the first are limited to positive scores, falling back to plain
// score order when none remain. Returns fewer than k points only when valid
// locations run out.
std::vector<std::uint32_t> diverse_sample_fg(std::span<const double> scores,
                                             const NormalizedField& z, int k);

// Greedy picks least similar to every foreground pick and to earlier
// background picks; foreground picks are not eligible.
std::vector<std::uint32_t> diverse_sample_bg(const NormalizedField& z,
                                             std::span<const std::uint32_t> fg,
                                             int k_bg);

std::vector<std::uint32_t> topk_sample(std::span<const double> scores, int k);
// Diverse sampling with similarity 1 - distance / diagonal on grid
// positions.
std::vector<std::uint32_t> spatial_diverse_sample(std::span<const double> scores,
                                                  int height, int width, int k);

enum class SampleMode { kDiverse, kTopK, kSpatial };

SampleMode parse_sample_mode(const std::string& text);

struct SampleSet {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<std::vector<std::uint32_t>> fg;  // per class, empty if absent
  std::vector<std::uint32_t> bg;
};

// Samples each listed class from its foreground score map, then background
// points against the union of foreground picks. `scores` is C x H' x W'.
SampleSet sample_image(const zoomout::FeatureMap& scores, const NormalizedField& z,
                       std::span<const std::uint32_t> classes, int k, int k_bg,
                       SampleMode mode);

// u32 rank-2 tensor with rows (class, row, col, rank); background rows use
// class = num_classes.
Tensor to_tensor(const SampleSet& samples);

// Per-location MLP emitting (S(c), Sbar(c)) for every class as outputs
// 2c and 2c + 1.
struct LocalizerConfig {
  std::vector<int> hidden = {64};
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int epochs = 10;
  std::uint64_t seed = 0;
  LocalizationModel model = LocalizationModel::kGlobal;
};

struct LocalizerResult {
  learner::MlpModel model;
  std::vector<double> epoch_loss;
};

// present[n] lists the classes in image n. Each class trains on its
// positive images and an equal number of randomly drawn negatives, redrawn
// every epoch.
LocalizerResult train_localizer(const std::vector<NormalizedField>& fields,
                                const std::vector<std::vector<std::uint32_t>>& present,
                                int num_classes, const LocalizerConfig& cfg);

// Foreground scores as a C x H' x W' map, and the full per-class fields.
std::vector<ScoreField> localize(const learner::MlpModel& model, const NormalizedField& z);
zoomout::FeatureMap foreground_scores(const std::vector<ScoreField>& fields);

}  // namespace zok::weaksup
