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
#include <optional>
#include <span>
#include <vector>

#include "zok/core_io.hpp"

namespace zok::metrics {

// Rows are ground truth, columns prediction.
struct ConfusionMatrix {
  int num_classes = 0;
  std::vector<std::uint64_t> counts;

  explicit ConfusionMatrix(int c = 0)
      : num_classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}
  std::uint64_t at(int gt, int pred) const {
    return counts[static_cast<std::size_t>(gt) * num_classes + pred];
  }
  std::uint64_t row_sum(int c) const;
  std::uint64_t col_sum(int c) const;
  std::uint64_t total() const;
};

// Adds one image; gt pixels equal to `ignore` are skipped before the
// prediction is checked against C.
void accumulate(ConfusionMatrix& cm, std::span<const std::uint16_t> pred,
                std::span<const std::uint16_t> gt, std::uint16_t ignore);
ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, int num_classes);

// Undefined (nullopt) for classes with an empty union.
std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm);
// Means over defined classes; NaN when nothing is defined.
double mean_iou(const ConfusionMatrix& cm);
double pixel_accuracy(const ConfusionMatrix& cm);
double class_accuracy(const ConfusionMatrix& cm);

struct SegScores {
  std::vector<std::optional<double>> per_class_iou;
  double mean_iou = 0.0;
  double pixel_accuracy = 0.0;
  double class_accuracy = 0.0;
};

SegScores seg_scores(const ConfusionMatrix& cm);

// Modal non-ignore label of each superpixel (ties to the smallest label);
// `ignore` when a superpixel has no labeled pixel.
std::vector<std::uint16_t> majority_labels(const LabelMap& gt, const SuperpixelMap& sp);
LabelMap paint_labels(const SuperpixelMap& sp, std::span<const std::uint16_t> labels,
                      std::uint16_t ignore = kDefaultIgnoreLabel);
LabelMap oracle_labels(const LabelMap& gt, const SuperpixelMap& sp);

enum class RelDenominator { kPredicted, kGroundTruth };

struct DepthScores {
  double rmse_lin = 0.0;
  double rmse_log = 0.0;
  double abs_rel = 0.0;
  double sqr_rel = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
  std::size_t valid_pixels = 0;
};

// Pixels count when both depths are finite and positive. Relative errors
// divide by the predicted depth unless asked otherwise.
DepthScores depth_metrics(const DepthMap& pred, const DepthMap& gt,
                          RelDenominator denom = RelDenominator::kPredicted);

// Fraction of ground-truth boundary pixels (some 4-neighbor differs) with a
// segmentation boundary pixel within Chebyshev distance `tolerance`.
double boundary_recall(std::span<const std::uint32_t> gt, std::span<const std::uint32_t> seg,
                       int width, int height, int tolerance);

}  // namespace zok::metrics
