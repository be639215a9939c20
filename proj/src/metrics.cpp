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

#include "zok/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "zok/error.hpp"

namespace zok::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::uint8_t> boundary_mask(std::span<const std::uint32_t> ids, int w, int h) {
  std::vector<std::uint8_t> mask(ids.size(), 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (x + 1 < w && ids[i] != ids[i + 1]) mask[i] = mask[i + 1] = 1;
      if (y + 1 < h && ids[i] != ids[i + w]) mask[i] = mask[i + w] = 1;
    }
  }
  return mask;
}

}  // namespace

std::uint64_t ConfusionMatrix::row_sum(int c) const {
  std::uint64_t s = 0;
  for (int p = 0; p < num_classes; ++p) s += at(c, p);
  return s;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const {
  std::uint64_t s = 0;
  for (int g = 0; g < num_classes; ++g) s += at(g, c);
  return s;
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t s = 0;
  for (auto v : counts) s += v;
  return s;
}

void accumulate(ConfusionMatrix& cm, std::span<const std::uint16_t> pred,
                std::span<const std::uint16_t> gt, std::uint16_t ignore) {
  require(pred.size() == gt.size(), "prediction and ground truth differ in size");
  const auto c = static_cast<std::uint32_t>(cm.num_classes);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore) continue;
    if (gt[i] >= c) fail("ground-truth label " + std::to_string(gt[i]) + " >= class count");
    if (pred[i] >= c) fail("predicted label " + std::to_string(pred[i]) + " >= class count");
    ++cm.counts[static_cast<std::size_t>(gt[i]) * c + pred[i]];
  }
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt, int num_classes) {
  require(num_classes >= 1, "class count must be >= 1");
  require(pred.width == gt.width && pred.height == gt.height,
          "prediction and ground truth differ in shape");
  ConfusionMatrix cm(num_classes);
  accumulate(cm, pred.data, gt.data, gt.ignore_value);
  return cm;
}

std::vector<std::optional<double>> iou_per_class(const ConfusionMatrix& cm) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(cm.num_classes));
  for (int c = 0; c < cm.num_classes; ++c) {
    const double inter = static_cast<double>(cm.at(c, c));
    const double uni = static_cast<double>(cm.row_sum(c) + cm.col_sum(c)) - inter;
    if (uni > 0) out[c] = inter / uni;
  }
  return out;
}

double mean_iou(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : iou_per_class(cm)) {
    if (v) {
      sum += *v;
      ++n;
    }
  }
  return n ? sum / n : kNaN;
}

double pixel_accuracy(const ConfusionMatrix& cm) {
  const auto total = cm.total();
  if (total == 0) return kNaN;
  std::uint64_t diag = 0;
  for (int c = 0; c < cm.num_classes; ++c) diag += cm.at(c, c);
  return static_cast<double>(diag) / static_cast<double>(total);
}

double class_accuracy(const ConfusionMatrix& cm) {
  double sum = 0.0;
  int n = 0;
  for (int c = 0; c < cm.num_classes; ++c) {
    const auto row = cm.row_sum(c);
    if (row == 0) continue;
    sum += static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
    ++n;
  }
  return n ? sum / n : kNaN;
}

SegScores seg_scores(const ConfusionMatrix& cm) {
  SegScores s;
  s.per_class_iou = iou_per_class(cm);
  s.mean_iou = mean_iou(cm);
  s.pixel_accuracy = pixel_accuracy(cm);
  s.class_accuracy = class_accuracy(cm);
  return s;
}

std::vector<std::uint16_t> majority_labels(const LabelMap& gt, const SuperpixelMap& sp) {
  require(gt.width == sp.width && gt.height == sp.height,
          "ground truth and superpixel map differ in shape");
  std::uint32_t max_label = 0;
  for (auto v : gt.data) {
    if (v != gt.ignore_value) max_label = std::max<std::uint32_t>(max_label, v);
  }
  const std::size_t bins = max_label + 1;
  std::vector<std::uint32_t> hist(static_cast<std::size_t>(sp.count) * bins, 0);
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    if (gt.data[i] == gt.ignore_value) continue;
    ++hist[sp.ids[i] * bins + gt.data[i]];
  }
  std::vector<std::uint16_t> out(sp.count, gt.ignore_value);
  for (std::uint32_t s = 0; s < sp.count; ++s) {
    std::uint32_t best = 0;
    for (std::size_t l = 0; l < bins; ++l) {
      if (hist[s * bins + l] > best) {
        best = hist[s * bins + l];
        out[s] = static_cast<std::uint16_t>(l);
      }
    }
  }
  return out;
}

LabelMap paint_labels(const SuperpixelMap& sp, std::span<const std::uint16_t> labels,
                      std::uint16_t ignore) {
  require(labels.size() == sp.count, "one label per superpixel required");
  LabelMap out;
  out.width = sp.width;
  out.height = sp.height;
  out.ignore_value = ignore;
  out.data.resize(sp.ids.size());
  for (std::size_t i = 0; i < sp.ids.size(); ++i) out.data[i] = labels[sp.ids[i]];
  return out;
}

LabelMap oracle_labels(const LabelMap& gt, const SuperpixelMap& sp) {
  return paint_labels(sp, majority_labels(gt, sp), gt.ignore_value);
}

DepthScores depth_metrics(const DepthMap& pred, const DepthMap& gt, RelDenominator denom) {
  require(pred.width == gt.width && pred.height == gt.height,
          "predicted and ground-truth depth differ in shape");
  require(pred.data.size() == gt.data.size(), "depth maps differ in size");
  DepthScores s;
  double se = 0, sle = 0, ar = 0, sr = 0;
  std::size_t d1 = 0, d2 = 0, d3 = 0, n = 0;
  for (std::size_t i = 0; i < gt.data.size(); ++i) {
    const double yh = pred.data[i], y = gt.data[i];
    if (!(std::isfinite(yh) && std::isfinite(y) && yh > 0 && y > 0)) continue;
    ++n;
    const double diff = y - yh;
    se += diff * diff;
    const double ld = std::log(y) - std::log(yh);
    sle += ld * ld;
    const double den = denom == RelDenominator::kPredicted ? yh : y;
    ar += std::abs(diff) / den;
    sr += diff * diff / den;
    const double ratio = std::max(y / yh, yh / y);
    d1 += ratio < 1.25;
    d2 += ratio < 1.25 * 1.25;
    d3 += ratio < 1.25 * 1.25 * 1.25;
  }
  if (n == 0) fail("no valid depth pixels to evaluate");
  const double nn = static_cast<double>(n);
  s.rmse_lin = std::sqrt(se / nn);
  s.rmse_log = std::sqrt(sle / nn);
  s.abs_rel = ar / nn;
  s.sqr_rel = sr / nn;
  s.delta1 = static_cast<double>(d1) / nn;
  s.delta2 = static_cast<double>(d2) / nn;
  s.delta3 = static_cast<double>(d3) / nn;
  s.valid_pixels = n;
  return s;
}

double boundary_recall(std::span<const std::uint32_t> gt, std::span<const std::uint32_t> seg,
                       int width, int height, int tolerance) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  require(gt.size() == n && seg.size() == n, "boundary maps differ in shape");
  require(tolerance >= 0, "tolerance must be >= 0");
  const auto gb = boundary_mask(gt, width, height);
  const auto sb = boundary_mask(seg, width, height);
  std::size_t total = 0, hit = 0;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (!gb[static_cast<std::size_t>(y) * width + x]) continue;
      ++total;
      bool found = false;
      for (int dy = -tolerance; dy <= tolerance && !found; ++dy) {
        for (int dx = -tolerance; dx <= tolerance && !found; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= width || yy >= height) continue;
          found = sb[static_cast<std::size_t>(yy) * width + xx] != 0;
        }
      }
      hit += found;
    }
  }
  return total ? static_cast<double>(hit) / static_cast<double>(total) : 1.0;
}

}  // namespace zok::metrics
