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

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "zok/crf.hpp"
#include "zok/learner.hpp"
#include "zok/metrics.hpp"
#include "zok/report.hpp"
#include "zok/slic.hpp"
#include "zok/synth.hpp"
#include "zok/weaksup.hpp"
#include "zok/zoomout.hpp"

namespace zok::cli {

// kFull: superpixel classifier trained on majority-vote labels.
// kOracle: majority-vote labels painted directly, no learning.
// kWeak: classifier trained on points sampled from localization maps
// learned from image-level tags only; class 0 is background.
enum class PipelineMode { kFull, kOracle, kWeak };

// Score map handed to the point sampler: the raw foreground score or the
// per-location foreground posterior sigmoid(fg - bg).
enum class SampleScore { kRaw, kPosterior };

SampleScore parse_sample_score(const std::string& text);

PipelineMode parse_pipeline_mode(const std::string& text);

struct PipelineConfig {
  PipelineMode mode = PipelineMode::kFull;
  int num_classes = 0;  // 0 infers max label + 1 from the data
  std::uint64_t seed = 0;
  int threads = 1;

  slic::SlicParams slic;
  std::string levels = "local,proximal:2";
  learner::TrainConfig train;

  bool crf = false;
  crf::MeanFieldConfig mean_field;
  crf::ImageKernelParams kernels;

  // Weak mode works on a grid of cell x cell pixel blocks.
  int cell = 4;
  int k = 20;
  int k_bg = 20;
  weaksup::SampleMode sample_mode = weaksup::SampleMode::kDiverse;
  SampleScore sample_score = SampleScore::kRaw;
  weaksup::LocalizerConfig localizer;

  void validate() const;
};

struct PipelineResult {
  int num_classes = 0;
  metrics::ConfusionMatrix confusion;
  metrics::SegScores scores;
  // Scores before CRF refinement; equal to `scores` without CRF.
  metrics::SegScores unrefined;
  bool refined = false;
  std::vector<LabelMap> predictions;  // one per test image
  std::optional<learner::MlpModel> model;
  Timings timings;
};

// Failures are rethrown with the failing stage prefixed to the message.
PipelineResult pipeline_run(const Dataset& train, const Dataset& test, const PipelineConfig& cfg);

nlohmann::json pipeline_report(const PipelineResult& result, bool with_timings = true);

// Weak-mode location features: mean Lab of each cell and of its 3x3 cell
// neighborhood (6 x ceil(H/cell) x ceil(W/cell)).
zoomout::FeatureMap cell_features(const LabImage& lab, int cell);

zoomout::FeatureMap sampling_scores(const std::vector<weaksup::ScoreField>& fields,
                                    SampleScore kind);

// Expands per-cell labels to pixels.
LabelMap paint_cells(std::span<const std::uint32_t> labels, int width, int height, int cell);

}  // namespace zok::cli
