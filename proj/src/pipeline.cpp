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

#include "zok/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "zok/error.hpp"
#include "zok/parallel.hpp"

namespace zok::cli {

namespace {

class StageRunner {
 public:
  explicit StageRunner(Timings& timings) : timings_(timings) {}

  template <typename Fn>
  auto operator()(const std::string& stage, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      auto it = std::find_if(timings_.begin(), timings_.end(),
                             [&](const auto& t) { return t.first == stage; });
      if (it == timings_.end()) {
        timings_.emplace_back(stage, dt.count());
      } else {
        it->second += dt.count();
      }
    };
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        record();
      } else {
        auto out = fn();
        record();
        return out;
      }
    } catch (const Error& e) {
      throw Error(e.kind(), stage + ": " + e.what());
    } catch (const std::exception& e) {
      throw Error(ErrorKind::kValidation, stage + ": " + e.what());
    }
  }

 private:
  Timings& timings_;
};

int infer_num_classes(const Dataset& train, const Dataset& test) {
  int c = 0;
  for (const auto* set : {&train, &test}) {
    for (const auto& s : *set) {
      for (auto v : s.gt.data) {
        if (v != s.gt.ignore_value) c = std::max(c, static_cast<int>(v) + 1);
      }
    }
  }
  return c;
}

std::vector<std::uint32_t> argmax_rows(const Matrix& probs) {
  std::vector<std::uint32_t> out(probs.rows);
  for (std::size_t i = 0; i < probs.rows; ++i) {
    const auto r = probs.row(i);
    out[i] = static_cast<std::uint32_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

std::vector<std::uint16_t> narrow(std::span<const std::uint32_t> v) {
  return {v.begin(), v.end()};
}

struct SuperpixelView {
  LabImage lab;
  SuperpixelMap map;
  Matrix features;
};

std::vector<SuperpixelView> superpixel_views(const Dataset& data, const PipelineConfig& cfg,
                                             const std::vector<zoomout::RegionSpec>& levels) {
  std::vector<SuperpixelView> out(data.size());
  auto params = cfg.slic;
  params.threads = 1;
  parallel_for_chunks(data.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i].lab = rgb_to_lab(data[i].image);
      out[i].map = slic::run_slic(out[i].lab, params).map;
      out[i].features = zoomout::extract_features(out[i].lab, out[i].map, levels).features;
    }
  });
  return out;
}

Matrix stack_rows(const std::vector<const Matrix*>& parts) {
  std::size_t rows = 0, cols = parts.empty() ? 0 : parts.front()->cols;
  for (const auto* m : parts) {
    require(m->cols == cols, "feature dimensions differ between images");
    rows += m->rows;
  }
  Matrix out(rows, cols);
  std::size_t at = 0;
  for (const auto* m : parts) {
    std::copy(m->data.begin(), m->data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(at));
    at += m->data.size();
  }
  return out;
}

void score_all(PipelineResult& result, const Dataset& test,
               const std::vector<LabelMap>& unrefined, StageRunner& stage) {
  stage("eval", [&] {
    metrics::ConfusionMatrix before(result.num_classes);
    result.confusion = metrics::ConfusionMatrix(result.num_classes);
    for (std::size_t i = 0; i < test.size(); ++i) {
      metrics::accumulate(result.confusion, result.predictions[i].data, test[i].gt.data,
                          test[i].gt.ignore_value);
      metrics::accumulate(before, unrefined[i].data, test[i].gt.data, test[i].gt.ignore_value);
    }
    result.scores = metrics::seg_scores(result.confusion);
    result.unrefined = metrics::seg_scores(before);
  });
}

void run_oracle(PipelineResult& result, const Dataset& test, const PipelineConfig& cfg,
                StageRunner& stage) {
  auto params = cfg.slic;
  params.threads = cfg.threads;
  for (const auto& s : test) {
    const auto map = stage("slic", [&] { return slic::run_slic(s.image, params).map; });
    result.predictions.push_back(stage("predict", [&] { return metrics::oracle_labels(s.gt, map); }));
  }
  score_all(result, test, result.predictions, stage);
}

void run_full(PipelineResult& result, const Dataset& train, const Dataset& test,
              const PipelineConfig& cfg, StageRunner& stage) {
  const auto levels = stage("features", [&] { return zoomout::parse_levels(cfg.levels); });
  const auto train_views = stage("features", [&] { return superpixel_views(train, cfg, levels); });
  const auto test_views = stage("features", [&] { return superpixel_views(test, cfg, levels); });

  const auto model = stage("train", [&] {
    std::vector<const Matrix*> parts;
    std::vector<std::uint32_t> labels;
    std::vector<double> weights;
    for (std::size_t i = 0; i < train.size(); ++i) {
      parts.push_back(&train_views[i].features);
      LabelMap gt = train[i].gt;
      for (auto& v : gt.data) {
        if (v == gt.ignore_value) v = kDefaultIgnoreLabel;
      }
      gt.ignore_value = kDefaultIgnoreLabel;
      for (auto v : metrics::majority_labels(gt, train_views[i].map)) labels.push_back(v);
      for (auto n : superpixel_sizes(train_views[i].map)) weights.push_back(static_cast<double>(n));
    }
    auto tc = cfg.train;
    tc.seed = cfg.seed;
    return learner::train(stack_rows(parts), labels, weights, result.num_classes, tc).model;
  });

  std::vector<LabelMap> unrefined;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& view = test_views[i];
    const auto probs = stage("predict", [&] {
      return learner::predict_probabilities(model, view.features, cfg.threads);
    });
    auto painted = metrics::paint_labels(view.map, narrow(argmax_rows(probs)));
    unrefined.push_back(painted);
    if (cfg.crf) {
      painted = stage("crf", [&] {
        auto crf_model = crf::model_from_probabilities(probs);
        crf::add_image_kernels(crf_model, cfg.kernels);
        auto mf = cfg.mean_field;
        mf.threads = cfg.threads;
        const auto state =
            crf::mean_field_refine(crf_model, crf::superpixel_features(view.lab, view.map), mf);
        return metrics::paint_labels(view.map, narrow(crf::map_labels(state)));
      });
    }
    result.predictions.push_back(std::move(painted));
  }
  result.model = model;
  result.refined = cfg.crf;
  score_all(result, test, unrefined, stage);
}

void run_weak(PipelineResult& result, const Dataset& train, const Dataset& test,
              const PipelineConfig& cfg, StageRunner& stage) {
  const int fg_classes = result.num_classes - 1;
  require(fg_classes >= 1, "weak mode needs a background and at least one foreground class");

  auto raw_fields = [&](const Dataset& data) {
    std::vector<zoomout::FeatureMap> out(data.size());
    parallel_for_chunks(data.size(), cfg.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) out[i] = cell_features(rgb_to_lab(data[i].image), cfg.cell);
    });
    return out;
  };
  const auto normalized = stage("features", [&] { return weaksup::normalize_features(raw_fields(train)); });
  const auto test_fields = stage("features", [&] {
    std::vector<weaksup::NormalizedField> out;
    for (const auto& raw : raw_fields(test)) out.push_back(weaksup::normalize_field(raw, normalized.stats));
    return out;
  });

  std::vector<std::vector<std::uint32_t>> present(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    for (auto t : train[i].tags) {
      if (t >= 1) {
        require(t < static_cast<std::uint32_t>(result.num_classes), "image tag outside class range");
        present[i].push_back(t - 1);
      }
    }
  }

  const auto localizer = stage("localize", [&] {
    auto lc = cfg.localizer;
    lc.seed = cfg.seed;
    return weaksup::train_localizer(normalized.fields, present, fg_classes, lc).model;
  });

  const auto dims = static_cast<std::size_t>(normalized.fields.front().dims);
  Matrix points(0, dims);
  std::vector<std::uint32_t> labels;
  stage("sample", [&] {
    auto add = [&](const weaksup::NormalizedField& z, std::uint32_t loc, std::uint32_t label) {
      const auto row = z.at(loc);
      points.data.insert(points.data.end(), row.begin(), row.end());
      ++points.rows;
      labels.push_back(label);
    };
    for (std::size_t i = 0; i < train.size(); ++i) {
      if (present[i].empty()) continue;
      const auto& z = normalized.fields[i];
      const auto scores = sampling_scores(weaksup::localize(localizer, z), cfg.sample_score);
      const auto samples = weaksup::sample_image(scores, z, present[i], cfg.k, cfg.k_bg, cfg.sample_mode);
      for (std::size_t c = 0; c < samples.fg.size(); ++c) {
        for (auto loc : samples.fg[c]) add(z, loc, static_cast<std::uint32_t>(c + 1));
      }
      for (auto loc : samples.bg) add(z, loc, 0);
    }
    require(points.rows > 0, "no points were sampled");
  });

  const auto model = stage("train", [&] {
    auto tc = cfg.train;
    tc.seed = cfg.seed;
    return learner::train(points, labels, {}, result.num_classes, tc).model;
  });

  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto& z = test_fields[i];
    result.predictions.push_back(stage("predict", [&] {
      Matrix x(z.size(), dims);
      std::copy(z.z.begin(), z.z.end(), x.data.begin());
      const auto cells = learner::predict_labels(model, x, cfg.threads);
      return paint_cells(cells, test[i].image.width, test[i].image.height, cfg.cell);
    }));
  }
  result.model = model;
  score_all(result, test, result.predictions, stage);
}

}  // namespace

PipelineMode parse_pipeline_mode(const std::string& text) {
  if (text == "full") return PipelineMode::kFull;
  if (text == "oracle") return PipelineMode::kOracle;
  if (text == "weak") return PipelineMode::kWeak;
  fail("unknown pipeline mode '" + text + "' (expected full, oracle or weak)");
}

SampleScore parse_sample_score(const std::string& text) {
  if (text == "raw") return SampleScore::kRaw;
  if (text == "posterior") return SampleScore::kPosterior;
  fail("unknown sample score '" + text + "' (expected raw or posterior)");
}

zoomout::FeatureMap sampling_scores(const std::vector<weaksup::ScoreField>& fields,
                                    SampleScore kind) {
  auto fm = weaksup::foreground_scores(fields);
  if (kind == SampleScore::kPosterior) {
    const std::size_t hw = fields.front().size();
    for (std::size_t c = 0; c < fields.size(); ++c) {
      for (std::size_t i = 0; i < hw; ++i) {
        fm.data[c * hw + i] = static_cast<float>(1.0 / (1.0 + std::exp(fields[c].bg[i] - fields[c].fg[i])));
      }
    }
  }
  return fm;
}

void PipelineConfig::validate() const {
  require(num_classes >= 0, "class count must be >= 0");
  require(threads >= 1, "threads must be >= 1");
  require(slic.k >= 1 && slic.m > 0 && slic.max_iters >= 1, "invalid SLIC parameters");
  train.validate();
  require(mean_field.iterations >= 1, "CRF iterations must be >= 1");
  require(mean_field.damping >= 0 && mean_field.damping < 1, "CRF damping must lie in [0, 1)");
  require(cell >= 1, "cell size must be >= 1");
  require(k >= 1 && k_bg >= 0, "sample counts must be positive");
}

zoomout::FeatureMap cell_features(const LabImage& lab, int cell) {
  require(cell >= 1, "cell size must be >= 1");
  const int gh = (lab.height + cell - 1) / cell, gw = (lab.width + cell - 1) / cell;
  zoomout::FeatureMap mean;
  mean.channels = 3;
  mean.height = gh;
  mean.width = gw;
  mean.data.assign(static_cast<std::size_t>(3) * gh * gw, 0.0f);
  std::vector<int> count(static_cast<std::size_t>(gh) * gw, 0);
  for (int y = 0; y < lab.height; ++y) {
    for (int x = 0; x < lab.width; ++x) {
      const int cy = y / cell, cx = x / cell;
      for (int c = 0; c < 3; ++c) mean.at(c, cy, cx) += lab.pixel(x, y)[c];
      ++count[static_cast<std::size_t>(cy) * gw + cx];
    }
  }
  for (int c = 0; c < 3; ++c) {
    for (int cy = 0; cy < gh; ++cy) {
      for (int cx = 0; cx < gw; ++cx) mean.at(c, cy, cx) /= static_cast<float>(count[cy * gw + cx]);
    }
  }
  zoomout::FeatureMap out;
  out.channels = 6;
  out.height = gh;
  out.width = gw;
  out.data.assign(static_cast<std::size_t>(6) * gh * gw, 0.0f);
  for (int cy = 0; cy < gh; ++cy) {
    for (int cx = 0; cx < gw; ++cx) {
      int n = 0;
      float sum[3] = {0, 0, 0};
      for (int y = std::max(0, cy - 1); y <= std::min(gh - 1, cy + 1); ++y) {
        for (int x = std::max(0, cx - 1); x <= std::min(gw - 1, cx + 1); ++x) {
          for (int c = 0; c < 3; ++c) sum[c] += mean.at(c, y, x);
          ++n;
        }
      }
      for (int c = 0; c < 3; ++c) {
        out.at(c, cy, cx) = mean.at(c, cy, cx);
        out.at(3 + c, cy, cx) = sum[c] / static_cast<float>(n);
      }
    }
  }
  return out;
}

LabelMap paint_cells(std::span<const std::uint32_t> labels, int width, int height, int cell) {
  const int gw = (width + cell - 1) / cell, gh = (height + cell - 1) / cell;
  require(labels.size() == static_cast<std::size_t>(gw) * gh, "cell label count mismatch");
  LabelMap out;
  out.width = width;
  out.height = height;
  out.data.resize(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      out.data[static_cast<std::size_t>(y) * width + x] =
          static_cast<std::uint16_t>(labels[static_cast<std::size_t>(y / cell) * gw + x / cell]);
    }
  }
  return out;
}

PipelineResult pipeline_run(const Dataset& train, const Dataset& test, const PipelineConfig& cfg) {
  PipelineResult result;
  StageRunner stage(result.timings);
  stage("config", [&] {
    cfg.validate();
    require(!test.empty(), "test set is empty");
    if (cfg.mode != PipelineMode::kOracle) require(!train.empty(), "training set is empty");
    result.num_classes = cfg.num_classes > 0 ? cfg.num_classes : infer_num_classes(train, test);
    require(result.num_classes >= 1, "no labeled pixels to infer the class count from");
  });
  switch (cfg.mode) {
    case PipelineMode::kOracle:
      run_oracle(result, test, cfg, stage);
      break;
    case PipelineMode::kFull:
      run_full(result, train, test, cfg, stage);
      break;
    case PipelineMode::kWeak:
      run_weak(result, train, test, cfg, stage);
      break;
  }
  return result;
}

nlohmann::json pipeline_report(const PipelineResult& result, bool with_timings) {
  auto report = seg_report_json(result.scores, with_timings ? result.timings : Timings{});
  if (result.refined) {
    report["mIoU_unrefined"] = report_number(result.unrefined.mean_iou);
  }
  return report;
}

}  // namespace zok::cli
