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

#include "zok/weaksup.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "zok/error.hpp"
#include "zok/random.hpp"

namespace zok::weaksup {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

std::size_t margin_argmax(const ScoreField& f) {
  std::size_t best = 0;
  double best_d = f.fg[0] - f.bg[0];
  for (std::size_t i = 1; i < f.size(); ++i) {
    const double d = f.fg[i] - f.bg[i];
    if (d > best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

void check_field(const ScoreField& f) {
  require(f.size() > 0, "empty score field");
  require(f.fg.size() == f.bg.size() &&
              f.fg.size() == static_cast<std::size_t>(f.height) * f.width,
          "score field shape mismatch");
}

// Shared greedy loop: score * (1 - max similarity to earlier picks), with the
// first pick the plain argmax. Candidates after the first need a positive
// score unless none is left.
template <typename Similarity>
std::vector<std::uint32_t> greedy_diverse(std::span<const double> scores,
                                          std::span<const std::uint8_t> valid, int k,
                                          Similarity&& sim) {
  const std::size_t n = scores.size();
  require(k >= 1, "k must be >= 1");
  if (static_cast<std::size_t>(k) > n) {
    fail("k = " + std::to_string(k) + " exceeds grid size " + std::to_string(n));
  }
  std::vector<std::uint8_t> open(n, 1);
  if (!valid.empty()) {
    for (std::size_t i = 0; i < n; ++i) open[i] = valid[i];
  }
  std::vector<double> max_sim(n, 0.0);
  std::vector<std::uint32_t> picks;
  while (picks.size() < static_cast<std::size_t>(k)) {
    std::ptrdiff_t best = -1;
    double best_value = 0.0;
    if (!picks.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!open[i] || !(scores[i] > 0.0)) continue;
        const double value = scores[i] * (1.0 - max_sim[i]);
        if (best < 0 || value > best_value) {
          best = static_cast<std::ptrdiff_t>(i);
          best_value = value;
        }
      }
    }
    if (best < 0) {
      for (std::size_t i = 0; i < n; ++i) {
        if (!open[i]) continue;
        if (best < 0 || scores[i] > best_value) {
          best = static_cast<std::ptrdiff_t>(i);
          best_value = scores[i];
        }
      }
    }
    if (best < 0) break;
    const auto b = static_cast<std::size_t>(best);
    picks.push_back(static_cast<std::uint32_t>(b));
    open[b] = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (open[i]) max_sim[i] = std::max(max_sim[i], sim(i, b));
    }
  }
  return picks;
}

}  // namespace

double pixel_softmax_prob(const ScoreField& field) {
  check_field(field);
  const std::size_t i = margin_argmax(field);
  return sigmoid(field.fg[i] - field.bg[i]);
}

double global_softmax_prob(const ScoreField& field) {
  check_field(field);
  const double s = *std::max_element(field.fg.begin(), field.fg.end());
  const double sb = *std::max_element(field.bg.begin(), field.bg.end());
  return sigmoid(s - sb);
}

double class_prob(const ScoreField& field, LocalizationModel model) {
  return model == LocalizationModel::kPixel ? pixel_softmax_prob(field)
                                            : global_softmax_prob(field);
}

ImageLossGrad image_loss_and_grad(const ScoreField& field, bool present,
                                  LocalizationModel model) {
  check_field(field);
  ImageLossGrad out;
  out.d_fg.assign(field.size(), 0.0);
  out.d_bg.assign(field.size(), 0.0);
  std::size_t i_fg, i_bg;
  if (model == LocalizationModel::kPixel) {
    i_fg = i_bg = margin_argmax(field);
  } else {
    i_fg = argmax(field.fg);
    i_bg = argmax(field.bg);
  }
  const double margin = field.fg[i_fg] - field.bg[i_bg];
  const double p = sigmoid(margin);
  // d loss / d margin: p - 1 when present, p when absent.
  out.loss = present ? softplus(-margin) : softplus(margin);
  const double g = present ? p - 1.0 : p;
  out.d_fg[i_fg] += g;
  out.d_bg[i_bg] -= g;
  return out;
}

double NormalizedField::dot(std::size_t i, std::size_t j) const {
  const float* a = z.data() + i * static_cast<std::size_t>(dims);
  const float* b = z.data() + j * static_cast<std::size_t>(dims);
  double acc = 0.0;
  for (int d = 0; d < dims; ++d) acc += static_cast<double>(a[d]) * b[d];
  return acc;
}

StandardizationStats fit_standardization(const std::vector<zoomout::FeatureMap>& fields) {
  require(!fields.empty(), "no feature fields to standardize");
  const int dims = fields.front().channels;
  StandardizationStats stats;
  stats.mean.assign(static_cast<std::size_t>(dims), 0.0);
  stats.stddev.assign(static_cast<std::size_t>(dims), 0.0);
  double count = 0.0;
  for (const auto& f : fields) {
    require(f.channels == dims, "feature fields differ in dimension");
    const std::size_t hw = static_cast<std::size_t>(f.height) * f.width;
    for (int d = 0; d < dims; ++d) {
      for (std::size_t i = 0; i < hw; ++i) stats.mean[d] += f.data[d * hw + i];
    }
    count += static_cast<double>(hw);
  }
  require(count > 0, "feature fields are empty");
  for (auto& m : stats.mean) m /= count;
  for (const auto& f : fields) {
    const std::size_t hw = static_cast<std::size_t>(f.height) * f.width;
    for (int d = 0; d < dims; ++d) {
      for (std::size_t i = 0; i < hw; ++i) {
        const double v = f.data[d * hw + i] - stats.mean[d];
        stats.stddev[d] += v * v;
      }
    }
  }
  for (auto& s : stats.stddev) s = std::max(kStdEpsilon, std::sqrt(s / count));
  return stats;
}

NormalizedField normalize_field(const zoomout::FeatureMap& raw,
                                const StandardizationStats& stats) {
  require(static_cast<std::size_t>(raw.channels) == stats.mean.size(),
          "feature dimension does not match normalization stats");
  NormalizedField out;
  out.height = raw.height;
  out.width = raw.width;
  out.dims = raw.channels;
  const std::size_t hw = static_cast<std::size_t>(raw.height) * raw.width;
  const std::size_t dims = static_cast<std::size_t>(raw.channels);
  out.z.assign(hw * dims, 0.0f);
  out.valid.assign(hw, 0);
  std::vector<double> v(dims);
  for (std::size_t i = 0; i < hw; ++i) {
    double norm = 0.0;
    for (std::size_t d = 0; d < dims; ++d) {
      v[d] = (raw.data[d * hw + i] - stats.mean[d]) / stats.stddev[d];
      norm += v[d] * v[d];
    }
    norm = std::sqrt(norm);
    if (!(norm > 1e-12)) continue;
    out.valid[i] = 1;
    for (std::size_t d = 0; d < dims; ++d) out.z[i * dims + d] = static_cast<float>(v[d] / norm);
  }
  return out;
}

NormalizedSet normalize_features(const std::vector<zoomout::FeatureMap>& fields) {
  NormalizedSet out;
  out.stats = fit_standardization(fields);
  for (const auto& f : fields) out.fields.push_back(normalize_field(f, out.stats));
  return out;
}

std::vector<std::uint32_t> diverse_sample_fg(std::span<const double> scores,
                                             const NormalizedField& z, int k) {
  require(scores.size() == z.size(), "scores and feature field differ in size");
  return greedy_diverse(scores, z.valid, k,
                        [&](std::size_t i, std::size_t j) { return std::abs(z.dot(i, j)); });
}

std::vector<std::uint32_t> diverse_sample_bg(const NormalizedField& z,
                                             std::span<const std::uint32_t> fg, int k_bg) {
  require(!fg.empty(), "background sampling needs foreground picks");
  require(k_bg >= 0, "k_bg must be >= 0");
  const std::size_t n = z.size();
  std::vector<std::uint8_t> open(z.valid);
  std::vector<double> objective(n, 0.0);
  auto absorb = [&](std::size_t p) {
    open[p] = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (open[i]) objective[i] = std::max(objective[i], std::abs(z.dot(i, p)));
    }
  };
  for (auto p : fg) {
    require(p < n, "foreground pick out of range");
    absorb(p);
  }
  std::vector<std::uint32_t> picks;
  while (picks.size() < static_cast<std::size_t>(k_bg)) {
    std::ptrdiff_t best = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (open[i] && (best < 0 || objective[i] < objective[best])) {
        best = static_cast<std::ptrdiff_t>(i);
      }
    }
    if (best < 0) break;
    picks.push_back(static_cast<std::uint32_t>(best));
    absorb(static_cast<std::size_t>(best));
  }
  return picks;
}

std::vector<std::uint32_t> topk_sample(std::span<const double> scores, int k) {
  require(k >= 1, "k must be >= 1");
  if (static_cast<std::size_t>(k) > scores.size()) {
    fail("k = " + std::to_string(k) + " exceeds grid size " + std::to_string(scores.size()));
  }
  std::vector<std::uint32_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return scores[a] > scores[b]; });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

std::vector<std::uint32_t> spatial_diverse_sample(std::span<const double> scores, int height,
                                                  int width, int k) {
  require(scores.size() == static_cast<std::size_t>(height) * width,
          "scores do not match grid shape");
  const double diag = std::hypot(height - 1, width - 1);
  auto sim = [&](std::size_t i, std::size_t j) {
    if (diag == 0.0) return 1.0;
    const double dy = static_cast<double>(i / width) - static_cast<double>(j / width);
    const double dx = static_cast<double>(i % width) - static_cast<double>(j % width);
    return 1.0 - std::hypot(dx, dy) / diag;
  };
  return greedy_diverse(scores, {}, k, sim);
}

SampleMode parse_sample_mode(const std::string& text) {
  if (text == "diverse") return SampleMode::kDiverse;
  if (text == "topk") return SampleMode::kTopK;
  if (text == "spatial") return SampleMode::kSpatial;
  fail("unknown sampling mode '" + text + "' (expected diverse, topk or spatial)");
}

SampleSet sample_image(const zoomout::FeatureMap& scores, const NormalizedField& z,
                       std::span<const std::uint32_t> classes, int k, int k_bg,
                       SampleMode mode) {
  require(scores.height == z.height && scores.width == z.width,
          "score map and feature field differ in shape");
  SampleSet out;
  out.height = z.height;
  out.width = z.width;
  out.num_classes = scores.channels;
  out.fg.resize(static_cast<std::size_t>(scores.channels));
  const std::size_t hw = z.size();
  std::vector<std::uint32_t> all_fg;
  for (auto c : classes) {
    require(c < static_cast<std::uint32_t>(scores.channels), "class outside score map");
    const std::span<const float> raw(scores.data.data() + c * hw, hw);
    const std::vector<double> s(raw.begin(), raw.end());
    std::vector<std::uint32_t> picks;
    switch (mode) {
      case SampleMode::kDiverse:
        picks = diverse_sample_fg(s, z, k);
        break;
      case SampleMode::kTopK:
        picks = topk_sample(s, k);
        break;
      case SampleMode::kSpatial:
        picks = spatial_diverse_sample(s, z.height, z.width, k);
        break;
    }
    all_fg.insert(all_fg.end(), picks.begin(), picks.end());
    out.fg[c] = std::move(picks);
  }
  if (!all_fg.empty()) {
    std::sort(all_fg.begin(), all_fg.end());
    all_fg.erase(std::unique(all_fg.begin(), all_fg.end()), all_fg.end());
    out.bg = diverse_sample_bg(z, all_fg, k_bg);
  }
  return out;
}

Tensor to_tensor(const SampleSet& samples) {
  std::vector<std::uint32_t> rows;
  const auto w = static_cast<std::uint32_t>(samples.width);
  auto emit = [&](std::uint32_t cls, const std::vector<std::uint32_t>& picks) {
    for (std::size_t r = 0; r < picks.size(); ++r) {
      rows.insert(rows.end(), {cls, picks[r] / w, picks[r] % w, static_cast<std::uint32_t>(r)});
    }
  };
  for (std::size_t c = 0; c < samples.fg.size(); ++c) {
    emit(static_cast<std::uint32_t>(c), samples.fg[c]);
  }
  emit(static_cast<std::uint32_t>(samples.num_classes), samples.bg);
  const auto n = static_cast<std::uint32_t>(rows.size() / 4);
  if (n == 0) fail("sample set is empty");
  return Tensor::u32({n, 4}, std::move(rows));
}

LocalizerResult train_localizer(const std::vector<NormalizedField>& fields,
                                const std::vector<std::vector<std::uint32_t>>& present,
                                int num_classes, const LocalizerConfig& cfg) {
  require(!fields.empty(), "no training fields");
  require(fields.size() == present.size(), "one class list per field required");
  require(num_classes >= 1, "number of classes must be positive");
  const int dims = fields.front().dims;
  for (const auto& f : fields) require(f.dims == dims, "feature fields differ in dimension");

  learner::TrainConfig step_cfg;
  step_cfg.learning_rate = cfg.learning_rate;
  step_cfg.momentum = cfg.momentum;
  step_cfg.weight_decay = cfg.weight_decay;
  step_cfg.validate();

  Rng rng(cfg.seed);
  LocalizerResult result;
  result.model = learner::init_model(dims, cfg.hidden, 2 * num_classes, rng);
  auto velocity = learner::Gradients::zeros_like(result.model);

  std::vector<std::vector<std::size_t>> pos(num_classes), neg(num_classes);
  for (std::size_t n = 0; n < fields.size(); ++n) {
    std::vector<std::uint8_t> has(static_cast<std::size_t>(num_classes), 0);
    for (auto c : present[n]) {
      require(c < static_cast<std::uint32_t>(num_classes), "image label out of range");
      has[c] = 1;
    }
    for (int c = 0; c < num_classes; ++c) (has[c] ? pos[c] : neg[c]).push_back(n);
  }

  std::vector<std::size_t> order(fields.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // image -> (class, present) tasks for this epoch.
    std::vector<std::vector<std::pair<int, bool>>> tasks(fields.size());
    for (int c = 0; c < num_classes; ++c) {
      for (auto n : pos[c]) tasks[n].push_back({c, true});
      auto pool = neg[c];
      rng.shuffle(std::span<std::size_t>(pool));
      pool.resize(std::min(pool.size(), pos[c].size()));
      for (auto n : pool) tasks[n].push_back({c, false});
    }
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t count = 0;
    for (auto n : order) {
      if (tasks[n].empty()) continue;
      const auto& z = fields[n];
      std::vector<learner::ForwardTrace> traces;
      traces.reserve(z.size());
      for (std::size_t i = 0; i < z.size(); ++i) {
        traces.push_back(learner::forward_trace(result.model, z.at(i)));
      }
      std::map<std::size_t, std::vector<double>> dlogits;
      const double scale = 1.0 / static_cast<double>(tasks[n].size());
      for (auto [c, is_present] : tasks[n]) {
        ScoreField field(z.height, z.width);
        for (std::size_t i = 0; i < z.size(); ++i) {
          field.fg[i] = traces[i].logits()[2 * c];
          field.bg[i] = traces[i].logits()[2 * c + 1];
        }
        const auto lg = image_loss_and_grad(field, is_present, cfg.model);
        total += lg.loss;
        ++count;
        for (std::size_t i = 0; i < z.size(); ++i) {
          if (lg.d_fg[i] == 0.0 && lg.d_bg[i] == 0.0) continue;
          auto& d = dlogits[i];
          if (d.empty()) d.assign(static_cast<std::size_t>(2 * num_classes), 0.0);
          d[2 * c] += scale * lg.d_fg[i];
          d[2 * c + 1] += scale * lg.d_bg[i];
        }
      }
      auto grads = learner::Gradients::zeros_like(result.model);
      for (const auto& [i, d] : dlogits) learner::backward(result.model, traces[i], d, grads);
      learner::sgd_step(result.model, grads, velocity, step_cfg);
    }
    result.epoch_loss.push_back(count ? total / static_cast<double>(count) : 0.0);
  }
  return result;
}

std::vector<ScoreField> localize(const learner::MlpModel& model, const NormalizedField& z) {
  require(model.num_classes % 2 == 0, "localizer must emit two scores per class");
  const int classes = model.num_classes / 2;
  std::vector<ScoreField> out(static_cast<std::size_t>(classes), ScoreField(z.height, z.width));
  for (std::size_t i = 0; i < z.size(); ++i) {
    const auto trace = learner::forward_trace(model, z.at(i));
    const auto logits = trace.logits();
    for (int c = 0; c < classes; ++c) {
      out[c].fg[i] = logits[2 * c];
      out[c].bg[i] = logits[2 * c + 1];
    }
  }
  return out;
}

zoomout::FeatureMap foreground_scores(const std::vector<ScoreField>& fields) {
  require(!fields.empty(), "no score fields");
  zoomout::FeatureMap fm;
  fm.channels = static_cast<int>(fields.size());
  fm.height = fields.front().height;
  fm.width = fields.front().width;
  const std::size_t hw = fields.front().size();
  fm.data.resize(fields.size() * hw);
  for (std::size_t c = 0; c < fields.size(); ++c) {
    require(fields[c].size() == hw, "score fields differ in shape");
    for (std::size_t i = 0; i < hw; ++i) fm.data[c * hw + i] = static_cast<float>(fields[c].fg[i]);
  }
  return fm;
}

}  // namespace zok::weaksup
