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

#include "zok/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "zok/error.hpp"
#include "zok/parallel.hpp"

namespace zok::learner {

namespace {

constexpr double kProbFloor = 1e-12;

class ByteWriter {
 public:
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void f32s(const std::vector<float>& values) {
    for (float v : values) f32(v);
  }
  void raw(const char* s, std::size_t n) { bytes_.insert(bytes_.end(), s, s + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::vector<float> f32s(std::size_t n) {
    need(4 * n);
    std::vector<float> out(n);
    for (auto& v : out) v = f32();
    return out;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail("truncated model file");
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void check_label(std::uint32_t y, const ClassFrequencies& freq) {
  if (y >= freq.f.size()) fail("label " + std::to_string(y) + " out of range");
  if (freq.f[y] <= 0.0) {
    fail("label " + std::to_string(y) + " belongs to a class absent from the training data");
  }
}

std::size_t argmax_row(std::span<const double> p) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < p.size(); ++c) {
    if (p[c] > p[best]) best = c;
  }
  return best;
}

}  // namespace

ClassFrequencies compute_class_frequencies(std::span<const std::uint32_t> labels,
                                           std::span<const double> weights,
                                           int num_classes, std::uint32_t ignore) {
  require(weights.empty() || weights.size() == labels.size(),
          "frequency weights must match labels");
  if (num_classes <= 0) {
    std::uint32_t hi = 0;
    bool any = false;
    for (auto y : labels) {
      if (y == ignore) continue;
      hi = std::max(hi, y);
      any = true;
    }
    num_classes = any ? static_cast<int>(hi) + 1 : 0;
  }
  ClassFrequencies out;
  out.basis = weights.empty() ? FrequencyBasis::kSuperpixels : FrequencyBasis::kPixels;
  out.f.assign(static_cast<std::size_t>(num_classes), 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == ignore) continue;
    if (labels[i] >= out.f.size()) fail("label " + std::to_string(labels[i]) + " out of range");
    const double w = weights.empty() ? 1.0 : weights[i];
    require(w >= 0.0, "frequency weights must be non-negative");
    out.f[labels[i]] += w;
    total += w;
  }
  if (total <= 0.0) fail("no labeled samples to compute class frequencies");
  for (auto& f : out.f) f /= total;
  return out;
}

std::vector<int> MlpModel::layer_sizes() const {
  std::vector<int> sizes;
  if (layers.empty()) return sizes;
  sizes.push_back(layers.front().in);
  for (const auto& l : layers) sizes.push_back(l.out);
  return sizes;
}

MlpModel init_model(int input_dim, const std::vector<int>& hidden, int num_classes,
                    Rng& rng) {
  require(input_dim > 0, "input dimension must be positive");
  require(num_classes > 0, "number of classes must be positive");
  MlpModel model;
  model.num_classes = num_classes;
  std::vector<int> sizes = {input_dim};
  for (int h : hidden) {
    require(h > 0, "hidden layer sizes must be positive");
    sizes.push_back(h);
  }
  sizes.push_back(num_classes);
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    Layer layer;
    layer.in = sizes[l];
    layer.out = sizes[l + 1];
    const double bound = std::sqrt(6.0 / (layer.in + layer.out));
    layer.weights.resize(static_cast<std::size_t>(layer.in) * layer.out);
    for (auto& w : layer.weights) w = static_cast<float>(rng.uniform(-bound, bound));
    layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0f);
    model.layers.push_back(std::move(layer));
  }
  model.mean.assign(static_cast<std::size_t>(input_dim), 0.0f);
  model.stddev.assign(static_cast<std::size_t>(input_dim), 1.0f);
  return model;
}

void fit_normalization(MlpModel& model, const Matrix& features) {
  const std::size_t d = static_cast<std::size_t>(model.input_dim());
  require(features.cols == d, "feature dimension mismatch");
  require(features.rows > 0, "cannot fit normalization on no samples");
  std::vector<double> sum(d, 0.0), sq(d, 0.0);
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto row = features.row(i);
    for (std::size_t j = 0; j < d; ++j) sum[j] += row[j];
  }
  const double n = static_cast<double>(features.rows);
  for (std::size_t j = 0; j < d; ++j) sum[j] /= n;
  for (std::size_t i = 0; i < features.rows; ++i) {
    const auto row = features.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = row[j] - sum[j];
      sq[j] += dv * dv;
    }
  }
  for (std::size_t j = 0; j < d; ++j) {
    model.mean[j] = static_cast<float>(sum[j]);
    model.stddev[j] = std::max(kStdFloor, static_cast<float>(std::sqrt(sq[j] / n)));
  }
}

ForwardTrace forward_trace(const MlpModel& model, std::span<const float> x,
                           double dropout, Rng* rng) {
  const std::size_t d = static_cast<std::size_t>(model.input_dim());
  if (x.size() != d) {
    fail("feature dimension mismatch: model expects " + std::to_string(d) + ", got " +
         std::to_string(x.size()));
  }
  ForwardTrace trace;
  trace.dropout = (rng != nullptr && dropout > 0.0) ? dropout : 0.0;
  trace.activations.reserve(model.layers.size() + 1);
  std::vector<double> input(d);
  for (std::size_t j = 0; j < d; ++j) {
    input[j] = (static_cast<double>(x[j]) - model.mean[j]) / model.stddev[j];
  }
  trace.activations.push_back(std::move(input));
  const double keep_scale = 1.0 / (1.0 - trace.dropout);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Layer& layer = model.layers[l];
    const auto& a = trace.activations.back();
    std::vector<double> z(static_cast<std::size_t>(layer.out));
    for (int o = 0; o < layer.out; ++o) {
      const float* w = &layer.weights[static_cast<std::size_t>(o) * layer.in];
      double acc = layer.bias[o];
      for (int i = 0; i < layer.in; ++i) acc += static_cast<double>(w[i]) * a[i];
      z[o] = acc;
    }
    if (l + 1 < model.layers.size()) {
      for (auto& v : z) {
        v = std::max(0.0, v);
        if (trace.dropout > 0.0) v = rng->uniform() < trace.dropout ? 0.0 : v * keep_scale;
      }
    }
    trace.activations.push_back(std::move(z));
  }
  return trace;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    p[c] = std::exp(logits[c] - hi);
    total += p[c];
  }
  for (auto& v : p) v /= total;
  return p;
}

std::vector<double> forward(const MlpModel& model, std::span<const float> x) {
  return softmax(forward_trace(model, x).logits());
}

Gradients Gradients::zeros_like(const MlpModel& model) {
  Gradients g;
  for (const auto& l : model.layers) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

std::vector<double> backward(const MlpModel& model, const ForwardTrace& trace,
                             std::span<const double> dlogits, Gradients& acc) {
  std::vector<double> delta(dlogits.begin(), dlogits.end());
  const double keep_scale = 1.0 / (1.0 - trace.dropout);
  for (std::size_t l = model.layers.size(); l-- > 0;) {
    const Layer& layer = model.layers[l];
    const auto& a = trace.activations[l];
    auto& gw = acc.weights[l];
    auto& gb = acc.bias[l];
    std::vector<double> prev(static_cast<std::size_t>(layer.in), 0.0);
    for (int o = 0; o < layer.out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      double* grow = &gw[static_cast<std::size_t>(o) * layer.in];
      const float* w = &layer.weights[static_cast<std::size_t>(o) * layer.in];
      for (int i = 0; i < layer.in; ++i) {
        grow[i] += d * a[i];
        prev[i] += d * w[i];
      }
    }
    if (l > 0) {
      // a = keep_scale * relu(z) where kept, so da/dz is keep_scale or 0.
      for (int i = 0; i < layer.in; ++i) prev[i] = a[i] > 0.0 ? prev[i] * keep_scale : 0.0;
    }
    delta = std::move(prev);
  }
  return delta;
}

double asymmetric_loss(const std::vector<std::vector<double>>& probs,
                       std::span<const std::uint32_t> labels,
                       const ClassFrequencies& freq) {
  require(probs.size() == labels.size(), "probabilities and labels differ in count");
  require(!labels.empty(), "loss of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    check_label(labels[i], freq);
    total += std::log(std::max(kProbFloor, probs[i][labels[i]])) / freq.f[labels[i]];
  }
  return -total / static_cast<double>(labels.size());
}

double symmetric_loss(const std::vector<std::vector<double>>& probs,
                      std::span<const std::uint32_t> labels) {
  require(probs.size() == labels.size(), "probabilities and labels differ in count");
  require(!labels.empty(), "loss of an empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] < probs[i].size(), "label out of range");
    total += std::log(std::max(kProbFloor, probs[i][labels[i]]));
  }
  return -total / static_cast<double>(labels.size());
}

LossAndGrad loss_gradient(const MlpModel& model, const Matrix& features,
                          std::span<const std::uint32_t> labels,
                          const ClassFrequencies& freq, LossKind kind,
                          std::span<const std::size_t> rows, double dropout, Rng* rng) {
  require(labels.size() == features.rows, "labels must match feature rows");
  require(freq.num_classes() == model.num_classes, "frequency vector size mismatch");
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(features.rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  require(!rows.empty(), "loss of an empty batch");
  LossAndGrad out;
  out.grads = Gradients::zeros_like(model);
  const double n = static_cast<double>(rows.size());
  for (std::size_t r : rows) {
    const std::uint32_t y = labels[r];
    check_label(y, freq);
    const double w = (kind == LossKind::kAsymmetric ? 1.0 / freq.f[y] : 1.0) / n;
    const auto trace = forward_trace(model, features.row(r), dropout, rng);
    auto p = softmax(trace.logits());
    out.loss -= w * std::log(std::max(kProbFloor, p[y]));
    for (std::size_t c = 0; c < p.size(); ++c) p[c] = w * (p[c] - (c == y ? 1.0 : 0.0));
    backward(model, trace, p, out.grads);
  }
  return out;
}

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "learning rate must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(weight_decay >= 0.0, "weight decay must be non-negative");
  require(epochs >= 0, "epochs must be non-negative");
  require(batch_size >= 1, "batch size must be >= 1");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

void sgd_step(MlpModel& model, const Gradients& grads, Gradients& velocity,
              const TrainConfig& cfg) {
  auto update = [&](std::vector<float>& w, const std::vector<double>& g,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      v[i] = cfg.momentum * v[i] - cfg.learning_rate * (g[i] + cfg.weight_decay * w[i]);
      w[i] = static_cast<float>(w[i] + v[i]);
    }
  };
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    update(model.layers[l].weights, grads.weights[l], velocity.weights[l]);
    update(model.layers[l].bias, grads.bias[l], velocity.bias[l]);
  }
}

TrainResult train(const Matrix& features, std::span<const std::uint32_t> labels,
                  std::span<const double> freq_weights, int num_classes,
                  const TrainConfig& cfg) {
  cfg.validate();
  require(labels.size() == features.rows, "labels must match feature rows");
  TrainResult result;
  result.frequencies = compute_class_frequencies(labels, freq_weights, num_classes);
  const int classes = result.frequencies.num_classes();

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kDefaultIgnoreLabel) order.push_back(i);
  }
  Rng rng(cfg.seed);
  result.model = init_model(static_cast<int>(features.cols), cfg.hidden, classes, rng);
  fit_normalization(result.model, features);
  auto velocity = Gradients::zeros_like(result.model);

  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const std::span<const std::size_t> rows(order.data() + start, end - start);
      const auto lg = loss_gradient(result.model, features, labels, result.frequencies,
                                    cfg.loss, rows, cfg.dropout,
                                    cfg.dropout > 0.0 ? &rng : nullptr);
      weighted += lg.loss * static_cast<double>(rows.size());
      sgd_step(result.model, lg.grads, velocity, cfg);
    }
    result.epoch_loss.push_back(weighted / static_cast<double>(order.size()));
  }
  return result;
}

Matrix predict_probabilities(const MlpModel& model, const Matrix& features, int threads) {
  require(features.cols == static_cast<std::size_t>(model.input_dim()),
          "feature dimension mismatch");
  Matrix out(features.rows, static_cast<std::size_t>(model.num_classes));
  parallel_for_chunks(features.rows, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = forward(model, features.row(i));
      for (std::size_t c = 0; c < p.size(); ++c) out(i, c) = static_cast<float>(p[c]);
    }
  });
  return out;
}

std::vector<std::uint32_t> predict_labels(const MlpModel& model, const Matrix& features,
                                          int threads) {
  require(features.cols == static_cast<std::size_t>(model.input_dim()),
          "feature dimension mismatch");
  std::vector<std::uint32_t> out(features.rows);
  parallel_for_chunks(features.rows, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      out[i] = static_cast<std::uint32_t>(argmax_row(forward(model, features.row(i))));
    }
  });
  return out;
}

std::vector<std::uint8_t> encode_model(const MlpModel& model) {
  ByteWriter w;
  w.raw("ZOM1", 4);
  w.u32(static_cast<std::uint32_t>(model.num_classes));
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    w.u32(static_cast<std::uint32_t>(l.in));
    w.u32(static_cast<std::uint32_t>(l.out));
    w.f32s(l.weights);
    w.f32s(l.bias);
  }
  w.f32s(model.mean);
  w.f32s(model.stddev);
  return w.take();
}

MlpModel decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), "ZOM1", 4) != 0) {
    fail("bad magic: not a ZOM1 model");
  }
  ByteReader r(bytes.subspan(4));
  MlpModel model;
  model.num_classes = static_cast<int>(r.u32());
  const std::uint32_t count = r.u32();
  if (count == 0 || count > 64) fail("bad layer count " + std::to_string(count));
  for (std::uint32_t l = 0; l < count; ++l) {
    Layer layer;
    const std::uint32_t in = r.u32(), out = r.u32();
    if (in == 0 || out == 0 || in > (1u << 24) || out > (1u << 24)) fail("bad layer shape");
    layer.in = static_cast<int>(in);
    layer.out = static_cast<int>(out);
    if (!model.layers.empty() && model.layers.back().out != layer.in) {
      fail("consecutive layer dimensions disagree");
    }
    layer.weights = r.f32s(static_cast<std::size_t>(in) * out);
    layer.bias = r.f32s(out);
    model.layers.push_back(std::move(layer));
  }
  if (model.layers.back().out != model.num_classes) fail("output layer does not match class count");
  const auto d = static_cast<std::size_t>(model.input_dim());
  model.mean = r.f32s(d);
  model.stddev = r.f32s(d);
  if (!r.done()) fail("trailing bytes in model file");
  for (float s : model.stddev) {
    if (!(s > 0.0f)) fail("non-positive normalization std");
  }
  return model;
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

MlpModel load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path));
}

}  // namespace zok::learner
