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
#include <filesystem>
#include <span>
#include <vector>

#include "zok/core_io.hpp"
#include "zok/random.hpp"

namespace zok::learner {

enum class FrequencyBasis { kPixels, kSuperpixels };
enum class LossKind { kSymmetric, kAsymmetric };

struct ClassFrequencies {
  std::vector<double> f;  // zero for classes absent from the data
  FrequencyBasis basis = FrequencyBasis::kSuperpixels;

  int num_classes() const { return static_cast<int>(f.size()); }
};

// `weights` empty means unit weights (superpixel basis); otherwise each
// sample counts with its weight, typically its pixel count. Labels equal to
// `ignore` are skipped. num_classes <= 0 infers max label + 1.
ClassFrequencies compute_class_frequencies(
    std::span<const std::uint32_t> labels, std::span<const double> weights,
    int num_classes = 0, std::uint32_t ignore = kDefaultIgnoreLabel);

struct Layer {
  int in = 0;
  int out = 0;
  std::vector<float> weights;  // out x in, row-major
  std::vector<float> bias;
};

struct MlpModel {
  int num_classes = 0;
  std::vector<Layer> layers;
  std::vector<float> mean;  // input normalization
  std::vector<float> stddev;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in; }
  std::vector<int> layer_sizes() const;
};

inline constexpr float kStdFloor = 1e-6f;

// Glorot-uniform weights, zero biases, identity normalization.
MlpModel init_model(int input_dim, const std::vector<int>& hidden,
                    int num_classes, Rng& rng);

// Sets per-dimension mean and population std (floored) from `features`.
void fit_normalization(MlpModel& model, const Matrix& features);

// activations[0] is the normalized input, activations[l + 1] the output of
// layer l (ReLU and dropout applied on hidden layers); the last entry holds
// the logits.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;
  double dropout = 0.0;

  std::span<const double> logits() const { return activations.back(); }
};

// Dropout is active only when rng is given and dropout > 0.
ForwardTrace forward_trace(const MlpModel& model, std::span<const float> x,
                           double dropout = 0.0, Rng* rng = nullptr);

std::vector<double> softmax(std::span<const double> logits);
std::vector<double> forward(const MlpModel& model, std::span<const float> x);

struct Gradients {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const MlpModel& model);
};

// Accumulates parameter gradients for one sample given dLoss/dlogits.
// Returns dLoss/d(normalized input).
std::vector<double> backward(const MlpModel& model, const ForwardTrace& trace,
                             std::span<const double> dlogits, Gradients& acc);

double asymmetric_loss(const std::vector<std::vector<double>>& probs,
                       std::span<const std::uint32_t> labels,
                       const ClassFrequencies& freq);
double symmetric_loss(const std::vector<std::vector<double>>& probs,
                      std::span<const std::uint32_t> labels);

struct LossAndGrad {
  double loss = 0.0;
  Gradients grads;
};

// Loss over the rows of `features` listed in `rows` (all rows when empty),
// with per-sample weight 1/(N f_y) for the asymmetric loss and 1/N otherwise.
LossAndGrad loss_gradient(const MlpModel& model, const Matrix& features,
                          std::span<const std::uint32_t> labels,
                          const ClassFrequencies& freq, LossKind kind,
                          std::span<const std::size_t> rows = {},
                          double dropout = 0.0, Rng* rng = nullptr);

struct TrainConfig {
  std::vector<int> hidden;
  double learning_rate = 1e-4;
  double momentum = 0.9;
  double weight_decay = 1e-3;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 0;
  double dropout = 0.0;
  LossKind loss = LossKind::kAsymmetric;

  void validate() const;
};

// v <- mu v - lr (g + lambda w); w <- w + v, for weights and biases.
void sgd_step(MlpModel& model, const Gradients& grads, Gradients& velocity,
              const TrainConfig& cfg);

struct TrainResult {
  MlpModel model;
  ClassFrequencies frequencies;
  std::vector<double> epoch_loss;  // sample-weighted mean of batch losses
};

// `freq_weights` feeds compute_class_frequencies (empty = superpixel basis).
TrainResult train(const Matrix& features, std::span<const std::uint32_t> labels,
                  std::span<const double> freq_weights, int num_classes,
                  const TrainConfig& cfg);

Matrix predict_probabilities(const MlpModel& model, const Matrix& features,
                             int threads = 1);
// Argmax per row; ties resolve to the smallest class id.
std::vector<std::uint32_t> predict_labels(const MlpModel& model,
                                          const Matrix& features,
                                          int threads = 1);

std::vector<std::uint8_t> encode_model(const MlpModel& model);
MlpModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

}  // namespace zok::learner
