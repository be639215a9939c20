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

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "zok/error.hpp"

namespace zok::learner {
namespace {

// One linear layer D -> C with identity normalization.
MlpModel linear_model(int d, int c, std::vector<float> w, std::vector<float> b) {
  Rng rng(0);
  MlpModel m = init_model(d, {}, c, rng);
  m.layers[0].weights = std::move(w);
  m.layers[0].bias = std::move(b);
  return m;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  Matrix m(rows, cols);
  for (auto& v : m.data) v = static_cast<float>(rng.normal());
  return m;
}

// Two Gaussian blobs at (-2,-2) and (2,2), labels 0 and 1.
void make_blobs(Rng& rng, std::size_t n, Matrix& x, std::vector<std::uint32_t>& y) {
  x = Matrix(n, 2);
  y.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = static_cast<std::uint32_t>(i % 2);
    const double c = y[i] == 0 ? -2.0 : 2.0;
    x(i, 0) = static_cast<float>(c + 0.5 * rng.normal());
    x(i, 1) = static_cast<float>(c + 0.5 * rng.normal());
  }
}

TEST(ClassFrequencies, Examples) {
  const std::vector<std::uint32_t> two = {0, 1};
  EXPECT_EQ(compute_class_frequencies(two, {}).f, (std::vector<double>{0.5, 0.5}));
  const std::vector<std::uint32_t> skew = {0, 0, 0, 1};
  EXPECT_EQ(compute_class_frequencies(skew, {}).f, (std::vector<double>{0.75, 0.25}));
  const std::vector<double> sizes = {10, 30};
  const auto pix = compute_class_frequencies(two, sizes);
  EXPECT_EQ(pix.f, (std::vector<double>{0.25, 0.75}));
  EXPECT_EQ(pix.basis, FrequencyBasis::kPixels);
}

TEST(ClassFrequencies, IgnoreAndErrors) {
  const std::vector<std::uint32_t> labels = {0, 255, 2, 2};
  const auto f = compute_class_frequencies(labels, {});
  ASSERT_EQ(f.f.size(), 3u);
  EXPECT_DOUBLE_EQ(f.f[0], 1.0 / 3);
  EXPECT_DOUBLE_EQ(f.f[1], 0.0);
  EXPECT_NEAR(f.f[0] + f.f[1] + f.f[2], 1.0, 1e-9);
  EXPECT_THROW(compute_class_frequencies({}, {}), Error);
  const std::vector<std::uint32_t> ignored = {255, 255};
  EXPECT_THROW(compute_class_frequencies(ignored, {}), Error);
}

TEST(Forward, Examples) {
  const std::vector<float> x = {0.3f, -1.0f, 2.0f};
  const auto zero = linear_model(3, 4, std::vector<float>(12, 0.0f), std::vector<float>(4, 0.0f));
  for (double p : forward(zero, x)) EXPECT_DOUBLE_EQ(p, 0.25);

  const auto two = linear_model(1, 2, {0, 0}, {0, static_cast<float>(std::log(3.0))});
  const std::vector<float> one = {1.0f};
  const auto p = forward(two, one);
  EXPECT_NEAR(p[0], 0.25, 1e-7);
  EXPECT_NEAR(p[1], 0.75, 1e-7);

  Rng rng(5);
  const auto mlp = init_model(3, {6, 4}, 5, rng);
  for (int t = 0; t < 20; ++t) {
    const std::vector<float> v = {static_cast<float>(rng.normal() * 10), 0.0f,
                                  static_cast<float>(rng.normal())};
    const auto q = forward(mlp, v);
    double sum = 0;
    for (double e : q) sum += e;
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }
  const std::vector<float> wrong = {1.0f, 2.0f};
  EXPECT_THROW(forward(mlp, wrong), Error);
}

TEST(Forward, SoftmaxShiftInvariant) {
  const std::vector<double> logits = {1.0, -2.0, 0.5, 3.0};
  std::vector<double> shifted = logits;
  for (auto& v : shifted) v += 123.0;
  const auto a = softmax(logits);
  const auto b = softmax(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-6);
}

TEST(Loss, Examples) {
  ClassFrequencies f;
  f.f = {0.8, 0.2};
  const std::vector<std::uint32_t> labels = {0, 1};
  EXPECT_DOUBLE_EQ(asymmetric_loss({{1.0, 0.0}, {0.0, 1.0}}, labels, f), 0.0);
  EXPECT_NEAR(asymmetric_loss({{0.5, 0.5}, {0.75, 0.25}}, labels, f), 3.898953, 1e-5);

  ClassFrequencies uniform;
  uniform.f = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  const std::vector<std::vector<double>> probs = {{0.2, 0.5, 0.3}, {0.1, 0.1, 0.8}, {0.6, 0.3, 0.1}};
  const std::vector<std::uint32_t> y3 = {1, 2, 0};
  EXPECT_NEAR(asymmetric_loss(probs, y3, uniform), 3.0 * symmetric_loss(probs, y3), 1e-12);

  // Probability floor keeps the loss finite.
  EXPECT_TRUE(std::isfinite(asymmetric_loss({{1.0, 0.0}}, std::vector<std::uint32_t>{1}, f)));
  EXPECT_THROW(asymmetric_loss({{1.0, 0.0}}, std::vector<std::uint32_t>{255}, f), Error);
}

TEST(Gradient, ZeroAtOneHotOutput) {
  // Logit gap of 800 makes the softmax exactly one-hot in double precision.
  const auto m = linear_model(1, 2, {0, 0}, {0, 800});
  Matrix x(1, 1, 1.0f);
  ClassFrequencies f;
  f.f = {0.5, 0.5};
  const std::vector<std::uint32_t> y = {1};
  const auto lg = loss_gradient(m, x, y, f, LossKind::kAsymmetric);
  for (double g : lg.grads.weights[0]) EXPECT_EQ(g, 0.0);
  for (double g : lg.grads.bias[0]) EXPECT_EQ(g, 0.0);
}

TEST(Gradient, LinearHandFormula) {
  const auto m = linear_model(2, 3, {0.1f, -0.2f, 0.3f, 0.0f, -0.5f, 0.4f}, {0.0f, 0.1f, -0.1f});
  Matrix x(1, 2);
  x.data = {1.5f, -0.5f};
  ClassFrequencies f;
  f.f = {0.5, 0.2, 0.3};
  const std::vector<std::uint32_t> y = {1};
  const auto lg = loss_gradient(m, x, y, f, LossKind::kAsymmetric);
  const auto p = forward(m, x.row(0));
  for (int c = 0; c < 3; ++c) {
    const double e = (p[c] - (c == 1 ? 1.0 : 0.0)) / 0.2;
    EXPECT_NEAR(lg.grads.bias[0][c], e, 1e-12);
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(lg.grads.weights[0][c * 2 + j], e * x(0, j), 1e-12);
  }
}

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

TEST(Gradient, MatchesCentralDifferences) {
  Rng rng(21);
  auto m = init_model(4, {5, 3}, 3, rng);
  for (auto& l : m.layers) {
    for (auto& b : l.bias) b = static_cast<float>(rng.uniform(0.05, 0.3));
  }
  const Matrix x = random_matrix(rng, 6, 4);
  const std::vector<std::uint32_t> y = {0, 1, 2, 2, 1, 0};
  ClassFrequencies f;
  f.f = {0.6, 0.3, 0.1};
  for (auto kind : {LossKind::kAsymmetric, LossKind::kSymmetric}) {
    const auto lg = loss_gradient(m, x, y, f, kind);
    const double h = 1e-3;
    auto check = [&](float& param, double analytic) {
      const float saved = param;
      param = static_cast<float>(saved + h);
      const double up_step = static_cast<double>(param) - saved;
      const double up = loss_gradient(m, x, y, f, kind).loss;
      param = static_cast<float>(saved - h);
      const double down_step = saved - static_cast<double>(param);
      const double down = loss_gradient(m, x, y, f, kind).loss;
      param = saved;
      const double numeric = (up - down) / (up_step + down_step);
      EXPECT_LT(relative_error(analytic, numeric), 1e-4) << analytic << " vs " << numeric;
    };
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      for (std::size_t i = 0; i < m.layers[l].weights.size(); ++i) {
        check(m.layers[l].weights[i], lg.grads.weights[l][i]);
      }
      for (std::size_t i = 0; i < m.layers[l].bias.size(); ++i) {
        check(m.layers[l].bias[i], lg.grads.bias[l][i]);
      }
    }
  }
}

TEST(Sgd, Examples) {
  auto m = linear_model(1, 1, {1.0f}, {0.0f});
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.weight_decay = 0.0;
  auto grads = Gradients::zeros_like(m);
  auto vel = Gradients::zeros_like(m);
  sgd_step(m, grads, vel, cfg);
  EXPECT_EQ(m.layers[0].weights[0], 1.0f);

  cfg.momentum = 0.0;
  grads.weights[0][0] = 2.0;
  sgd_step(m, grads, vel, cfg);
  EXPECT_FLOAT_EQ(m.layers[0].weights[0], 0.8f);

  // mu = 0.9, lambda = 0.5, lr = 0.1, constant gradient 1 starting at w = 1:
  // v1 = -0.15, w1 = 0.85; v2 = 0.9 v1 - 0.1 (1 + 0.425) = -0.2775, w2 = 0.5725.
  m = linear_model(1, 1, {1.0f}, {0.0f});
  vel = Gradients::zeros_like(m);
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.5;
  grads.weights[0][0] = 1.0;
  sgd_step(m, grads, vel, cfg);
  EXPECT_NEAR(m.layers[0].weights[0], 0.85, 1e-6);
  sgd_step(m, grads, vel, cfg);
  EXPECT_NEAR(m.layers[0].weights[0], 0.5725, 1e-6);
}

TEST(Train, SeparableBlobs) {
  Rng rng(3);
  Matrix x;
  std::vector<std::uint32_t> y;
  make_blobs(rng, 200, x, y);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 50;
  cfg.hidden = {8};
  cfg.seed = 11;
  const auto result = train(x, y, {}, 2, cfg);
  const auto pred = predict_labels(result.model, x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
  EXPECT_GE(static_cast<double>(correct) / y.size(), 0.99);
  EXPECT_EQ(result.epoch_loss.size(), 50u);
}

TEST(Train, DeterministicForSeed) {
  Rng rng(8);
  Matrix x;
  std::vector<std::uint32_t> y;
  make_blobs(rng, 64, x, y);
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.epochs = 5;
  cfg.hidden = {6};
  cfg.dropout = 0.3;
  cfg.seed = 99;
  const auto a = train(x, y, {}, 2, cfg);
  const auto b = train(x, y, {}, 2, cfg);
  EXPECT_EQ(encode_model(a.model), encode_model(b.model));
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  cfg.seed = 100;
  EXPECT_NE(encode_model(train(x, y, {}, 2, cfg).model), encode_model(a.model));
}

TEST(Train, ConvexFullBatchLossDecreases) {
  Rng rng(13);
  Matrix x = random_matrix(rng, 40, 3);
  std::vector<std::uint32_t> y(40);
  for (std::size_t i = 0; i < 40; ++i) y[i] = static_cast<std::uint32_t>(i % 3);
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  cfg.epochs = 30;
  cfg.batch_size = 40;
  const auto result = train(x, y, {}, 3, cfg);
  for (std::size_t e = 1; e < result.epoch_loss.size(); ++e) {
    EXPECT_LT(result.epoch_loss[e], result.epoch_loss[e - 1]);
  }
}

TEST(Train, RejectsBadConfig) {
  Matrix x(2, 1, 1.0f);
  const std::vector<std::uint32_t> y = {0, 1};
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  EXPECT_THROW(train(x, y, {}, 2, cfg), Error);
  cfg.learning_rate = 0.1;
  cfg.dropout = 1.0;
  EXPECT_THROW(train(x, y, {}, 2, cfg), Error);
}

TEST(Predict, Examples) {
  Matrix x(2, 2);
  x.data = {1.0f, 0.0f, 0.0f, 1.0f};
  const auto uniform = linear_model(2, 3, std::vector<float>(6, 0.0f), std::vector<float>(3, 0.0f));
  EXPECT_EQ(predict_labels(uniform, x), (std::vector<std::uint32_t>{0, 0}));
  // Row 0 favors class 2, row 1 class 1.
  const auto hand = linear_model(2, 3, {0, 0, 0, 1, 1, 0}, {0, 0, 0});
  EXPECT_EQ(predict_labels(hand, x), (std::vector<std::uint32_t>{2, 1}));
  const auto probs = predict_probabilities(hand, x);
  EXPECT_NEAR(probs(0, 2), std::exp(1.0) / (2 + std::exp(1.0)), 1e-6);
}

TEST(ModelFile, RoundTripAndErrors) {
  Rng rng(2);
  auto m = init_model(5, {4}, 3, rng);
  fit_normalization(m, random_matrix(rng, 10, 5));
  const auto bytes = encode_model(m);
  EXPECT_EQ(encode_model(decode_model(bytes)), bytes);

  testing::ScratchDir dir;
  save_model(m, dir.path() / "m.zom");
  EXPECT_EQ(encode_model(load_model(dir.path() / "m.zom")), bytes);

  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_model(bad), Error);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_model(truncated), Error);
  try {
    load_model(dir.path() / "missing.zom");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST(Normalization, PopulationStdWithFloor) {
  Rng rng(1);
  auto m = init_model(2, {}, 2, rng);
  Matrix x(4, 2);
  x.data = {1, 5, 3, 5, 5, 5, 7, 5};
  fit_normalization(m, x);
  EXPECT_FLOAT_EQ(m.mean[0], 4.0f);
  EXPECT_FLOAT_EQ(m.stddev[0], std::sqrt(5.0f));
  EXPECT_FLOAT_EQ(m.stddev[1], kStdFloor);
}

}  // namespace
}  // namespace zok::learner
