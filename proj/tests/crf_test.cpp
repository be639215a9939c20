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

#include "zok/crf.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "zok/error.hpp"
#include "zok/random.hpp"

namespace zok::crf {
namespace {

NodeFeatures features_of(std::size_t dims, std::vector<double> data) {
  NodeFeatures f;
  f.dims = dims;
  f.nodes = data.size() / dims;
  f.data = std::move(data);
  return f;
}

CrfModel model_of(std::size_t n, std::size_t c, std::vector<double> unary) {
  CrfModel m;
  m.num_nodes = n;
  m.num_labels = c;
  m.unary = std::move(unary);
  m.compatibility = potts(c);
  return m;
}

Kernel kernel_of(double w, std::vector<double> precision) {
  Kernel k;
  k.weight = w;
  k.precision = std::move(precision);
  return k;
}

// Random attractive Potts instance with 2-D features.
void random_instance(Rng& rng, std::size_t n, std::size_t c, double max_weight, CrfModel& m,
                     NodeFeatures& f, double max_unary = 2.0) {
  std::vector<double> unary(n * c);
  for (auto& u : unary) u = rng.uniform(0.0, max_unary);
  m = model_of(n, c, unary);
  m.kernels.push_back(kernel_of(rng.uniform(0.0, max_weight), {1.0, 1.0}));
  std::vector<double> pos(n * 2);
  for (auto& p : pos) p = rng.uniform(0.0, 2.0);
  f = features_of(2, pos);
}

TEST(Kernel, Examples) {
  const std::vector<double> a = {1.0, -2.0}, prec = {0.3, 4.0};
  EXPECT_DOUBLE_EQ(kernel_eval(a, a, prec), 1.0);
  const std::vector<double> x = {0.0}, y = {2.0}, half = {0.5};
  EXPECT_NEAR(kernel_eval(x, y, half), 0.36788, 1e-5);
  const std::vector<double> origin = {0.0, 0.0};
  double prev = 1.0;
  for (double d = 0.5; d < 5; d += 0.5) {
    const std::vector<double> z = {d, 2 * d};
    const double v = kernel_eval(origin, z, prec);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Pairwise, Examples) {
  auto m = model_of(2, 3, std::vector<double>(6, 0.0));
  m.kernels.push_back(kernel_of(2.0, {2.0 * std::log(2.0)}));
  const std::vector<double> fi = {0.0}, fj = {1.0};
  EXPECT_EQ(pairwise_potential(1, 1, fi, fj, m), 0.0);
  EXPECT_NEAR(pairwise_potential(0, 2, fi, fj, m), 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(pairwise_potential(0, 2, fi, fj, m), pairwise_potential(2, 0, fj, fi, m));
}

TEST(Energy, UnaryOnlyAndHand) {
  auto m = model_of(2, 2, {0.0, 1.0, 2.0, 0.5});
  const auto f = features_of(1, {0.0, 1.0});
  const std::vector<std::uint32_t> x01 = {0, 1}, x00 = {0, 0};
  m.kernels.push_back(kernel_of(0.0, {1.0}));
  EXPECT_DOUBLE_EQ(gibbs_energy(x01, m, f), 0.5);
  m.kernels[0].weight = 1.0;
  EXPECT_NEAR(gibbs_energy(x01, m, f), 0.5 + std::exp(-0.5), 1e-12);
  EXPECT_DOUBLE_EQ(gibbs_energy(x00, m, f), 2.0);
}

TEST(Energy, InvariantUnderNodePermutation) {
  Rng rng(3);
  CrfModel m;
  NodeFeatures f;
  random_instance(rng, 5, 3, 1.5, m, f);
  const std::vector<std::size_t> perm = {3, 0, 4, 1, 2};
  CrfModel pm = m;
  NodeFeatures pf = f;
  std::vector<std::uint32_t> x(5), px(5);
  for (std::size_t i = 0; i < 5; ++i) x[i] = static_cast<std::uint32_t>(rng.below(3));
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t l = 0; l < 3; ++l) pm.unary[i * 3 + l] = m.unary[perm[i] * 3 + l];
    for (std::size_t d = 0; d < 2; ++d) pf.data[i * 2 + d] = f.data[perm[i] * 2 + d];
    px[i] = x[perm[i]];
  }
  EXPECT_NEAR(gibbs_energy(x, m, f), gibbs_energy(px, pm, pf), 1e-12);
}

TEST(Gibbs, SingleNodeAndUniform) {
  const auto m = model_of(1, 3, {0.5, 1.5, -1.0});
  const auto t = gibbs_distribution_bruteforce(m, features_of(1, {0.0}));
  const double z = std::exp(-0.5) + std::exp(-1.5) + std::exp(1.0);
  EXPECT_NEAR(t.probability[0], std::exp(-0.5) / z, 1e-12);
  EXPECT_NEAR(t.probability[2], std::exp(1.0) / z, 1e-12);

  const auto flat = model_of(3, 2, std::vector<double>(6, 0.0));
  for (double p : gibbs_distribution_bruteforce(flat, features_of(1, {0, 0, 0})).probability) {
    EXPECT_DOUBLE_EQ(p, 1.0 / 8);
  }
}

TEST(Gibbs, ThreeNodePartitionByHand) {
  auto m = model_of(3, 2, {0.2, 1.0, 0.7, 0.1, 0.0, 0.4});
  m.kernels.push_back(kernel_of(1.3, {0.8}));
  const auto f = features_of(1, {0.0, 1.0, 3.0});
  const auto t = gibbs_distribution_bruteforce(m, f);
  double z = 0.0, total = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int c = 0; c < 2; ++c) {
        double e = m.unary[a] + m.unary[2 + b] + m.unary[4 + c];
        auto k = [&](double d) { return 1.3 * std::exp(-0.5 * 0.8 * d * d); };
        e += (a != b) * k(1.0) + (a != c) * k(3.0) + (b != c) * k(2.0);
        z += std::exp(-e);
      }
    }
  }
  EXPECT_NEAR(t.log_partition, std::log(z), 1e-12);
  for (double p : t.probability) total += p;
  EXPECT_NEAR(total, 1.0, 1e-9);
}

TEST(Gibbs, MarginalsMatchDirectSums) {
  Rng rng(9);
  CrfModel m;
  NodeFeatures f;
  random_instance(rng, 4, 3, 2.0, m, f);
  const auto t = gibbs_distribution_bruteforce(m, f);
  const auto marg = marginals(t, 4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::uint32_t l = 0; l < 3; ++l) {
      double direct = 0.0;
      for (std::size_t s = 0; s < t.probability.size(); ++s) {
        if (labeling_from_index(s, 4, 3)[i] == l) direct += t.probability[s];
      }
      EXPECT_NEAR(marg[i * 3 + l], direct, 1e-15);
    }
  }
}

TEST(Gibbs, RejectsLargeInstances) {
  const auto m = model_of(21, 2, std::vector<double>(42, 0.0));
  EXPECT_THROW(gibbs_distribution_bruteforce(m, features_of(1, std::vector<double>(21, 0.0))),
               Error);
}

TEST(MeanField, ZeroPairwiseIsUnarySoftmax) {
  const auto m = model_of(2, 3, {0.1, 2.0, 0.5, 1.0, 1.0, -1.0});
  const auto f = features_of(1, {0.0, 1.0});
  MeanFieldConfig cfg;
  cfg.iterations = 1;
  const auto one = mean_field_refine(m, f, cfg);
  cfg.iterations = 5;
  const auto five = mean_field_refine(m, f, cfg);
  const double z = std::exp(-0.1) + std::exp(-2.0) + std::exp(-0.5);
  EXPECT_NEAR(one.q[0], std::exp(-0.1) / z, 1e-12);
  for (std::size_t i = 0; i < one.q.size(); ++i) EXPECT_NEAR(one.q[i], five.q[i], 1e-12);
}

TEST(MeanField, SymmetricPairAgrees) {
  auto m = model_of(2, 2, {0.3, 0.6, 0.3, 0.6});
  m.kernels.push_back(kernel_of(2.0, {1.0}));
  const auto f = features_of(1, {0.0, 0.5});
  for (auto mode : {UpdateMode::kParallel, UpdateMode::kSequential}) {
    MeanFieldConfig cfg;
    cfg.mode = mode;
    cfg.damping = 0.0;
    cfg.iterations = mode == UpdateMode::kParallel ? 7 : 1;
    const auto s = mean_field_refine(m, f, cfg);
    if (mode == UpdateMode::kParallel) {
      EXPECT_DOUBLE_EQ(s.q[0], s.q[2]);
      EXPECT_DOUBLE_EQ(s.q[1], s.q[3]);
    }
    EXPECT_EQ(map_labels(s), (std::vector<std::uint32_t>{0, 0}));
  }
}

TEST(MeanField, SequentialFreeEnergyNonIncreasing) {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    CrfModel m;
    NodeFeatures f;
    random_instance(rng, 4, 2, 3.0, m, f);
    MeanFieldConfig cfg;
    cfg.mode = UpdateMode::kSequential;
    cfg.damping = 0.3;
    double prev = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= 10; ++it) {
      cfg.iterations = it;
      const double fe = free_energy(mean_field_refine(m, f, cfg), m, f);
      EXPECT_LE(fe, prev + 1e-12);
      prev = fe;
    }
  }
}

TEST(MeanField, RowsStayDistributions) {
  Rng rng(12);
  CrfModel m;
  NodeFeatures f;
  random_instance(rng, 8, 4, 5.0, m, f);
  MeanFieldConfig cfg;
  for (int it = 1; it <= 6; ++it) {
    cfg.iterations = it;
    cfg.threads = 3;
    const auto s = mean_field_refine(m, f, cfg);
    cfg.threads = 1;
    EXPECT_EQ(s.q, mean_field_refine(m, f, cfg).q);
    for (std::size_t i = 0; i < s.num_nodes; ++i) {
      double total = 0.0;
      for (double q : s.row(i)) {
        EXPECT_GE(q, 0.0);
        total += q;
      }
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

// Mean field approximates temperature-1 marginals, so its argmax tracks the
// MAP labeling when the distribution is peaked (wide unary range) and the
// exact max-marginal labeling in general.
TEST(MeanField, MatchesBruteForceMapOnSmallInstances) {
  Rng rng(2024);
  int agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CrfModel m;
    NodeFeatures f;
    random_instance(rng, 2 + rng.below(9), 2 + rng.below(2), 0.5, m, f, 10.0);
    MeanFieldConfig cfg;
    cfg.iterations = 20;
    agree += map_labels(mean_field_refine(m, f, cfg)) == bruteforce_map(m, f);
  }
  EXPECT_GE(agree, 90);
}

TEST(MeanField, MatchesExactMaxMarginals) {
  Rng rng(77);
  int agree = 0;
  for (int trial = 0; trial < 100; ++trial) {
    CrfModel m;
    NodeFeatures f;
    random_instance(rng, 2 + rng.below(9), 2 + rng.below(2), 0.5, m, f);
    MeanFieldConfig cfg;
    cfg.iterations = 20;
    MeanFieldState exact;
    exact.num_nodes = m.num_nodes;
    exact.num_labels = m.num_labels;
    exact.q = marginals(gibbs_distribution_bruteforce(m, f), m.num_nodes, m.num_labels);
    agree += map_labels(mean_field_refine(m, f, cfg)) == map_labels(exact);
  }
  EXPECT_GE(agree, 90);
}

TEST(MapLabels, Examples) {
  MeanFieldState s;
  s.num_nodes = 3;
  s.num_labels = 3;
  s.q = {0, 1, 0, 0, 0, 1, 1, 0, 0};
  EXPECT_EQ(map_labels(s), (std::vector<std::uint32_t>{1, 2, 0}));
  s.q.assign(9, 1.0 / 3);
  EXPECT_EQ(map_labels(s), (std::vector<std::uint32_t>{0, 0, 0}));
  s.q = {0.2, 0.5, 0.3, 0.4, 0.4, 0.2, 0.1, 0.3, 0.6};
  EXPECT_EQ(map_labels(s), (std::vector<std::uint32_t>{1, 0, 2}));
}

TEST(Validation, RejectsBadInputs) {
  auto m = model_of(2, 2, {0, 0, 0, 0});
  m.kernels.push_back(kernel_of(1.0, {0.0}));
  EXPECT_THROW(mean_field_refine(m, features_of(1, {0, 1}), {}), Error);
  m.kernels[0].precision = {1.0};
  MeanFieldConfig cfg;
  cfg.damping = 1.0;
  EXPECT_THROW(mean_field_refine(m, features_of(1, {0, 1}), cfg), Error);
  EXPECT_THROW(mean_field_refine(m, features_of(1, {0, 1, 2}), {}), Error);
  EXPECT_EQ(parse_update_mode("sequential"), UpdateMode::kSequential);
  EXPECT_THROW(parse_update_mode("async"), Error);
}

TEST(ImageFeatures, SuperpixelMeans) {
  LabImage lab;
  lab.width = 2;
  lab.height = 1;
  lab.data = {10, 1, 2, 30, 3, 4};
  const auto map = make_superpixel_map(2, 1, {0, 0});
  const auto f = superpixel_features(lab, map);
  EXPECT_EQ(f.data, (std::vector<double>{1.0, 0.5, 20, 2, 3}));
  const auto p = pixel_features(lab);
  EXPECT_EQ(p.nodes, 2u);
  EXPECT_EQ(p.data[5], 1.5);

  auto m = model_of(2, 2, {0, 0, 0, 0});
  add_image_kernels(m, {});
  EXPECT_EQ(m.kernels.size(), 2u);
  EXPECT_NO_THROW(m.validate(p));
}

}  // namespace
}  // namespace zok::crf
