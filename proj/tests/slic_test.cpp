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

#include "zok/slic.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "test_util.hpp"
#include "zok/error.hpp"
#include "zok/random.hpp"

namespace zok::slic {
namespace {

using testing::flat_image;
using testing::is_four_connected;
using testing::quadrant_image;

LabImage lab_from(int w, int h, const std::vector<float>& values) {
  LabImage lab;
  lab.width = w;
  lab.height = h;
  lab.data = values;
  return lab;
}

// Columns x < split get color a, the rest color b.
LabImage step_lab(int w, int h, int split, float a, float b) {
  LabImage lab;
  lab.width = w;
  lab.height = h;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float v = x < split ? a : b;
      lab.data.insert(lab.data.end(), {v, 0.0f, 0.0f});
    }
  }
  return lab;
}

TEST(GridInterval, HandValues) {
  EXPECT_DOUBLE_EQ(grid_interval(10000, 100), 10.0);
  EXPECT_DOUBLE_EQ(grid_interval(4096, 4096), 1.0);
  EXPECT_DOUBLE_EQ(grid_interval(25, 1), 5.0);
  EXPECT_THROW(grid_interval(25, 0), Error);
  EXPECT_THROW(grid_interval(3, 4), Error);
}

TEST(InitCenters, RegularLayout) {
  const auto lab = rgb_to_lab(flat_image(10, 10, 9, 9, 9));
  const auto centers = init_centers(lab, 5.0);
  ASSERT_EQ(centers.size(), 4u);
  const double expected[4][2] = {{2.5, 2.5}, {7.5, 2.5}, {2.5, 7.5}, {7.5, 7.5}};
  for (int i = 0; i < 4; ++i) {
    EXPECT_DOUBLE_EQ(centers[i].x, expected[i][0]);
    EXPECT_DOUBLE_EQ(centers[i].y, expected[i][1]);
  }
  EXPECT_EQ(init_centers(rgb_to_lab(flat_image(9, 9, 0, 0, 0)), 3.0).size(), 9u);
  const auto single = init_centers(rgb_to_lab(flat_image(6, 4, 0, 0, 0)), 8.0);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_LT(single[0].x, 6.0);
  EXPECT_LT(single[0].y, 4.0);
}

TEST(InitCenters, SamplesColorAtCenterPixel) {
  LabImage lab = step_lab(10, 10, 5, 10.0f, 80.0f);
  const auto centers = init_centers(lab, 5.0);
  EXPECT_FLOAT_EQ(centers[0].l, 10.0f);
  EXPECT_FLOAT_EQ(centers[1].l, 80.0f);
}

TEST(PerturbCenters, FlatFieldLeavesCentersInPlace) {
  const auto lab = rgb_to_lab(flat_image(10, 10, 50, 60, 70));
  const auto before = init_centers(lab, 5.0);
  const auto after = perturb_centers(lab, before);
  for (std::size_t i = 0; i < before.size(); ++i) {
    EXPECT_DOUBLE_EQ(after[i].x, before[i].x);
    EXPECT_DOUBLE_EQ(after[i].y, before[i].y);
  }
  const auto tiny = rgb_to_lab(flat_image(1, 1, 1, 2, 3));
  const auto one = perturb_centers(tiny, init_centers(tiny, 1.0));
  EXPECT_DOUBLE_EQ(one[0].x, 0.5);
  EXPECT_DOUBLE_EQ(one[0].y, 0.5);
}

TEST(PerturbCenters, MovesOffStepEdge) {
  // Columns 0-1 dark, 2-4 bright: central differences are nonzero only at
  // x = 1 and x = 2, where G = 70^2.
  const LabImage lab = step_lab(5, 5, 2, 10.0f, 80.0f);
  EXPECT_DOUBLE_EQ(gradient_at(lab, 1, 2), 4900.0);
  EXPECT_DOUBLE_EQ(gradient_at(lab, 2, 2), 4900.0);
  EXPECT_DOUBLE_EQ(gradient_at(lab, 0, 2), 0.0);
  EXPECT_DOUBLE_EQ(gradient_at(lab, 3, 2), 0.0);

  ClusterCenter on_edge{80, 0, 0, 2.5, 2.5};  // pixel (2, 2)
  const auto moved = perturb_centers(lab, {on_edge});
  // Lowest gradient (0) first reached in row-major order of the 3x3 block
  // around (2, 2) is pixel (3, 1).
  EXPECT_DOUBLE_EQ(moved[0].x, 3.5);
  EXPECT_DOUBLE_EQ(moved[0].y, 1.5);
  EXPECT_FLOAT_EQ(moved[0].l, 80.0f);
}

TEST(SlicDistance, HandValues) {
  ClusterCenter c{50, 10, -5, 4.0, 4.0};
  const double same[5] = {50, 10, -5, 4.0, 4.0};
  EXPECT_DOUBLE_EQ(slic_distance(c, same, 10, 10), 0.0);
  // d_lab = 3, d_xy = 4.
  const double p1[5] = {53, 10, -5, 4.0, 8.0};
  EXPECT_DOUBLE_EQ(slic_distance(c, p1, 10, 10), 7.0);
  // d_lab = 0, d_xy = 5 (3-4-5 triangle).
  const double p2[5] = {50, 10, -5, 7.0, 8.0};
  EXPECT_DOUBLE_EQ(slic_distance(c, p2, 15, 10), 7.5);
}

TEST(AssignPixels, SingleCenterTakesEverything) {
  const auto lab = rgb_to_lab(flat_image(6, 4, 1, 2, 3));
  const auto a = assign_pixels(lab, {ClusterCenter{0, 0, 0, 3.0, 2.0}}, 10, 5);
  for (auto id : a.labels) EXPECT_EQ(id, 0u);
  EXPECT_EQ(a.fallback_pixels, 0u);
}

TEST(AssignPixels, TwoColorsSplitAtBoundary) {
  // 4x2 image, left half L=10, right half L=80; S=2, m small.
  const LabImage lab = step_lab(4, 2, 2, 10.0f, 80.0f);
  const std::vector<ClusterCenter> centers = {{10, 0, 0, 1.0, 1.0},
                                              {80, 0, 0, 3.0, 1.0}};
  const auto a = assign_pixels(lab, centers, 0.1, 2.0);
  const std::vector<std::uint32_t> expected = {0, 0, 1, 1, 0, 0, 1, 1};
  EXPECT_EQ(a.labels, expected);
}

TEST(AssignPixels, TiesGoToSmallestId) {
  const LabImage lab = lab_from(3, 1, {5, 0, 0, 5, 0, 0, 5, 0, 0});
  const std::vector<ClusterCenter> centers = {{5, 0, 0, 0.5, 0.5},
                                              {5, 0, 0, 2.5, 0.5}};
  const auto a = assign_pixels(lab, centers, 10, 2.0);
  EXPECT_EQ(a.labels[1], 0u);
  EXPECT_EQ(a.labels[2], 1u);
}

TEST(AssignPixels, UncoveredPixelsFallBackToNearestCenter) {
  const auto lab = rgb_to_lab(flat_image(20, 1, 7, 7, 7));
  const auto a = assign_pixels(lab, {ClusterCenter{0, 0, 0, 1.5, 0.5},
                                     ClusterCenter{0, 0, 0, 4.5, 0.5}},
                               10, 1.0);
  EXPECT_GT(a.fallback_pixels, 0u);
  for (std::size_t i = 6; i < 20; ++i) EXPECT_EQ(a.labels[i], 1u);
}

TEST(AssignPixels, PicksMinimumOverCoveringWindows) {
  Rng rng(3);
  ImageRGB img(24, 18);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  const auto lab = rgb_to_lab(img);
  const double S = grid_interval(lab.num_pixels(), 12);
  const auto centers = init_centers(lab, S);
  const auto a = assign_pixels(lab, centers, 12, S);
  EXPECT_EQ(a.fallback_pixels, 0u);
  // Brute force over the windows covering each pixel.
  for (int y = 0; y < lab.height; ++y) {
    for (int x = 0; x < lab.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * lab.width + x;
      const float* p = lab.pixel(i);
      const double labxy[5] = {p[0], p[1], p[2], x + 0.5, y + 0.5};
      double best = INFINITY;
      std::uint32_t best_id = 0;
      for (std::uint32_t id = 0; id < centers.size(); ++id) {
        if (std::abs(centers[id].x - (x + 0.5)) > S ||
            std::abs(centers[id].y - (y + 0.5)) > S) {
          continue;
        }
        const double d = slic_distance(centers[id], labxy, 12, S);
        if (d < best) {
          best = d;
          best_id = id;
        }
      }
      EXPECT_EQ(a.labels[i], best_id);
      EXPECT_DOUBLE_EQ(a.distance[i], best);
    }
  }
  // Each pixel lies in at most 4 windows when windows are 2S wide on an
  // S-spaced grid (plus boundary pixels shared by adjacent windows).
  EXPECT_LE(a.evaluations, lab.num_pixels() * 9);
}

TEST(AssignPixels, ThreadCountDoesNotChangeResult) {
  Rng rng(8);
  ImageRGB img(40, 30);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  const auto lab = rgb_to_lab(img);
  const double S = grid_interval(lab.num_pixels(), 20);
  const auto centers = perturb_centers(lab, init_centers(lab, S));
  const auto one = assign_pixels(lab, centers, 10, S, 1);
  const auto four = assign_pixels(lab, centers, 10, S, 4);
  EXPECT_EQ(one.labels, four.labels);
  EXPECT_EQ(one.distance, four.distance);
  EXPECT_EQ(one.evaluations, four.evaluations);
}

TEST(UpdateCenters, FixedPointHasZeroResidual) {
  const LabImage lab = lab_from(3, 1, {10, 0, 1, 20, 2, 1, 60, 4, 1});
  const std::vector<std::uint32_t> labels = {0, 0, 1};
  const auto first = update_centers(lab, labels, {ClusterCenter{}, ClusterCenter{}});
  const auto second = update_centers(lab, labels, first.centers);
  EXPECT_DOUBLE_EQ(second.residual, 0.0);
}

TEST(UpdateCenters, HandComputedCentroids) {
  const LabImage lab = lab_from(3, 1, {10, 0, 1, 20, 2, 1, 60, 4, 1});
  const std::vector<ClusterCenter> previous = {{15, 1, 1, 0.0, 0.5},
                                               {60, 4, 1, 2.5, 0.5}};
  const auto u = update_centers(lab, {0, 0, 1}, previous);
  EXPECT_DOUBLE_EQ(u.centers[0].l, 15.0);
  EXPECT_DOUBLE_EQ(u.centers[0].a, 1.0);
  EXPECT_DOUBLE_EQ(u.centers[0].b, 1.0);
  EXPECT_DOUBLE_EQ(u.centers[0].x, 1.0);
  EXPECT_DOUBLE_EQ(u.centers[0].y, 0.5);
  EXPECT_DOUBLE_EQ(u.centers[1].x, 2.5);
  // Only center 0 moved, by 1.0 in x.
  EXPECT_DOUBLE_EQ(u.residual, 1.0);
}

TEST(UpdateCenters, MeanOfTwoPixelsAndEmptyClusters) {
  const LabImage lab = lab_from(3, 1, {0, 0, 0, 0, 0, 0, 0, 0, 0});
  // Pixels 0 and 2 in cluster 0: centroid is pixel 1's center.
  const std::vector<ClusterCenter> previous = {{0, 0, 0, 1.5, 0.5},
                                               {0, 0, 0, 9.0, 9.0},
                                               {0, 0, 0, 1.5, 0.5}};
  const auto u = update_centers(lab, {0, 2, 0}, previous);
  EXPECT_DOUBLE_EQ(u.centers[0].x, 1.5);
  EXPECT_DOUBLE_EQ(u.centers[1].x, 9.0);  // empty, kept
  EXPECT_DOUBLE_EQ(u.centers[2].x, 1.5);
  EXPECT_DOUBLE_EQ(u.residual, 0.0);
}

TEST(EnforceConnectivity, ConnectedMapUnchanged) {
  // Two vertical halves with ids reversed relative to discovery order.
  std::vector<std::uint32_t> ids;
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 6; ++x) ids.push_back(x < 3 ? 1 : 0);
  }
  const auto map = make_superpixel_map(6, 6, ids);
  EXPECT_EQ(enforce_connectivity(map).ids, map.ids);
}

TEST(EnforceConnectivity, StrayPixelIsAbsorbed) {
  // 5x5 region 0 with one stray pixel of id 1 in the middle, plus a large
  // region 1 along the bottom rows so the stray is a separate component.
  std::vector<std::uint32_t> ids(25, 0);
  for (int x = 0; x < 5; ++x) ids[20 + x] = 1;
  for (int x = 0; x < 5; ++x) ids[15 + x] = 1;
  ids[6] = 1;
  const auto out = enforce_connectivity(make_superpixel_map(5, 5, ids));
  EXPECT_EQ(out.count, 2u);
  EXPECT_EQ(out.ids[6], out.ids[0]);
  EXPECT_TRUE(is_four_connected(out));
}

TEST(EnforceConnectivity, CheckerboardBecomesConnected) {
  std::vector<std::uint32_t> ids;
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) ids.push_back((x + y) % 2);
  }
  const auto out = enforce_connectivity(make_superpixel_map(8, 8, ids));
  EXPECT_TRUE(is_four_connected(out));
  EXPECT_GE(out.count, 1u);
}

TEST(RunSlic, QuadrantsArePure) {
  const auto img = quadrant_image(64);
  SlicParams params;
  params.k = 4;
  params.m = 10;
  const auto r = run_slic(img, params);
  for (int q = 0; q < 4; ++q) {
    std::vector<std::size_t> hist(r.map.count, 0);
    for (int y = 0; y < 32; ++y) {
      for (int x = 0; x < 32; ++x) {
        ++hist[r.map.at(x + (q % 2) * 32, y + (q / 2) * 32)];
      }
    }
    const auto top = *std::max_element(hist.begin(), hist.end());
    EXPECT_GE(static_cast<double>(top) / 1024.0, 0.95) << "quadrant " << q;
  }
  EXPECT_TRUE(is_four_connected(r.map));
  EXPECT_EQ(r.centers.size(), r.map.count);
}

TEST(RunSlic, FlatImageGivesEqualAreas) {
  SlicParams params;
  params.k = 4;
  const auto r = run_slic(flat_image(64, 64, 100, 100, 100), params);
  ASSERT_EQ(r.map.count, 4u);
  for (auto size : superpixel_sizes(r.map)) {
    EXPECT_NEAR(static_cast<double>(size) / 4096.0, 0.25, 0.10);
  }
}

TEST(RunSlic, OneSuperpixelPerPixel) {
  Rng rng(2);
  ImageRGB img(6, 5);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  SlicParams params;
  params.k = 30;
  params.enforce_connectivity = false;
  params.max_iters = 1;
  const auto lab = rgb_to_lab(img);
  // Before any update every pixel is the nearest to its own seed.
  const auto a = assign_pixels(lab, init_centers(lab, 1.0), params.m, 1.0);
  for (std::uint32_t i = 0; i < 30; ++i) EXPECT_EQ(a.labels[i], i);
  const auto r = run_slic(img, params);
  EXPECT_EQ(r.map.count, 30u);
  for (std::uint32_t i = 0; i < 30; ++i) EXPECT_EQ(r.map.ids[i], i);
}

TEST(RunSlic, DeterministicAcrossRunsAndThreads) {
  Rng rng(21);
  ImageRGB img(50, 40);
  for (auto& v : img.data) v = static_cast<std::uint8_t>(rng.below(256));
  SlicParams params;
  params.k = 25;
  const auto a = run_slic(img, params);
  const auto b = run_slic(img, params);
  params.threads = 3;
  const auto c = run_slic(img, params);
  EXPECT_EQ(a.map.ids, b.map.ids);
  EXPECT_EQ(a.map.ids, c.map.ids);
  EXPECT_TRUE(std::isfinite(a.final_residual));
  EXPECT_TRUE(is_four_connected(a.map));
}

}  // namespace
}  // namespace zok::slic
