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
#include <vector>

#include "zok/core_io.hpp"

namespace zok::slic {

struct SlicParams {
  int k = 500;
  double m = 15.0;
  int max_iters = 10;
  // Total labxy center movement below which iteration stops.
  double residual_threshold = 1.0;
  bool enforce_connectivity = true;
  int threads = 1;
};

// Center in continuous image coordinates: pixel (i, j) covers
// [i, i+1) x [j, j+1) and sits at (i + 0.5, j + 0.5).
struct ClusterCenter {
  double l = 0, a = 0, b = 0;
  double x = 0, y = 0;
};

struct Assignment {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> labels;  // center index per pixel
  std::vector<double> distance;       // best D_s per pixel
  std::size_t evaluations = 0;        // distance computations inside windows
  std::size_t fallback_pixels = 0;    // pixels no window reached
};

struct SlicResult {
  SuperpixelMap map;
  std::vector<ClusterCenter> centers;  // indexed by final superpixel id
  int iterations_run = 0;
  double final_residual = 0.0;
};

double grid_interval(std::size_t num_pixels, int k);

std::vector<ClusterCenter> init_centers(const LabImage& lab, double S);

// Moves each center to the lowest-gradient pixel of its 3x3 neighborhood.
// The current pixel wins ties; other ties go to the smallest row-major index.
std::vector<ClusterCenter> perturb_centers(const LabImage& lab,
                                           std::vector<ClusterCenter> centers);

// Squared central-difference Lab gradient with clamped borders.
double gradient_at(const LabImage& lab, int x, int y);

double slic_distance(const ClusterCenter& c, const double* labxy, double m,
                     double S);

Assignment assign_pixels(const LabImage& lab,
                         const std::vector<ClusterCenter>& centers, double m,
                         double S, int threads = 1);

struct CenterUpdate {
  std::vector<ClusterCenter> centers;
  double residual = 0.0;
};

// Recomputes centers as labxy means; clusters with no pixels keep their
// previous center.
CenterUpdate update_centers(const LabImage& lab,
                            const std::vector<std::uint32_t>& labels,
                            const std::vector<ClusterCenter>& previous);

SuperpixelMap enforce_connectivity(const SuperpixelMap& map);

// Closes gaps in the id range, preserving the order of surviving ids.
SuperpixelMap compact_ids(int width, int height,
                          const std::vector<std::uint32_t>& labels);

SlicResult run_slic(const ImageRGB& img, const SlicParams& params);
SlicResult run_slic(const LabImage& lab, const SlicParams& params);

// Centers recomputed from a final map (one per id).
std::vector<ClusterCenter> region_centers(const LabImage& lab,
                                          const SuperpixelMap& map);

}  // namespace zok::slic
