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
#include <span>
#include <string>
#include <vector>

#include "zok/core_io.hpp"

namespace zok::crf {

// Per-node feature vectors, row-major N x D.
struct NodeFeatures {
  std::size_t nodes = 0;
  std::size_t dims = 0;
  std::vector<double> data;

  std::span<const double> row(std::size_t i) const { return {&data[i * dims], dims}; }
};

// Gaussian kernel over a subset of feature columns with diagonal
// precision.
struct Kernel {
  double weight = 1.0;
  std::vector<std::size_t> dims;   // empty = all columns
  std::vector<double> precision;   // one per used column
};

struct CrfModel {
  std::size_t num_nodes = 0;
  std::size_t num_labels = 0;
  std::vector<double> unary;          // N x C costs
  std::vector<Kernel> kernels;
  std::vector<double> compatibility;  // C x C

  double psi(std::size_t i, std::size_t l) const { return unary[i * num_labels + l]; }
  double mu(std::size_t a, std::size_t b) const { return compatibility[a * num_labels + b]; }
  void validate(const NodeFeatures& f) const;
};

std::vector<double> potts(std::size_t num_labels);

// Costs -log max(p, 1e-12) from an N x C probability matrix, Potts
// compatibility, no kernels.
CrfModel model_from_probabilities(const Matrix& probs);

double kernel_eval(std::span<const double> fi, std::span<const double> fj,
                   std::span<const double> precision);
double kernel_eval(const Kernel& k, std::span<const double> fi, std::span<const double> fj);
// Sum_m w_m k_m(f_i, f_j).
double kernel_sum(const CrfModel& model, std::span<const double> fi,
                  std::span<const double> fj);

double pairwise_potential(std::uint32_t xi, std::uint32_t xj, std::span<const double> fi,
                          std::span<const double> fj, const CrfModel& model);

// Unary sum plus each unordered pair once.
double gibbs_energy(std::span<const std::uint32_t> labeling, const CrfModel& model,
                    const NodeFeatures& features);

inline constexpr std::size_t kBruteForceLimit = std::size_t{1} << 20;

// Labeling index = sum_i x_i C^i.
std::vector<std::uint32_t> labeling_from_index(std::size_t index, std::size_t nodes,
                                               std::size_t labels);

struct GibbsTable {
  std::vector<double> probability;  // indexed by labeling index
  double log_partition = 0.0;
};

GibbsTable gibbs_distribution_bruteforce(const CrfModel& model, const NodeFeatures& features);
// Minimum-energy labeling by enumeration (ties: smallest index).
std::vector<std::uint32_t> bruteforce_map(const CrfModel& model, const NodeFeatures& features);
// Node marginals N x C from a Gibbs table.
std::vector<double> marginals(const GibbsTable& table, std::size_t nodes, std::size_t labels);

enum class UpdateMode { kParallel, kSequential };

UpdateMode parse_update_mode(const std::string& text);

struct MeanFieldConfig {
  int iterations = 10;
  double damping = 0.5;
  UpdateMode mode = UpdateMode::kParallel;
  int threads = 1;
};

struct MeanFieldState {
  std::size_t num_nodes = 0;
  std::size_t num_labels = 0;
  std::vector<double> q;  // N x C
  int iterations = 0;

  std::span<const double> row(std::size_t i) const {
    return {&q[i * num_labels], num_labels};
  }
};

// Q starts at softmax(-psi). Each iteration updates every node from
// Q_i(l) ~ exp(-psi_i(l) - sum_j sum_l' mu(l,l') K_ij Q_j(l')) and mixes
// damping * old + (1 - damping) * new, all nodes at once (parallel) or one
// node at a time in index order (sequential).
MeanFieldState mean_field_refine(const CrfModel& model, const NodeFeatures& features,
                                 const MeanFieldConfig& cfg);

// E_Q[E] - H(Q).
double free_energy(const MeanFieldState& state, const CrfModel& model,
                   const NodeFeatures& features);

// Per-node argmax, ties to the smallest label.
std::vector<std::uint32_t> map_labels(const MeanFieldState& state);

// Appearance kernel on (x, y, L, a, b) and smoothness kernel on (x, y).
struct ImageKernelParams {
  double w_appearance = 3.0;
  double w_smooth = 1.0;
  double sigma_xy_appearance = 20.0;
  double sigma_l = 10.0;
  double sigma_ab = 10.0;
  double sigma_xy_smooth = 3.0;
};

void add_image_kernels(CrfModel& model, const ImageKernelParams& params);

// Node features (x, y, L, a, b): pixel centers for per-pixel nodes, or
// superpixel centroids and mean Lab.
NodeFeatures pixel_features(const LabImage& lab);
NodeFeatures superpixel_features(const LabImage& lab, const SuperpixelMap& map);

}  // namespace zok::crf
