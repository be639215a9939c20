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

#include <algorithm>
#include <cmath>
#include <limits>

#include "zok/error.hpp"
#include "zok/parallel.hpp"

namespace zok::crf {

namespace {

constexpr double kProbFloor = 1e-12;

// Row-normalized exp(-(cost - min cost)).
void softmax_neg(std::span<const double> cost, std::span<double> out) {
  const double lo = *std::min_element(cost.begin(), cost.end());
  double total = 0.0;
  for (std::size_t l = 0; l < cost.size(); ++l) {
    out[l] = std::exp(-(cost[l] - lo));
    total += out[l];
  }
  for (auto& v : out) v /= total;
}

// cost_i(l) = psi_i(l) + sum_{j != i} sum_l' mu(l, l') K_ij Q_j(l').
void node_cost(const CrfModel& model, const NodeFeatures& f, std::span<const double> q,
               std::size_t i, std::vector<double>& msg, std::vector<double>& cost) {
  const std::size_t c = model.num_labels;
  std::fill(msg.begin(), msg.end(), 0.0);
  if (!model.kernels.empty()) {
    const auto fi = f.row(i);
    for (std::size_t j = 0; j < model.num_nodes; ++j) {
      if (j == i) continue;
      const double k = kernel_sum(model, fi, f.row(j));
      if (k == 0.0) continue;
      const double* qj = &q[j * c];
      for (std::size_t l = 0; l < c; ++l) msg[l] += k * qj[l];
    }
  }
  for (std::size_t l = 0; l < c; ++l) {
    double pair = 0.0;
    for (std::size_t m = 0; m < c; ++m) pair += model.mu(l, m) * msg[m];
    cost[l] = model.psi(i, l) + pair;
  }
}

void check_enumerable(const CrfModel& model) {
  double states = 1.0;
  for (std::size_t i = 0; i < model.num_nodes; ++i) {
    states *= static_cast<double>(model.num_labels);
    if (states > static_cast<double>(kBruteForceLimit)) {
      fail("instance too large for enumeration: C^N exceeds 2^20");
    }
  }
}

}  // namespace

void CrfModel::validate(const NodeFeatures& f) const {
  require(num_labels >= 1, "CRF needs at least one label");
  require(unary.size() == num_nodes * num_labels, "unary table shape mismatch");
  require(compatibility.size() == num_labels * num_labels, "compatibility shape mismatch");
  require(f.nodes == num_nodes, "feature count does not match node count");
  require(f.data.size() == f.nodes * f.dims, "feature table shape mismatch");
  for (const auto& k : kernels) {
    require(k.weight >= 0.0, "kernel weights must be non-negative");
    const std::size_t used = k.dims.empty() ? f.dims : k.dims.size();
    require(k.precision.size() == used, "kernel precision length mismatch");
    for (double p : k.precision) require(p > 0.0, "kernel precision must be positive");
    for (auto d : k.dims) require(d < f.dims, "kernel feature column out of range");
  }
}

std::vector<double> potts(std::size_t num_labels) {
  std::vector<double> mu(num_labels * num_labels, 1.0);
  for (std::size_t l = 0; l < num_labels; ++l) mu[l * num_labels + l] = 0.0;
  return mu;
}

CrfModel model_from_probabilities(const Matrix& probs) {
  require(probs.rows > 0 && probs.cols > 0, "empty probability table");
  CrfModel model;
  model.num_nodes = probs.rows;
  model.num_labels = probs.cols;
  model.unary.resize(probs.data.size());
  for (std::size_t i = 0; i < probs.data.size(); ++i) {
    model.unary[i] = -std::log(std::max(kProbFloor, static_cast<double>(probs.data[i])));
  }
  model.compatibility = potts(probs.cols);
  return model;
}

double kernel_eval(std::span<const double> fi, std::span<const double> fj,
                   std::span<const double> precision) {
  require(fi.size() == fj.size() && fi.size() == precision.size(),
          "kernel feature dimensions disagree");
  double q = 0.0;
  for (std::size_t d = 0; d < fi.size(); ++d) {
    const double delta = fi[d] - fj[d];
    q += precision[d] * delta * delta;
  }
  return std::exp(-0.5 * q);
}

double kernel_eval(const Kernel& k, std::span<const double> fi, std::span<const double> fj) {
  if (k.dims.empty()) return kernel_eval(fi, fj, k.precision);
  double q = 0.0;
  for (std::size_t d = 0; d < k.dims.size(); ++d) {
    const double delta = fi[k.dims[d]] - fj[k.dims[d]];
    q += k.precision[d] * delta * delta;
  }
  return std::exp(-0.5 * q);
}

double kernel_sum(const CrfModel& model, std::span<const double> fi,
                  std::span<const double> fj) {
  double total = 0.0;
  for (const auto& k : model.kernels) {
    if (k.weight != 0.0) total += k.weight * kernel_eval(k, fi, fj);
  }
  return total;
}

double pairwise_potential(std::uint32_t xi, std::uint32_t xj, std::span<const double> fi,
                          std::span<const double> fj, const CrfModel& model) {
  require(xi < model.num_labels && xj < model.num_labels, "label out of range");
  const double mu = model.mu(xi, xj);
  if (mu == 0.0) return 0.0;
  return mu * kernel_sum(model, fi, fj);
}

double gibbs_energy(std::span<const std::uint32_t> labeling, const CrfModel& model,
                    const NodeFeatures& features) {
  model.validate(features);
  require(labeling.size() == model.num_nodes, "labeling length mismatch");
  double e = 0.0;
  for (std::size_t i = 0; i < model.num_nodes; ++i) {
    require(labeling[i] < model.num_labels, "label out of range");
    e += model.psi(i, labeling[i]);
  }
  for (std::size_t i = 0; i < model.num_nodes; ++i) {
    for (std::size_t j = i + 1; j < model.num_nodes; ++j) {
      e += pairwise_potential(labeling[i], labeling[j], features.row(i), features.row(j), model);
    }
  }
  return e;
}

std::vector<std::uint32_t> labeling_from_index(std::size_t index, std::size_t nodes,
                                               std::size_t labels) {
  std::vector<std::uint32_t> x(nodes);
  for (std::size_t i = 0; i < nodes; ++i) {
    x[i] = static_cast<std::uint32_t>(index % labels);
    index /= labels;
  }
  return x;
}

GibbsTable gibbs_distribution_bruteforce(const CrfModel& model, const NodeFeatures& features) {
  model.validate(features);
  check_enumerable(model);
  std::size_t states = 1;
  for (std::size_t i = 0; i < model.num_nodes; ++i) states *= model.num_labels;
  GibbsTable table;
  table.probability.resize(states);
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < states; ++s) {
    table.probability[s] =
        gibbs_energy(labeling_from_index(s, model.num_nodes, model.num_labels), model, features);
    lo = std::min(lo, table.probability[s]);
  }
  double z = 0.0;
  for (auto& p : table.probability) {
    p = std::exp(-(p - lo));
    z += p;
  }
  for (auto& p : table.probability) p /= z;
  table.log_partition = std::log(z) - lo;
  return table;
}

std::vector<std::uint32_t> bruteforce_map(const CrfModel& model, const NodeFeatures& features) {
  model.validate(features);
  check_enumerable(model);
  std::size_t states = 1;
  for (std::size_t i = 0; i < model.num_nodes; ++i) states *= model.num_labels;
  std::size_t best = 0;
  double best_e = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < states; ++s) {
    const double e =
        gibbs_energy(labeling_from_index(s, model.num_nodes, model.num_labels), model, features);
    if (e < best_e) {
      best_e = e;
      best = s;
    }
  }
  return labeling_from_index(best, model.num_nodes, model.num_labels);
}

std::vector<double> marginals(const GibbsTable& table, std::size_t nodes, std::size_t labels) {
  std::vector<double> m(nodes * labels, 0.0);
  for (std::size_t s = 0; s < table.probability.size(); ++s) {
    std::size_t index = s;
    for (std::size_t i = 0; i < nodes; ++i) {
      m[i * labels + index % labels] += table.probability[s];
      index /= labels;
    }
  }
  return m;
}

UpdateMode parse_update_mode(const std::string& text) {
  if (text == "parallel") return UpdateMode::kParallel;
  if (text == "sequential") return UpdateMode::kSequential;
  fail("unknown mean-field mode '" + text + "' (expected parallel or sequential)");
}

MeanFieldState mean_field_refine(const CrfModel& model, const NodeFeatures& features,
                                 const MeanFieldConfig& cfg) {
  model.validate(features);
  require(cfg.iterations >= 1, "mean-field iterations must be >= 1");
  require(cfg.damping >= 0.0 && cfg.damping < 1.0, "damping must lie in [0, 1)");
  const std::size_t n = model.num_nodes, c = model.num_labels;
  MeanFieldState state;
  state.num_nodes = n;
  state.num_labels = c;
  state.q.resize(n * c);
  for (std::size_t i = 0; i < n; ++i) {
    softmax_neg({&model.unary[i * c], c}, {&state.q[i * c], c});
  }
  std::vector<double> next(n * c);
  for (int it = 0; it < cfg.iterations; ++it) {
    if (cfg.mode == UpdateMode::kParallel) {
      parallel_for_chunks(n, cfg.threads, [&](std::size_t begin, std::size_t end) {
        std::vector<double> msg(c), cost(c);
        for (std::size_t i = begin; i < end; ++i) {
          node_cost(model, features, state.q, i, msg, cost);
          softmax_neg(cost, {&next[i * c], c});
          for (std::size_t l = 0; l < c; ++l) {
            next[i * c + l] = cfg.damping * state.q[i * c + l] +
                              (1.0 - cfg.damping) * next[i * c + l];
          }
        }
      });
      state.q.swap(next);
    } else {
      std::vector<double> msg(c), cost(c), fresh(c);
      for (std::size_t i = 0; i < n; ++i) {
        node_cost(model, features, state.q, i, msg, cost);
        softmax_neg(cost, fresh);
        for (std::size_t l = 0; l < c; ++l) {
          state.q[i * c + l] = cfg.damping * state.q[i * c + l] + (1.0 - cfg.damping) * fresh[l];
        }
      }
    }
    ++state.iterations;
  }
  return state;
}

double free_energy(const MeanFieldState& state, const CrfModel& model,
                   const NodeFeatures& features) {
  model.validate(features);
  const std::size_t n = model.num_nodes, c = model.num_labels;
  double energy = 0.0, entropy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < c; ++l) {
      const double q = state.q[i * c + l];
      energy += q * model.psi(i, l);
      if (q > 0.0) entropy -= q * std::log(q);
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      const double k = kernel_sum(model, features.row(i), features.row(j));
      if (k == 0.0) continue;
      for (std::size_t a = 0; a < c; ++a) {
        for (std::size_t b = 0; b < c; ++b) {
          energy += state.q[i * c + a] * state.q[j * c + b] * model.mu(a, b) * k;
        }
      }
    }
  }
  return energy - entropy;
}

std::vector<std::uint32_t> map_labels(const MeanFieldState& state) {
  std::vector<std::uint32_t> out(state.num_nodes);
  for (std::size_t i = 0; i < state.num_nodes; ++i) {
    const auto q = state.row(i);
    std::size_t best = 0;
    for (std::size_t l = 1; l < q.size(); ++l) {
      if (q[l] > q[best]) best = l;
    }
    out[i] = static_cast<std::uint32_t>(best);
  }
  return out;
}

void add_image_kernels(CrfModel& model, const ImageKernelParams& p) {
  require(p.sigma_xy_appearance > 0 && p.sigma_l > 0 && p.sigma_ab > 0 && p.sigma_xy_smooth > 0,
          "kernel bandwidths must be positive");
  auto inv2 = [](double s) { return 1.0 / (s * s); };
  Kernel appearance;
  appearance.weight = p.w_appearance;
  appearance.dims = {0, 1, 2, 3, 4};
  appearance.precision = {inv2(p.sigma_xy_appearance), inv2(p.sigma_xy_appearance),
                          inv2(p.sigma_l), inv2(p.sigma_ab), inv2(p.sigma_ab)};
  Kernel smooth;
  smooth.weight = p.w_smooth;
  smooth.dims = {0, 1};
  smooth.precision = {inv2(p.sigma_xy_smooth), inv2(p.sigma_xy_smooth)};
  model.kernels.push_back(std::move(appearance));
  model.kernels.push_back(std::move(smooth));
}

NodeFeatures pixel_features(const LabImage& lab) {
  NodeFeatures f;
  f.nodes = lab.num_pixels();
  f.dims = 5;
  f.data.reserve(f.nodes * 5);
  for (int y = 0; y < lab.height; ++y) {
    for (int x = 0; x < lab.width; ++x) {
      const float* p = lab.pixel(x, y);
      f.data.insert(f.data.end(), {x + 0.5, y + 0.5, double(p[0]), double(p[1]), double(p[2])});
    }
  }
  return f;
}

NodeFeatures superpixel_features(const LabImage& lab, const SuperpixelMap& map) {
  require(lab.width == map.width && lab.height == map.height,
          "image and superpixel map differ in size");
  NodeFeatures f;
  f.nodes = map.count;
  f.dims = 5;
  f.data.assign(f.nodes * 5, 0.0);
  std::vector<double> count(f.nodes, 0.0);
  for (int y = 0; y < lab.height; ++y) {
    for (int x = 0; x < lab.width; ++x) {
      const std::uint32_t s = map.at(x, y);
      const float* p = lab.pixel(x, y);
      double* row = &f.data[s * 5];
      row[0] += x + 0.5;
      row[1] += y + 0.5;
      for (int k = 0; k < 3; ++k) row[2 + k] += p[k];
      count[s] += 1.0;
    }
  }
  for (std::size_t s = 0; s < f.nodes; ++s) {
    for (int k = 0; k < 5; ++k) f.data[s * 5 + k] /= count[s];
  }
  return f;
}

}  // namespace zok::crf
