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

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>

#include "zok/error.hpp"
#include "zok/parallel.hpp"

namespace zok::slic {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int clampi(int v, int lo, int hi) { return std::min(std::max(v, lo), hi); }

double sq(double v) { return v * v; }

ClusterCenter center_at_pixel(const LabImage& lab, int px, int py) {
  const float* p = lab.pixel(px, py);
  return {p[0], p[1], p[2], px + 0.5, py + 0.5};
}

// First pixel index spanned by a window of half-width S around c.
int window_lo(double c, double S, int extent) {
  return clampi(static_cast<int>(std::ceil(c - S - 0.5)), 0, extent);
}
int window_hi(double c, double S, int extent) {
  return clampi(static_cast<int>(std::floor(c + S - 0.5)), -1, extent - 1);
}

}  // namespace

double grid_interval(std::size_t num_pixels, int k) {
  if (k < 1) fail("superpixel count k must be >= 1");
  if (num_pixels < static_cast<std::size_t>(k)) {
    fail("superpixel count k exceeds pixel count");
  }
  return std::sqrt(static_cast<double>(num_pixels) / k);
}

std::vector<ClusterCenter> init_centers(const LabImage& lab, double S) {
  require(S >= 1.0, "grid interval must be >= 1");
  const int nx = static_cast<int>(std::ceil(lab.width / S));
  const int ny = static_cast<int>(std::ceil(lab.height / S));
  std::vector<ClusterCenter> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double x = std::min(S / 2 + i * S, lab.width - 0.5);
      const double y = std::min(S / 2 + j * S, lab.height - 0.5);
      const int px = clampi(static_cast<int>(std::floor(x)), 0, lab.width - 1);
      const int py = clampi(static_cast<int>(std::floor(y)), 0, lab.height - 1);
      ClusterCenter c = center_at_pixel(lab, px, py);
      c.x = x;
      c.y = y;
      centers.push_back(c);
    }
  }
  return centers;
}

double gradient_at(const LabImage& lab, int x, int y) {
  const int w = lab.width, h = lab.height;
  const float* xp = lab.pixel(clampi(x + 1, 0, w - 1), y);
  const float* xm = lab.pixel(clampi(x - 1, 0, w - 1), y);
  const float* yp = lab.pixel(x, clampi(y + 1, 0, h - 1));
  const float* ym = lab.pixel(x, clampi(y - 1, 0, h - 1));
  double g = 0.0;
  for (int c = 0; c < 3; ++c) g += sq(xp[c] - xm[c]) + sq(yp[c] - ym[c]);
  return g;
}

std::vector<ClusterCenter> perturb_centers(const LabImage& lab,
                                           std::vector<ClusterCenter> centers) {
  for (auto& c : centers) {
    const int x0 = clampi(static_cast<int>(std::floor(c.x)), 0, lab.width - 1);
    const int y0 = clampi(static_cast<int>(std::floor(c.y)), 0, lab.height - 1);
    double best = gradient_at(lab, x0, y0);
    int bx = x0, by = y0;
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        const int x = x0 + dx, y = y0 + dy;
        if (x < 0 || y < 0 || x >= lab.width || y >= lab.height) continue;
        const double g = gradient_at(lab, x, y);
        if (g < best) {
          best = g;
          bx = x;
          by = y;
        }
      }
    }
    if (bx != x0 || by != y0) c = center_at_pixel(lab, bx, by);
  }
  return centers;
}

double slic_distance(const ClusterCenter& c, const double* labxy, double m,
                     double S) {
  const double d_lab =
      std::sqrt(sq(c.l - labxy[0]) + sq(c.a - labxy[1]) + sq(c.b - labxy[2]));
  const double d_xy = std::sqrt(sq(c.x - labxy[3]) + sq(c.y - labxy[4]));
  return d_lab + (m / S) * d_xy;
}

Assignment assign_pixels(const LabImage& lab,
                         const std::vector<ClusterCenter>& centers, double m,
                         double S, int threads) {
  require(!centers.empty(), "assign_pixels needs at least one center");
  const int w = lab.width, h = lab.height;
  Assignment out;
  out.width = w;
  out.height = h;
  out.labels.assign(lab.num_pixels(), 0);
  out.distance.assign(lab.num_pixels(), kInf);

  std::atomic<std::size_t> total_evals{0};
  // Row bands are disjoint; within a band centers run in ascending id order
  // with a strict comparison, so ties keep the smallest id.
  parallel_for_chunks(static_cast<std::size_t>(h), threads,
                      [&](std::size_t row_begin, std::size_t row_end) {
    std::size_t evals = 0;
    for (std::uint32_t id = 0; id < centers.size(); ++id) {
      const ClusterCenter& c = centers[id];
      const int y_lo = std::max(window_lo(c.y, S, h), static_cast<int>(row_begin));
      const int y_hi = std::min(window_hi(c.y, S, h), static_cast<int>(row_end) - 1);
      const int x_lo = window_lo(c.x, S, w);
      const int x_hi = window_hi(c.x, S, w);
      for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          const float* p = lab.pixel(i);
          const double labxy[5] = {p[0], p[1], p[2], x + 0.5, y + 0.5};
          const double d = slic_distance(c, labxy, m, S);
          ++evals;
          if (d < out.distance[i]) {
            out.distance[i] = d;
            out.labels[i] = id;
          }
        }
      }
    }
    total_evals += evals;
  });
  out.evaluations = total_evals;

  for (std::size_t i = 0; i < out.labels.size(); ++i) {
    if (out.distance[i] != kInf) continue;
    ++out.fallback_pixels;
    const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
    const float* p = lab.pixel(i);
    const double labxy[5] = {p[0], p[1], p[2], x + 0.5, y + 0.5};
    for (std::uint32_t id = 0; id < centers.size(); ++id) {
      const double d = slic_distance(centers[id], labxy, m, S);
      if (d < out.distance[i]) {
        out.distance[i] = d;
        out.labels[i] = id;
      }
    }
  }
  return out;
}

CenterUpdate update_centers(const LabImage& lab,
                            const std::vector<std::uint32_t>& labels,
                            const std::vector<ClusterCenter>& previous) {
  require(labels.size() == lab.num_pixels(), "label count mismatch");
  const std::size_t k = previous.size();
  std::vector<std::array<double, 5>> sums(k, {0, 0, 0, 0, 0});
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::uint32_t id = labels[i];
    require(id < k, "label refers to a missing center");
    const float* p = lab.pixel(i);
    auto& s = sums[id];
    s[0] += p[0];
    s[1] += p[1];
    s[2] += p[2];
    s[3] += static_cast<double>(i % lab.width) + 0.5;
    s[4] += static_cast<double>(i / lab.width) + 0.5;
    ++counts[id];
  }
  CenterUpdate out;
  out.centers = previous;
  for (std::size_t id = 0; id < k; ++id) {
    if (counts[id] == 0) continue;
    const double n = static_cast<double>(counts[id]);
    ClusterCenter c{sums[id][0] / n, sums[id][1] / n, sums[id][2] / n,
                    sums[id][3] / n, sums[id][4] / n};
    const ClusterCenter& o = previous[id];
    out.residual += std::sqrt(sq(c.l - o.l) + sq(c.a - o.a) + sq(c.b - o.b) +
                              sq(c.x - o.x) + sq(c.y - o.y));
    out.centers[id] = c;
  }
  return out;
}

SuperpixelMap compact_ids(int width, int height,
                          const std::vector<std::uint32_t>& labels) {
  require(!labels.empty(), "empty label field");
  const std::uint32_t max_id = *std::max_element(labels.begin(), labels.end());
  std::vector<std::uint32_t> remap(static_cast<std::size_t>(max_id) + 1,
                                   std::numeric_limits<std::uint32_t>::max());
  for (auto id : labels) remap[id] = 0;
  std::uint32_t next = 0;
  for (auto& r : remap) {
    if (r == 0) r = next++;
  }
  std::vector<std::uint32_t> ids(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) ids[i] = remap[labels[i]];
  return make_superpixel_map(width, height, std::move(ids));
}

SuperpixelMap enforce_connectivity(const SuperpixelMap& map) {
  const int w = map.width, h = map.height;
  const std::size_t n = map.num_pixels();
  constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

  // 4-connected components in row-major discovery order.
  std::vector<std::uint32_t> comp(n, kNone);
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::uint32_t> comp_label;
  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (comp[seed] != kNone) continue;
    const auto c = static_cast<std::uint32_t>(members.size());
    members.emplace_back();
    comp_label.push_back(map.ids[seed]);
    comp[seed] = c;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      members[c].push_back(i);
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      const int nx[4] = {x - 1, x + 1, x, x};
      const int ny[4] = {y, y, y - 1, y + 1};
      for (int d = 0; d < 4; ++d) {
        if (nx[d] < 0 || ny[d] < 0 || nx[d] >= w || ny[d] >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny[d]) * w + nx[d];
        if (comp[j] == kNone && map.ids[j] == map.ids[seed]) {
          comp[j] = c;
          queue.push_back(j);
        }
      }
    }
  }

  const std::size_t num_comps = members.size();
  const double min_size = static_cast<double>(n) / std::max<std::uint32_t>(map.count, 1) / 4.0;
  std::vector<std::uint32_t> parent(num_comps);
  std::iota(parent.begin(), parent.end(), 0u);
  auto find = [&](std::uint32_t c) {
    while (parent[c] != c) c = parent[c] = parent[parent[c]];
    return c;
  };
  std::vector<std::size_t> root_size(num_comps);
  for (std::size_t c = 0; c < num_comps; ++c) root_size[c] = members[c].size();
  // Pixels owned by each root, including absorbed components.
  std::vector<std::vector<std::uint32_t>> absorbed(num_comps);
  for (std::uint32_t c = 0; c < num_comps; ++c) absorbed[c] = {c};

  std::vector<std::uint32_t> order(num_comps);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    return members[a].size() < members[b].size();
  });

  bool changed = true;
  while (changed) {
    changed = false;
    for (std::uint32_t c : order) {
      if (find(c) != c || static_cast<double>(root_size[c]) >= min_size) continue;
      // Boundary edge counts to neighboring roots.
      std::vector<std::pair<std::uint32_t, std::size_t>> counts;
      for (std::uint32_t part : absorbed[c]) {
        for (std::size_t i : members[part]) {
          const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
          const int nx[4] = {x - 1, x + 1, x, x};
          const int ny[4] = {y, y, y - 1, y + 1};
          for (int d = 0; d < 4; ++d) {
            if (nx[d] < 0 || ny[d] < 0 || nx[d] >= w || ny[d] >= h) continue;
            const std::uint32_t r =
                find(comp[static_cast<std::size_t>(ny[d]) * w + nx[d]]);
            if (r == c) continue;
            auto it = std::find_if(counts.begin(), counts.end(),
                                   [r](const auto& e) { return e.first == r; });
            if (it == counts.end()) {
              counts.emplace_back(r, 1);
            } else {
              ++it->second;
            }
          }
        }
      }
      if (counts.empty()) continue;
      std::uint32_t target = counts.front().first;
      std::size_t best = counts.front().second;
      for (const auto& [r, cnt] : counts) {
        if (cnt > best || (cnt == best && r < target)) {
          target = r;
          best = cnt;
        }
      }
      parent[c] = target;
      root_size[target] += root_size[c];
      absorbed[target].insert(absorbed[target].end(), absorbed[c].begin(),
                              absorbed[c].end());
      absorbed[c].clear();
      changed = true;
    }
  }

  // Final ids ordered by (original label, discovery order) of each root.
  std::vector<std::uint32_t> roots;
  for (std::uint32_t c = 0; c < num_comps; ++c) {
    if (find(c) == c) roots.push_back(c);
  }
  std::stable_sort(roots.begin(), roots.end(), [&](std::uint32_t a, std::uint32_t b) {
    return comp_label[a] < comp_label[b];
  });
  std::vector<std::uint32_t> final_id(num_comps, kNone);
  for (std::uint32_t k = 0; k < roots.size(); ++k) final_id[roots[k]] = k;
  std::vector<std::uint32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = final_id[find(comp[i])];
  return make_superpixel_map(w, h, std::move(ids));
}

std::vector<ClusterCenter> region_centers(const LabImage& lab,
                                          const SuperpixelMap& map) {
  std::vector<ClusterCenter> seed(map.count);
  return update_centers(lab, map.ids, seed).centers;
}

SlicResult run_slic(const LabImage& lab, const SlicParams& params) {
  require(params.m > 0.0, "compactness m must be > 0");
  require(params.max_iters >= 1, "max_iters must be >= 1");
  const double S = grid_interval(lab.num_pixels(), params.k);
  auto centers = init_centers(lab, S);
  // Below S = 3 the 3x3 search reaches into neighboring seeds' cells.
  if (S >= 3.0) centers = perturb_centers(lab, std::move(centers));

  SlicResult result;
  Assignment assignment;
  double residual = kInf;
  while (result.iterations_run < params.max_iters) {
    assignment = assign_pixels(lab, centers, params.m, S, params.threads);
    auto update = update_centers(lab, assignment.labels, centers);
    centers = std::move(update.centers);
    residual = update.residual;
    ++result.iterations_run;
    if (residual < params.residual_threshold) break;
  }
  result.final_residual = residual;
  result.map = compact_ids(lab.width, lab.height, assignment.labels);
  if (params.enforce_connectivity) result.map = enforce_connectivity(result.map);
  result.centers = region_centers(lab, result.map);
  return result;
}

SlicResult run_slic(const ImageRGB& img, const SlicParams& params) {
  return run_slic(rgb_to_lab(img), params);
}

}  // namespace zok::slic
