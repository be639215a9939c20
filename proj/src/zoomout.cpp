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

#include "zok/zoomout.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <sstream>

#include "zok/error.hpp"

namespace zok::zoomout {
namespace {

constexpr float kLabRanges[3][2] = {{0.0f, 100.0f}, {-110.0f, 110.0f}, {-110.0f, 110.0f}};

int fixed_bin(float v, float lo, float hi, int bins) {
  const double t = (static_cast<double>(v) - lo) / (hi - lo);
  const int b = static_cast<int>(std::floor(t * bins));
  return std::clamp(b, 0, bins - 1);
}

// Bin edges at the per-image quantiles j/bins, j = 1..bins-1.
std::vector<float> quantile_edges(std::vector<float> values, int bins) {
  std::sort(values.begin(), values.end());
  std::vector<float> edges;
  edges.reserve(bins - 1);
  const std::size_t n = values.size();
  for (int j = 1; j < bins; ++j) {
    const std::size_t idx = std::min(n - 1, j * n / bins);
    edges.push_back(values[idx]);
  }
  return edges;
}

int adaptive_bin(float v, const std::vector<float>& edges) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), v) -
                          edges.begin());
}

double entropy(std::span<const float> hist) {
  double h = 0.0;
  for (float p : hist) {
    if (p > 0.0f) h -= p * std::log(static_cast<double>(p));
  }
  return h;
}

Matrix replicate(const std::vector<float>& v, std::size_t rows) {
  Matrix m(rows, v.size());
  for (std::size_t r = 0; r < rows; ++r) std::copy(v.begin(), v.end(), m.row(r).begin());
  return m;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  require(a.rows == b.rows, "row count mismatch");
  Matrix m(a.rows, a.cols + b.cols);
  for (std::size_t r = 0; r < a.rows; ++r) {
    std::copy(a.row(r).begin(), a.row(r).end(), m.row(r).begin());
    std::copy(b.row(r).begin(), b.row(r).end(), m.row(r).begin() + a.cols);
  }
  return m;
}

FeatureMap mirror_featuremap(const FeatureMap& fm) {
  FeatureMap out = fm;
  for (int c = 0; c < fm.channels; ++c) {
    for (int y = 0; y < fm.height; ++y) {
      for (int x = 0; x < fm.width; ++x) out.at(c, y, fm.width - 1 - x) = fm.at(c, y, x);
    }
  }
  return out;
}

}  // namespace

std::size_t AdjacencyGraph::num_edges() const {
  std::size_t twice = 0;
  for (const auto& n : neighbors) twice += n.size();
  return twice / 2;
}

AdjacencyGraph build_adjacency(const SuperpixelMap& map) {
  AdjacencyGraph g;
  g.neighbors.resize(map.count);
  auto link = [&](std::uint32_t a, std::uint32_t b) {
    if (a == b) return;
    g.neighbors[a].push_back(b);
    g.neighbors[b].push_back(a);
  };
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (x + 1 < map.width) link(map.at(x, y), map.at(x + 1, y));
      if (y + 1 < map.height) link(map.at(x, y), map.at(x, y + 1));
    }
  }
  for (auto& n : g.neighbors) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return g;
}

std::vector<std::uint32_t> neighbors_within_radius(const AdjacencyGraph& g,
                                                   std::uint32_t s, int r) {
  require(s < g.size(), "superpixel index out of range");
  std::vector<int> depth(g.size(), -1);
  std::deque<std::uint32_t> queue = {s};
  depth[s] = 0;
  std::vector<std::uint32_t> ball;
  while (!queue.empty()) {
    const std::uint32_t u = queue.front();
    queue.pop_front();
    ball.push_back(u);
    if (depth[u] == r) continue;
    for (std::uint32_t v : g.neighbors[u]) {
      if (depth[v] < 0) {
        depth[v] = depth[u] + 1;
        queue.push_back(v);
      }
    }
  }
  std::sort(ball.begin(), ball.end());
  return ball;
}

FeatureMap featuremap_from_tensor(const Tensor& t) {
  FeatureMap fm;
  if (t.rank() == 3) {
    fm.channels = static_cast<int>(t.dims()[0]);
    fm.height = static_cast<int>(t.dims()[1]);
    fm.width = static_cast<int>(t.dims()[2]);
  } else if (t.rank() == 2) {
    fm.channels = 1;
    fm.height = static_cast<int>(t.dims()[0]);
    fm.width = static_cast<int>(t.dims()[1]);
  } else {
    fail("feature map tensor must be C x H x W");
  }
  fm.data = t.to_f32();
  return fm;
}

Tensor to_tensor(const FeatureMap& fm) {
  return Tensor::f32({static_cast<std::uint32_t>(fm.channels),
                      static_cast<std::uint32_t>(fm.height),
                      static_cast<std::uint32_t>(fm.width)},
                     fm.data);
}

FeatureMap lab_feature_map(const LabImage& lab) {
  FeatureMap fm;
  fm.channels = 3;
  fm.height = lab.height;
  fm.width = lab.width;
  fm.data.resize(lab.data.size());
  const std::size_t n = lab.num_pixels();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) fm.data[c * n + i] = lab.data[3 * i + c];
  }
  return fm;
}

FeatureMap upsample_featuremap(const FeatureMap& fm, int height, int width,
                               Upsample mode) {
  require(height >= 1 && width >= 1, "target size must be positive");
  FeatureMap out;
  out.channels = fm.channels;
  out.height = height;
  out.width = width;
  out.data.resize(static_cast<std::size_t>(fm.channels) * height * width);
  if (mode == Upsample::kNearest) {
    for (int c = 0; c < fm.channels; ++c) {
      for (int y = 0; y < height; ++y) {
        const int sy = static_cast<int>(static_cast<long>(y) * fm.height / height);
        for (int x = 0; x < width; ++x) {
          const int sx = static_cast<int>(static_cast<long>(x) * fm.width / width);
          out.at(c, y, x) = fm.at(c, sy, sx);
        }
      }
    }
    return out;
  }
  // Bilinear, align_corners = false.
  const double sy_scale = static_cast<double>(fm.height) / height;
  const double sx_scale = static_cast<double>(fm.width) / width;
  for (int y = 0; y < height; ++y) {
    const double sy = std::max(0.0, (y + 0.5) * sy_scale - 0.5);
    const int y0 = std::min(static_cast<int>(sy), fm.height - 1);
    const int y1 = std::min(y0 + 1, fm.height - 1);
    const double wy = sy - y0;
    for (int x = 0; x < width; ++x) {
      const double sx = std::max(0.0, (x + 0.5) * sx_scale - 0.5);
      const int x0 = std::min(static_cast<int>(sx), fm.width - 1);
      const int x1 = std::min(x0 + 1, fm.width - 1);
      const double wx = sx - x0;
      for (int c = 0; c < fm.channels; ++c) {
        const double top = (1 - wx) * fm.at(c, y0, x0) + wx * fm.at(c, y0, x1);
        const double bottom = (1 - wx) * fm.at(c, y1, x0) + wx * fm.at(c, y1, x1);
        out.at(c, y, x) = static_cast<float>((1 - wy) * top + wy * bottom);
      }
    }
  }
  return out;
}

Matrix pool_over_superpixels(const FeatureMap& fm, const SuperpixelMap& map) {
  require(fm.height == map.height && fm.width == map.width,
          "feature map grid must match the superpixel map");
  const std::size_t n = map.num_pixels();
  const auto sizes = superpixel_sizes(map);
  std::vector<double> sums(static_cast<std::size_t>(map.count) * fm.channels, 0.0);
  for (int c = 0; c < fm.channels; ++c) {
    const float* channel = &fm.data[c * n];
    for (std::size_t i = 0; i < n; ++i) {
      sums[static_cast<std::size_t>(map.ids[i]) * fm.channels + c] += channel[i];
    }
  }
  Matrix out(map.count, fm.channels);
  for (std::size_t s = 0; s < map.count; ++s) {
    require(sizes[s] > 0, "superpixel without pixels");
    for (int c = 0; c < fm.channels; ++c) {
      out(s, c) = static_cast<float>(sums[s * fm.channels + c] / sizes[s]);
    }
  }
  return out;
}

std::vector<float> scene_pool(const FeatureMap& fm) {
  const std::size_t n = static_cast<std::size_t>(fm.height) * fm.width;
  std::vector<float> out(fm.channels);
  for (int c = 0; c < fm.channels; ++c) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += fm.data[c * n + i];
    out[c] = static_cast<float>(sum / n);
  }
  return out;
}

Matrix local_color_features(const LabImage& lab, const SuperpixelMap& map) {
  require(lab.width == map.width && lab.height == map.height,
          "image and superpixel map sizes differ");
  const std::size_t n = lab.num_pixels();
  const auto sizes = superpixel_sizes(map);

  std::array<std::vector<float>, 3> fine_edges, coarse_edges;
  for (int c = 0; c < 3; ++c) {
    std::vector<float> values(n);
    for (std::size_t i = 0; i < n; ++i) values[i] = lab.data[3 * i + c];
    fine_edges[c] = quantile_edges(values, kFineBins);
    coarse_edges[c] = quantile_edges(std::move(values), kCoarseBins);
  }

  // Layout: [fixed: L32 L8 a32 a8 b32 b8][entropy L a b][adaptive: same as fixed].
  constexpr std::size_t kPerChannel = kFineBins + kCoarseBins;
  constexpr std::size_t kEntropyOffset = 3 * kPerChannel;
  constexpr std::size_t kAdaptiveOffset = kEntropyOffset + 3;
  Matrix out(map.count, kColorFeatureDims);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = out.row(map.ids[i]);
    for (int c = 0; c < 3; ++c) {
      const float v = lab.data[3 * i + c];
      const float lo = kLabRanges[c][0], hi = kLabRanges[c][1];
      const std::size_t base = c * kPerChannel;
      row[base + fixed_bin(v, lo, hi, kFineBins)] += 1.0f;
      row[base + kFineBins + fixed_bin(v, lo, hi, kCoarseBins)] += 1.0f;
      row[kAdaptiveOffset + base + adaptive_bin(v, fine_edges[c])] += 1.0f;
      row[kAdaptiveOffset + base + kFineBins + adaptive_bin(v, coarse_edges[c])] += 1.0f;
    }
  }
  for (std::size_t s = 0; s < map.count; ++s) {
    auto row = out.row(s);
    const float inv = 1.0f / static_cast<float>(sizes[s]);
    for (std::size_t j = 0; j < kColorFeatureDims; ++j) row[j] *= inv;
    for (int c = 0; c < 3; ++c) {
      row[kEntropyOffset + c] =
          static_cast<float>(entropy(row.subspan(c * kPerChannel, kFineBins)));
    }
  }
  return out;
}

std::array<float, 4> location_features(const SuperpixelMap& map, std::uint32_t s) {
  require(s < map.count, "superpixel index out of range");
  double sx = 0.0, sy = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      if (map.at(x, y) != s) continue;
      sx += x + 0.5;
      sy += y + 0.5;
      ++count;
    }
  }
  const double hw = map.width / 2.0, hh = map.height / 2.0;
  const double nx = (sx / count - hw) / hw;
  const double ny = (sy / count - hh) / hh;
  return {static_cast<float>(nx), static_cast<float>(ny),
          static_cast<float>(std::abs(nx)), static_cast<float>(std::abs(ny))};
}

Matrix location_features(const SuperpixelMap& map) {
  std::vector<double> sx(map.count, 0.0), sy(map.count, 0.0);
  const auto sizes = superpixel_sizes(map);
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      sx[map.at(x, y)] += x + 0.5;
      sy[map.at(x, y)] += y + 0.5;
    }
  }
  const double hw = map.width / 2.0, hh = map.height / 2.0;
  Matrix out(map.count, kLocationFeatureDims);
  for (std::size_t s = 0; s < map.count; ++s) {
    const double nx = (sx[s] / sizes[s] - hw) / hw;
    const double ny = (sy[s] / sizes[s] - hh) / hh;
    out(s, 0) = static_cast<float>(nx);
    out(s, 1) = static_cast<float>(ny);
    out(s, 2) = static_cast<float>(std::abs(nx));
    out(s, 3) = static_cast<float>(std::abs(ny));
  }
  return out;
}

Matrix proximal_average(const Matrix& local, const AdjacencyGraph& g, int radius) {
  require(radius >= 1, "proximal radius must be >= 1");
  require(local.rows == g.size(), "feature rows must match graph size");
  Matrix out(local.rows, local.cols);
  std::vector<double> acc(local.cols);
  for (std::uint32_t s = 0; s < local.rows; ++s) {
    const auto ball = neighbors_within_radius(g, s, radius);
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::uint32_t t : ball) {
      const auto row = local.row(t);
      for (std::size_t j = 0; j < local.cols; ++j) acc[j] += row[j];
    }
    auto dst = out.row(s);
    for (std::size_t j = 0; j < local.cols; ++j) {
      dst[j] = static_cast<float>(acc[j] / ball.size());
    }
  }
  return out;
}

std::vector<PixelRect> superpixel_bboxes(const SuperpixelMap& map) {
  std::vector<PixelRect> boxes(map.count, PixelRect{map.width, map.height, -1, -1});
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      PixelRect& b = boxes[map.at(x, y)];
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  return boxes;
}

namespace {

PixelRect union_box(const std::vector<PixelRect>& boxes,
                    const std::vector<std::uint32_t>& members) {
  PixelRect r = boxes[members.front()];
  for (std::uint32_t t : members) {
    r.x0 = std::min(r.x0, boxes[t].x0);
    r.y0 = std::min(r.y0, boxes[t].y0);
    r.x1 = std::max(r.x1, boxes[t].x1);
    r.y1 = std::max(r.y1, boxes[t].y1);
  }
  return r;
}

}  // namespace

PixelRect subscene_bbox(const SuperpixelMap& map, const AdjacencyGraph& g,
                        std::uint32_t s, int radius) {
  return union_box(superpixel_bboxes(map), neighbors_within_radius(g, s, radius));
}

Matrix subscene_pool(const FeatureMap& fm, const SuperpixelMap& map,
                     const AdjacencyGraph& g, int radius) {
  require(fm.height == map.height && fm.width == map.width,
          "feature map grid must match the superpixel map");
  const auto boxes = superpixel_bboxes(map);
  std::vector<PixelRect> subscenes(map.count);
  for (std::uint32_t s = 0; s < map.count; ++s) {
    subscenes[s] = union_box(boxes, neighbors_within_radius(g, s, radius));
  }
  const int w = fm.width, h = fm.height;
  const std::size_t stride = static_cast<std::size_t>(w) + 1;
  std::vector<double> integral(stride * (h + 1));
  Matrix out(map.count, fm.channels);
  for (int c = 0; c < fm.channels; ++c) {
    std::fill(integral.begin(), integral.end(), 0.0);
    for (int y = 0; y < h; ++y) {
      double row_sum = 0.0;
      for (int x = 0; x < w; ++x) {
        row_sum += fm.at(c, y, x);
        integral[(y + 1) * stride + x + 1] = integral[y * stride + x + 1] + row_sum;
      }
    }
    for (std::uint32_t s = 0; s < map.count; ++s) {
      const PixelRect& r = subscenes[s];
      const double sum = integral[(r.y1 + 1) * stride + r.x1 + 1] -
                         integral[r.y0 * stride + r.x1 + 1] -
                         integral[(r.y1 + 1) * stride + r.x0] +
                         integral[r.y0 * stride + r.x0];
      const double area = static_cast<double>(r.x1 - r.x0 + 1) * (r.y1 - r.y0 + 1);
      out(s, c) = static_cast<float>(sum / area);
    }
  }
  return out;
}

ZoomOutFeature concat_levels(const std::vector<Matrix>& levels) {
  require(!levels.empty(), "no feature levels to concatenate");
  ZoomOutFeature out;
  const std::size_t rows = levels.front().rows;
  std::size_t total = 0;
  for (const auto& level : levels) {
    if (level.rows != rows) fail("feature level superpixel count mismatch");
    out.level_offsets.push_back(total);
    total += level.cols;
  }
  out.features = Matrix(rows, total);
  for (std::size_t r = 0; r < rows; ++r) {
    auto dst = out.features.row(r).begin();
    for (const auto& level : levels) {
      const auto src = level.row(r);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

ZoomOutFeature mirror_max_fuse(const ZoomOutFeature& original,
                               const ZoomOutFeature& mirrored) {
  if (original.features.rows != mirrored.features.rows ||
      original.features.cols != mirrored.features.cols) {
    fail("mirror fusion shape mismatch");
  }
  ZoomOutFeature out = original;
  for (std::size_t i = 0; i < out.features.data.size(); ++i) {
    out.features.data[i] = std::max(out.features.data[i], mirrored.features.data[i]);
  }
  return out;
}

SuperpixelMap rect_regions(int width, int height, int count) {
  require(count >= 1, "rectangle count must be >= 1");
  const double aspect = static_cast<double>(width) / height;
  const int cols = std::min(width, static_cast<int>(std::ceil(std::sqrt(count * aspect))));
  const int rows = std::min(height, static_cast<int>(std::ceil(std::sqrt(count / aspect))));
  std::vector<std::uint32_t> ids(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const int r = static_cast<int>(static_cast<long>(y) * rows / height);
    for (int x = 0; x < width; ++x) {
      const int c = static_cast<int>(static_cast<long>(x) * cols / width);
      ids[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint32_t>(r * cols + c);
    }
  }
  return make_superpixel_map(width, height, std::move(ids));
}

std::vector<RegionSpec> parse_levels(const std::string& text) {
  std::vector<RegionSpec> levels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto colon = item.find(':');
    const std::string name = item.substr(0, colon);
    std::optional<int> arg;
    if (colon != std::string::npos) {
      try {
        arg = std::stoi(item.substr(colon + 1));
      } catch (const std::exception&) {
        fail("bad level argument in '" + item + "'");
      }
    }
    RegionSpec spec;
    if (name == "local") {
      spec.kind = RegionKind::kLocal;
    } else if (name == "pooled") {
      spec.kind = RegionKind::kPooled;
    } else if (name == "proximal") {
      spec.kind = RegionKind::kProximal;
      spec.radius = arg.value_or(kDefaultProximalRadius);
    } else if (name == "subscene") {
      spec.kind = RegionKind::kSubscene;
      spec.radius = arg.value_or(kDefaultSubsceneRadius);
    } else if (name == "scene") {
      spec.kind = RegionKind::kScene;
    } else if (name == "rect") {
      spec.kind = RegionKind::kRectGrid;
      spec.count = arg.value_or(500);
    } else {
      fail("unknown feature level '" + name + "'");
    }
    if (spec.radius < 1) fail("level radius must be >= 1 in '" + item + "'");
    levels.push_back(spec);
  }
  if (levels.empty()) fail("no feature levels given");
  return levels;
}

ZoomOutFeature extract_features(const LabImage& lab, const SuperpixelMap& map,
                                const std::vector<RegionSpec>& levels,
                                const std::optional<FeatureMap>& featmap) {
  std::optional<Matrix> manual_local;
  auto local = [&]() -> const Matrix& {
    if (!manual_local) {
      manual_local = hstack(local_color_features(lab, map), location_features(map));
    }
    return *manual_local;
  };
  std::optional<FeatureMap> dense;
  auto dense_map = [&]() -> const FeatureMap& {
    if (!dense) {
      if (featmap) {
        dense = (featmap->height == lab.height && featmap->width == lab.width)
                    ? *featmap
                    : upsample_featuremap(*featmap, lab.height, lab.width);
      } else {
        dense = lab_feature_map(lab);
      }
    }
    return *dense;
  };
  std::optional<AdjacencyGraph> graph;
  auto adjacency = [&]() -> const AdjacencyGraph& {
    if (!graph) graph = build_adjacency(map);
    return *graph;
  };

  std::vector<Matrix> parts;
  for (const auto& level : levels) {
    switch (level.kind) {
      case RegionKind::kLocal:
        parts.push_back(local());
        break;
      case RegionKind::kPooled:
        parts.push_back(pool_over_superpixels(dense_map(), map));
        break;
      case RegionKind::kProximal:
        parts.push_back(proximal_average(local(), adjacency(), level.radius));
        break;
      case RegionKind::kSubscene:
        parts.push_back(subscene_pool(dense_map(), map, adjacency(), level.radius));
        break;
      case RegionKind::kScene:
        parts.push_back(replicate(scene_pool(dense_map()), map.count));
        break;
      case RegionKind::kRectGrid:
        fail("rect grids are region maps, not feature levels");
    }
  }
  return concat_levels(parts);
}

ZoomOutFeature extract_features_mirrored(
    const ImageRGB& img, const SuperpixelMap& map,
    const std::vector<RegionSpec>& levels,
    const std::optional<FeatureMap>& featmap,
    const std::optional<FeatureMap>& mirrored_featmap) {
  const auto original = extract_features(rgb_to_lab(img), map, levels, featmap);
  std::optional<FeatureMap> flipped = mirrored_featmap;
  if (!flipped && featmap) flipped = mirror_featuremap(*featmap);
  const auto mirrored = extract_features(rgb_to_lab(mirror_horizontal(img)),
                                         mirror_horizontal(map), levels, flipped);
  return mirror_max_fuse(original, mirrored);
}

}  // namespace zok::zoomout
