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

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "zok/core_io.hpp"

namespace zok::zoomout {

// Undirected superpixel adjacency under 4-connectivity; neighbor lists are
// sorted and exclude the node itself.
struct AdjacencyGraph {
  std::vector<std::vector<std::uint32_t>> neighbors;

  std::size_t size() const { return neighbors.size(); }
  std::size_t num_edges() const;
};

AdjacencyGraph build_adjacency(const SuperpixelMap& map);

// Hop ball of radius r around s, sorted, always containing s.
std::vector<std::uint32_t> neighbors_within_radius(const AdjacencyGraph& g,
                                                   std::uint32_t s, int r);

// Dense C x H x W feature map (channel-major), e.g. CNN activations.
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  float at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  float& at(int c, int y, int x) {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

FeatureMap featuremap_from_tensor(const Tensor& t);
Tensor to_tensor(const FeatureMap& fm);
// Lab channels as a 3-channel map.
FeatureMap lab_feature_map(const LabImage& lab);

enum class Upsample { kNearest, kBilinear };

FeatureMap upsample_featuremap(const FeatureMap& fm, int height, int width,
                               Upsample mode = Upsample::kNearest);

// Per-superpixel channel means (rows = superpixels).
Matrix pool_over_superpixels(const FeatureMap& fm, const SuperpixelMap& map);

// Global channel means.
std::vector<float> scene_pool(const FeatureMap& fm);

inline constexpr int kFineBins = 32;
inline constexpr int kCoarseBins = 8;
// 3 channels x (32 + 8) fixed bins, 3 entropies, 3 x (32 + 8) adaptive bins.
inline constexpr std::size_t kColorFeatureDims = 243;
inline constexpr std::size_t kLocationFeatureDims = 4;

Matrix local_color_features(const LabImage& lab, const SuperpixelMap& map);

// (nx, ny, |nx|, |ny|) with the centroid normalized to [-1, 1] about the
// image center.
std::array<float, 4> location_features(const SuperpixelMap& map, std::uint32_t s);
Matrix location_features(const SuperpixelMap& map);

Matrix proximal_average(const Matrix& local, const AdjacencyGraph& g, int radius);

// Inclusive pixel rectangle.
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = -1, y1 = -1;

  bool contains(const PixelRect& o) const {
    return x0 <= o.x0 && y0 <= o.y0 && x1 >= o.x1 && y1 >= o.y1;
  }
  bool operator==(const PixelRect&) const = default;
};

std::vector<PixelRect> superpixel_bboxes(const SuperpixelMap& map);
PixelRect subscene_bbox(const SuperpixelMap& map, const AdjacencyGraph& g,
                        std::uint32_t s, int radius = 3);
// Mean of fm over each superpixel's subscene box.
Matrix subscene_pool(const FeatureMap& fm, const SuperpixelMap& map,
                     const AdjacencyGraph& g, int radius = 3);

// Per-superpixel concatenation of levels; level_offsets[i] is where level i
// starts.
struct ZoomOutFeature {
  Matrix features;
  std::vector<std::size_t> level_offsets;

  std::size_t dim() const { return features.cols; }
};

ZoomOutFeature concat_levels(const std::vector<Matrix>& levels);
ZoomOutFeature mirror_max_fuse(const ZoomOutFeature& original,
                               const ZoomOutFeature& mirrored);

SuperpixelMap rect_regions(int width, int height, int count);

enum class RegionKind { kLocal, kPooled, kProximal, kSubscene, kScene, kRectGrid };

struct RegionSpec {
  RegionKind kind = RegionKind::kLocal;
  int radius = 1;  // hops, for proximal/subscene
  int count = 0;   // rectangles, for rect grids
};

inline constexpr int kDefaultProximalRadius = 2;
inline constexpr int kDefaultSubsceneRadius = 3;

// Parses "local,proximal:2,subscene:3,scene"; "pooled" pools the dense
// feature map over each superpixel.
std::vector<RegionSpec> parse_levels(const std::string& text);

// Builds the zoom-out vector for each superpixel. Levels that need a dense
// map use `featmap` when given (upsampled to image size), else Lab.
ZoomOutFeature extract_features(const LabImage& lab, const SuperpixelMap& map,
                                const std::vector<RegionSpec>& levels,
                                const std::optional<FeatureMap>& featmap = {});

// Features of the image and of its horizontal mirror (same superpixel ids),
// fused by element-wise max.
ZoomOutFeature extract_features_mirrored(
    const ImageRGB& img, const SuperpixelMap& map,
    const std::vector<RegionSpec>& levels,
    const std::optional<FeatureMap>& featmap = {},
    const std::optional<FeatureMap>& mirrored_featmap = {});

}  // namespace zok::zoomout
