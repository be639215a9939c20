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
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "zok/core_io.hpp"
#include "zok/random.hpp"

namespace zok::cli {

enum class ShapeKind { kQuadrants, kBlobs, kStripes };

ShapeKind parse_shape_kind(const std::string& text);
std::string to_string(ShapeKind kind);

struct SyntheticSpec {
  int width = 64;
  int height = 64;
  int num_classes = 4;
  ShapeKind shape = ShapeKind::kQuadrants;
  // Lab color per class; empty selects the default palette.
  std::vector<std::array<float, 3>> colors;
  // Gaussian pixel noise in 8-bit RGB units.
  double noise_sigma = 0.0;
  // Blob layout: class 0 is background, each blob draws a class in [1, C).
  int min_blobs = 2;
  int max_blobs = 4;
  double min_radius = 0.12;  // fraction of the shorter side
  double max_radius = 0.30;
  // Std of a per-region lightness offset (Lab L units).
  double shade_jitter = 0.0;
  // Peak lightness offset of a linear ramp across each region, along a
  // random direction.
  double shade_gradient = 0.0;

  void validate() const;
};

std::vector<std::array<float, 3>> default_palette(int num_classes);

// Inverse of srgb_to_lab, clamped to the 8-bit gamut.
std::array<std::uint8_t, 3> lab_to_srgb(const std::array<float, 3>& lab);

struct Sample {
  std::string name;
  ImageRGB image;
  LabelMap gt;
  // Classes present in gt (sorted), i.e. image-level tags.
  std::vector<std::uint32_t> tags;
};

using Dataset = std::vector<Sample>;

Sample synth_image(const SyntheticSpec& spec, Rng& rng);
Dataset synth_generate(const SyntheticSpec& spec, int count, std::uint64_t seed);

std::vector<std::uint32_t> present_classes(const LabelMap& gt);

// Writes <name>.ppm, <name>.pgm and manifest.json into dir.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace zok::cli
