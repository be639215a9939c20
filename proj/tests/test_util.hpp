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

#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <gtest/gtest.h>

namespace zok::testing {

// Per-test scratch directory, removed on destruction.
class ScratchDir {
 public:
  ScratchDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    std::string name = "zok_test";
    if (info != nullptr) {
      name += std::string("_") + info->test_suite_name() + "_" + info->name();
    }
    path_ = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() { std::filesystem::remove_all(path_); }

  std::filesystem::path operator/(const std::string& file) const {
    return path_ / file;
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::vector<unsigned char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

}  // namespace zok::testing

#include <deque>

#include "zok/core_io.hpp"

namespace zok::testing {

// True when every id's pixel set forms a single 4-connected component.
inline bool is_four_connected(const SuperpixelMap& map) {
  const int w = map.width, h = map.height;
  std::vector<bool> seen(map.num_pixels(), false);
  std::vector<int> components(map.count, 0);
  for (std::size_t seed = 0; seed < map.num_pixels(); ++seed) {
    if (seen[seed]) continue;
    ++components[map.ids[seed]];
    std::deque<std::size_t> queue = {seed};
    seen[seed] = true;
    while (!queue.empty()) {
      const std::size_t i = queue.front();
      queue.pop_front();
      const int x = static_cast<int>(i % w), y = static_cast<int>(i / w);
      const int nx[4] = {x - 1, x + 1, x, x}, ny[4] = {y, y, y - 1, y + 1};
      for (int d = 0; d < 4; ++d) {
        if (nx[d] < 0 || ny[d] < 0 || nx[d] >= w || ny[d] >= h) continue;
        const std::size_t j = static_cast<std::size_t>(ny[d]) * w + nx[d];
        if (!seen[j] && map.ids[j] == map.ids[seed]) {
          seen[j] = true;
          queue.push_back(j);
        }
      }
    }
  }
  for (int c : components) {
    if (c != 1) return false;
  }
  return true;
}

inline ImageRGB flat_image(int w, int h, std::uint8_t r, std::uint8_t g,
                           std::uint8_t b) {
  ImageRGB img(w, h);
  for (std::size_t i = 0; i < img.num_pixels(); ++i) {
    img.data[3 * i] = r;
    img.data[3 * i + 1] = g;
    img.data[3 * i + 2] = b;
  }
  return img;
}

// Four flat quadrants with distinct colors.
inline ImageRGB quadrant_image(int size) {
  static const std::uint8_t colors[4][3] = {
      {220, 40, 40}, {40, 200, 60}, {40, 60, 220}, {230, 220, 50}};
  ImageRGB img(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const int q = (y >= size / 2 ? 2 : 0) + (x >= size / 2 ? 1 : 0);
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = colors[q][c];
    }
  }
  return img;
}

}  // namespace zok::testing
