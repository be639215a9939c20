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
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

namespace zok {

inline constexpr std::uint16_t kDefaultIgnoreLabel = 255;

// 8-bit sRGB raster, row-major RGB triples.
struct ImageRGB {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  ImageRGB() = default;
  ImageRGB(int w, int h);

  std::size_t num_pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
  std::uint8_t& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

// CIELAB raster, row-major (L, a, b) triples.
struct LabImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  std::size_t num_pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
  const float* pixel(std::size_t index) const { return &data[index * 3]; }
  const float* pixel(int x, int y) const {
    return pixel(static_cast<std::size_t>(y) * width + x);
  }
};

struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> data;
  std::uint16_t ignore_value = kDefaultIgnoreLabel;

  std::size_t num_pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
};

// Depths in meters; values <= 0 mark invalid pixels.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;
};

// Per-pixel superpixel ids, contiguous in [0, count).
struct SuperpixelMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> ids;
  std::uint32_t count = 0;

  std::size_t num_pixels() const {
    return static_cast<std::size_t>(width) * height;
  }
  std::uint32_t at(int x, int y) const {
    return ids[static_cast<std::size_t>(y) * width + x];
  }
};

// Builds a map from raw ids, checking that every id in [0, max+1) occurs.
SuperpixelMap make_superpixel_map(int width, int height,
                                  std::vector<std::uint32_t> ids);

// Pixel count of each superpixel.
std::vector<std::size_t> superpixel_sizes(const SuperpixelMap& map);

// Dense row-major float matrix; rows are usually superpixels or samples.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, float fill = 0.0f)
      : rows(r), cols(c), data(r * c, fill) {}

  std::span<float> row(std::size_t i) { return {&data[i * cols], cols}; }
  std::span<const float> row(std::size_t i) const {
    return {&data[i * cols], cols};
  }
  float& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  float operator()(std::size_t i, std::size_t j) const {
    return data[i * cols + j];
  }
};

enum class DType : std::uint8_t { kF32 = 0, kU32 = 1, kU16 = 2 };

std::size_t dtype_size(DType dtype);

// Rank 1..4 row-major array backing the ZOT1 file format.
class Tensor {
 public:
  Tensor() = default;

  static Tensor f32(std::vector<std::uint32_t> dims, std::vector<float> values);
  static Tensor u32(std::vector<std::uint32_t> dims,
                    std::vector<std::uint32_t> values);
  static Tensor u16(std::vector<std::uint32_t> dims,
                    std::vector<std::uint16_t> values);

  DType dtype() const { return static_cast<DType>(data_.index()); }
  const std::vector<std::uint32_t>& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const;

  // Typed views; throw when the dtype differs.
  std::span<const float> as_f32() const;
  std::span<const std::uint32_t> as_u32() const;
  std::span<const std::uint16_t> as_u16() const;

  // Widening copies that accept any integer dtype (or any dtype for floats).
  std::vector<std::uint32_t> to_u32() const;
  std::vector<float> to_f32() const;

  bool operator==(const Tensor&) const = default;

 private:
  Tensor(std::vector<std::uint32_t> dims,
         std::variant<std::vector<float>, std::vector<std::uint32_t>,
                      std::vector<std::uint16_t>>
             data);

  std::vector<std::uint32_t> dims_;
  std::variant<std::vector<float>, std::vector<std::uint32_t>,
               std::vector<std::uint16_t>>
      data_;
};

// Netpbm binary I/O.
ImageRGB read_ppm(const std::filesystem::path& path);
void write_ppm(const ImageRGB& img, const std::filesystem::path& path);
LabelMap read_pgm(const std::filesystem::path& path,
                  std::uint16_t ignore_value = kDefaultIgnoreLabel);
void write_pgm(const LabelMap& labels, const std::filesystem::path& path);
// Writes arbitrary values; fails when any value does not fit in 16 bits.
void write_pgm(int width, int height, std::span<const std::uint32_t> values,
               const std::filesystem::path& path);

// ZOT1 tensor I/O.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_tensor(const Tensor& tensor);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);

// sRGB (D65) -> CIELAB, per pixel.
LabImage rgb_to_lab(const ImageRGB& img);
void srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b, float* lab);

// Conversions between domain types and tensors.
Tensor to_tensor(const SuperpixelMap& map);
SuperpixelMap superpixels_from_tensor(const Tensor& t);
Tensor to_tensor(const Matrix& m);
Matrix matrix_from_tensor(const Tensor& t);
DepthMap depth_from_tensor(const Tensor& t);
Tensor to_tensor(const DepthMap& d);

ImageRGB mirror_horizontal(const ImageRGB& img);
SuperpixelMap mirror_horizontal(const SuperpixelMap& map);

}  // namespace zok
