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

#include "zok/core_io.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "zok/error.hpp"

namespace zok {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_io("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) fail_io("read failed: " + path.string());
  return bytes;
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_io("cannot create " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_io("write failed: " + path.string());
}

namespace {

// Netpbm header: magic, width, height, maxval, separated by whitespace with
// optional '#' comments; a single whitespace byte precedes the raster.
struct NetpbmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

NetpbmHeader parse_netpbm_header(std::span<const std::uint8_t> bytes,
                                 const std::string& expected_magic) {
  NetpbmHeader h;
  if (bytes.size() < 2) fail("wrong magic: file too short");
  h.magic = std::string{static_cast<char>(bytes[0]), static_cast<char>(bytes[1])};
  if (h.magic != expected_magic) {
    fail("wrong magic: expected " + expected_magic + ", got " + h.magic);
  }
  std::size_t pos = 2;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&](const char* name) {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      fail(std::string("malformed header: missing ") + name);
    }
    long value = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      value = value * 10 + (bytes[pos] - '0');
      if (value > 1'000'000'000) fail(std::string("malformed header: ") + name);
      ++pos;
    }
    return static_cast<int>(value);
  };
  h.width = read_int("width");
  h.height = read_int("height");
  h.maxval = read_int("maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    fail("malformed header: no separator before raster");
  }
  h.data_offset = pos + 1;
  if (h.width < 1 || h.height < 1) fail("malformed header: empty image");
  return h;
}

std::string netpbm_header(const char* magic, int w, int h, int maxval) {
  return std::string(magic) + "\n" + std::to_string(w) + " " +
         std::to_string(h) + "\n" + std::to_string(maxval) + "\n";
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) |
         static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 |
         static_cast<std::uint32_t>(b[at + 3]) << 24;
}

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double kEps = 216.0 / 24389.0;
  constexpr double kKappa = 24389.0 / 27.0;
  return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0;
}

void check_dims(const std::vector<std::uint32_t>& dims) {
  if (dims.empty() || dims.size() > 4) fail("tensor rank must be 1..4");
  for (auto d : dims) {
    if (d == 0) fail("tensor dims must be >= 1");
  }
}

std::size_t dims_product(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

}  // namespace

ImageRGB::ImageRGB(int w, int h)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0) {}

SuperpixelMap make_superpixel_map(int width, int height,
                                  std::vector<std::uint32_t> ids) {
  require(width >= 1 && height >= 1, "superpixel map must be non-empty");
  require(ids.size() == static_cast<std::size_t>(width) * height,
          "superpixel map size mismatch");
  const std::uint32_t max_id = *std::max_element(ids.begin(), ids.end());
  std::vector<bool> seen(static_cast<std::size_t>(max_id) + 1, false);
  for (auto id : ids) seen[id] = true;
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    fail("superpixel ids are not contiguous");
  }
  SuperpixelMap map;
  map.width = width;
  map.height = height;
  map.ids = std::move(ids);
  map.count = max_id + 1;
  return map;
}

std::vector<std::size_t> superpixel_sizes(const SuperpixelMap& map) {
  std::vector<std::size_t> sizes(map.count, 0);
  for (auto id : map.ids) ++sizes[id];
  return sizes;
}

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kF32:
    case DType::kU32:
      return 4;
    case DType::kU16:
      return 2;
  }
  fail("unknown dtype");
}

Tensor::Tensor(std::vector<std::uint32_t> dims,
               std::variant<std::vector<float>, std::vector<std::uint32_t>,
                            std::vector<std::uint16_t>>
                   data)
    : dims_(std::move(dims)), data_(std::move(data)) {
  check_dims(dims_);
  const std::size_t n = std::visit([](const auto& v) { return v.size(); }, data_);
  if (n != dims_product(dims_)) fail("payload size mismatch");
}

Tensor Tensor::f32(std::vector<std::uint32_t> dims, std::vector<float> values) {
  return Tensor(std::move(dims), std::move(values));
}
Tensor Tensor::u32(std::vector<std::uint32_t> dims,
                   std::vector<std::uint32_t> values) {
  return Tensor(std::move(dims), std::move(values));
}
Tensor Tensor::u16(std::vector<std::uint32_t> dims,
                   std::vector<std::uint16_t> values) {
  return Tensor(std::move(dims), std::move(values));
}

std::size_t Tensor::size() const { return dims_.empty() ? 0 : dims_product(dims_); }

std::span<const float> Tensor::as_f32() const {
  if (dtype() != DType::kF32) fail("tensor dtype is not f32");
  return std::get<0>(data_);
}
std::span<const std::uint32_t> Tensor::as_u32() const {
  if (dtype() != DType::kU32) fail("tensor dtype is not u32");
  return std::get<1>(data_);
}
std::span<const std::uint16_t> Tensor::as_u16() const {
  if (dtype() != DType::kU16) fail("tensor dtype is not u16");
  return std::get<2>(data_);
}

std::vector<std::uint32_t> Tensor::to_u32() const {
  switch (dtype()) {
    case DType::kU32: {
      auto v = as_u32();
      return {v.begin(), v.end()};
    }
    case DType::kU16: {
      auto v = as_u16();
      return {v.begin(), v.end()};
    }
    case DType::kF32:
      break;
  }
  fail("expected an integer tensor");
}

std::vector<float> Tensor::to_f32() const {
  return std::visit(
      [](const auto& v) { return std::vector<float>(v.begin(), v.end()); },
      data_);
}

ImageRGB read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  const auto h = parse_netpbm_header(bytes, "P6");
  if (h.maxval != 255) fail("unsupported maxval " + std::to_string(h.maxval));
  ImageRGB img(h.width, h.height);
  if (bytes.size() - h.data_offset < img.data.size()) {
    fail("truncated payload in " + path.string());
  }
  std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(h.data_offset),
              img.data.size(), img.data.begin());
  return img;
}

void write_ppm(const ImageRGB& img, const std::filesystem::path& path) {
  require(img.data.size() == img.num_pixels() * 3, "image data size mismatch");
  const std::string header = netpbm_header("P6", img.width, img.height, 255);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.data.begin(), img.data.end());
  write_file(path, out);
}

LabelMap read_pgm(const std::filesystem::path& path, std::uint16_t ignore_value) {
  const auto bytes = read_file(path);
  const auto h = parse_netpbm_header(bytes, "P5");
  if (h.maxval < 1 || h.maxval > 65535) {
    fail("unsupported maxval " + std::to_string(h.maxval));
  }
  LabelMap labels;
  labels.width = h.width;
  labels.height = h.height;
  labels.ignore_value = ignore_value;
  const std::size_t n = labels.num_pixels();
  const std::size_t sample = h.maxval < 256 ? 1 : 2;
  if (bytes.size() - h.data_offset < n * sample) {
    fail("truncated payload in " + path.string());
  }
  labels.data.resize(n);
  const std::uint8_t* p = bytes.data() + h.data_offset;
  for (std::size_t i = 0; i < n; ++i) {
    labels.data[i] = sample == 1
                         ? p[i]
                         : static_cast<std::uint16_t>(p[2 * i] << 8 | p[2 * i + 1]);
  }
  return labels;
}

void write_pgm(int width, int height, std::span<const std::uint32_t> values,
               const std::filesystem::path& path) {
  require(values.size() == static_cast<std::size_t>(width) * height,
          "label data size mismatch");
  std::uint32_t max_value = 0;
  for (auto v : values) max_value = std::max(max_value, v);
  if (max_value > 65535) {
    fail("label " + std::to_string(max_value) + " exceeds 16-bit range");
  }
  const int maxval = max_value <= 255 ? 255 : 65535;
  const std::string header = netpbm_header("P5", width, height, maxval);
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (auto v : values) {
    if (maxval == 255) {
      out.push_back(static_cast<std::uint8_t>(v));
    } else {
      out.push_back(static_cast<std::uint8_t>(v >> 8));
      out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
  }
  write_file(path, out);
}

void write_pgm(const LabelMap& labels, const std::filesystem::path& path) {
  std::vector<std::uint32_t> values(labels.data.begin(), labels.data.end());
  write_pgm(labels.width, labels.height, values, path);
}

std::vector<std::uint8_t> encode_tensor(const Tensor& tensor) {
  check_dims(tensor.dims());
  std::vector<std::uint8_t> out = {'Z', 'O', 'T', '1'};
  out.push_back(static_cast<std::uint8_t>(tensor.dtype()));
  out.push_back(static_cast<std::uint8_t>(tensor.rank()));
  for (auto d : tensor.dims()) put_u32(out, d);
  switch (tensor.dtype()) {
    case DType::kF32:
      for (float v : tensor.as_f32()) {
        std::uint32_t bits;
        std::memcpy(&bits, &v, 4);
        put_u32(out, bits);
      }
      break;
    case DType::kU32:
      for (auto v : tensor.as_u32()) put_u32(out, v);
      break;
    case DType::kU16:
      for (auto v : tensor.as_u16()) {
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
      }
      break;
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 6 || std::memcmp(bytes.data(), "ZOT1", 4) != 0) {
    fail("bad magic: not a ZOT1 tensor");
  }
  const std::uint8_t code = bytes[4];
  if (code > 2) fail("bad dtype code " + std::to_string(code));
  const auto dtype = static_cast<DType>(code);
  const std::size_t rank = bytes[5];
  if (rank < 1 || rank > 4) fail("bad rank " + std::to_string(rank));
  if (bytes.size() < 6 + 4 * rank) fail("payload size mismatch: truncated dims");
  std::vector<std::uint32_t> dims(rank);
  for (std::size_t i = 0; i < rank; ++i) dims[i] = get_u32(bytes, 6 + 4 * i);
  check_dims(dims);
  const std::size_t n = dims_product(dims);
  const std::size_t offset = 6 + 4 * rank;
  if (bytes.size() - offset != n * dtype_size(dtype)) {
    fail("payload size mismatch: expected " + std::to_string(n * dtype_size(dtype)) +
         " bytes, found " + std::to_string(bytes.size() - offset));
  }
  switch (dtype) {
    case DType::kF32: {
      std::vector<float> v(n);
      for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t bits = get_u32(bytes, offset + 4 * i);
        std::memcpy(&v[i], &bits, 4);
      }
      return Tensor::f32(std::move(dims), std::move(v));
    }
    case DType::kU32: {
      std::vector<std::uint32_t> v(n);
      for (std::size_t i = 0; i < n; ++i) v[i] = get_u32(bytes, offset + 4 * i);
      return Tensor::u32(std::move(dims), std::move(v));
    }
    case DType::kU16: {
      std::vector<std::uint16_t> v(n);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = static_cast<std::uint16_t>(bytes[offset + 2 * i] |
                                          bytes[offset + 2 * i + 1] << 8);
      }
      return Tensor::u16(std::move(dims), std::move(v));
    }
  }
  fail("bad dtype");
}

Tensor read_tensor(const std::filesystem::path& path) {
  return decode_tensor(read_file(path));
}

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  write_file(path, encode_tensor(tensor));
}

void srgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8, float* lab) {
  const double r = srgb_to_linear(r8 / 255.0);
  const double g = srgb_to_linear(g8 / 255.0);
  const double b = srgb_to_linear(b8 / 255.0);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.00000);
  const double fz = lab_f(z / 1.08883);
  lab[0] = static_cast<float>(116.0 * fy - 16.0);
  lab[1] = static_cast<float>(500.0 * (fx - fy));
  lab[2] = static_cast<float>(200.0 * (fy - fz));
}

LabImage rgb_to_lab(const ImageRGB& img) {
  LabImage lab;
  lab.width = img.width;
  lab.height = img.height;
  lab.data.resize(img.num_pixels() * 3);
  for (std::size_t i = 0; i < img.num_pixels(); ++i) {
    srgb_to_lab(img.data[3 * i], img.data[3 * i + 1], img.data[3 * i + 2],
                &lab.data[3 * i]);
  }
  return lab;
}

Tensor to_tensor(const SuperpixelMap& map) {
  return Tensor::u32({static_cast<std::uint32_t>(map.height),
                      static_cast<std::uint32_t>(map.width)},
                     map.ids);
}

SuperpixelMap superpixels_from_tensor(const Tensor& t) {
  require(t.rank() == 2, "superpixel tensor must be rank 2 (H x W)");
  return make_superpixel_map(static_cast<int>(t.dims()[1]),
                             static_cast<int>(t.dims()[0]), t.to_u32());
}

Tensor to_tensor(const Matrix& m) {
  return Tensor::f32(
      {static_cast<std::uint32_t>(m.rows), static_cast<std::uint32_t>(m.cols)},
      m.data);
}

Matrix matrix_from_tensor(const Tensor& t) {
  Matrix m;
  if (t.rank() == 1) {
    m.rows = t.dims()[0];
    m.cols = 1;
  } else if (t.rank() == 2) {
    m.rows = t.dims()[0];
    m.cols = t.dims()[1];
  } else {
    fail("matrix tensor must be rank 1 or 2");
  }
  m.data = t.to_f32();
  return m;
}

DepthMap depth_from_tensor(const Tensor& t) {
  require(t.rank() == 2, "depth tensor must be rank 2 (H x W)");
  DepthMap d;
  d.height = static_cast<int>(t.dims()[0]);
  d.width = static_cast<int>(t.dims()[1]);
  d.data = t.to_f32();
  return d;
}

Tensor to_tensor(const DepthMap& d) {
  return Tensor::f32(
      {static_cast<std::uint32_t>(d.height), static_cast<std::uint32_t>(d.width)},
      d.data);
}

ImageRGB mirror_horizontal(const ImageRGB& img) {
  ImageRGB out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
    }
  }
  return out;
}

SuperpixelMap mirror_horizontal(const SuperpixelMap& map) {
  SuperpixelMap out = map;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      out.ids[static_cast<std::size_t>(y) * map.width + (map.width - 1 - x)] =
          map.at(x, y);
    }
  }
  return out;
}

}  // namespace zok
