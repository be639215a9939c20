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

#include "zok/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "zok/error.hpp"

namespace zok::cli {

namespace {

double lab_f_inv(double t) {
  constexpr double delta = 6.0 / 29.0;
  return t > delta ? t * t * t : 3.0 * delta * delta * (t - 4.0 / 29.0);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::string sample_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "img_%04d", i);
  return buf;
}

// Center, radius and ramp direction of a painted region.
struct RegionGeometry {
  double cx = 0, cy = 0, radius = 1, theta = 0;
};

void paint_quadrants(LabelMap& gt, std::vector<int>& region, int num_classes) {
  const int hx = gt.width / 2, hy = gt.height / 2;
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      const int q = (y >= hy ? 2 : 0) + (x >= hx ? 1 : 0);
      const std::size_t i = static_cast<std::size_t>(y) * gt.width + x;
      gt.data[i] = static_cast<std::uint16_t>(q % num_classes);
      region[i] = q;
    }
  }
}

void paint_stripes(LabelMap& gt, std::vector<int>& region, int num_classes) {
  for (int y = 0; y < gt.height; ++y) {
    for (int x = 0; x < gt.width; ++x) {
      const int s = static_cast<int>(static_cast<long>(x) * num_classes / gt.width);
      const std::size_t i = static_cast<std::size_t>(y) * gt.width + x;
      gt.data[i] = static_cast<std::uint16_t>(s);
      region[i] = s;
    }
  }
}

void paint_blobs(const SyntheticSpec& spec, Rng& rng, LabelMap& gt, std::vector<int>& region,
                 std::vector<RegionGeometry>& geometry) {
  const int n = spec.min_blobs +
                static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.max_blobs - spec.min_blobs + 1)));
  const double side = std::min(spec.width, spec.height);
  for (int b = 0; b < n; ++b) {
    const auto cls = static_cast<std::uint16_t>(1 + rng.below(static_cast<std::uint64_t>(spec.num_classes - 1)));
    const double cx = rng.uniform(0, spec.width), cy = rng.uniform(0, spec.height);
    const double rx = side * rng.uniform(spec.min_radius, spec.max_radius);
    const double ry = side * rng.uniform(spec.min_radius, spec.max_radius);
    const double theta = rng.uniform(0, std::numbers::pi);
    const double ct = std::cos(theta), st = std::sin(theta);
    geometry.push_back({cx, cy, std::max(rx, ry), rng.uniform(0, 2 * std::numbers::pi)});
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = (ct * dx + st * dy) / rx, v = (-st * dx + ct * dy) / ry;
        if (u * u + v * v > 1.0) continue;
        const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
        gt.data[i] = cls;
        region[i] = b + 1;
      }
    }
  }
}

}  // namespace

ShapeKind parse_shape_kind(const std::string& text) {
  if (text == "quadrants") return ShapeKind::kQuadrants;
  if (text == "blobs") return ShapeKind::kBlobs;
  if (text == "stripes") return ShapeKind::kStripes;
  fail("unknown shape kind '" + text + "' (expected quadrants, blobs or stripes)");
}

std::string to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kQuadrants:
      return "quadrants";
    case ShapeKind::kBlobs:
      return "blobs";
    case ShapeKind::kStripes:
      return "stripes";
  }
  return "";
}

void SyntheticSpec::validate() const {
  require(width >= 2 && height >= 2, "synthetic images must be at least 2x2");
  require(num_classes >= 2, "synthetic datasets need at least 2 classes");
  require(num_classes < kDefaultIgnoreLabel, "too many classes");
  require(colors.empty() || colors.size() == static_cast<std::size_t>(num_classes),
          "one color per class required");
  require(noise_sigma >= 0 && shade_jitter >= 0 && shade_gradient >= 0, "noise must be >= 0");
  require(min_blobs >= 0 && max_blobs >= min_blobs, "invalid blob count range");
  require(min_radius > 0 && max_radius >= min_radius, "invalid blob radius range");
  if (shape == ShapeKind::kStripes) require(num_classes <= width, "more stripes than columns");
}

std::vector<std::array<float, 3>> default_palette(int num_classes) {
  std::vector<std::array<float, 3>> out;
  for (int c = 0; c < num_classes; ++c) {
    const double hue = 2.0 * std::numbers::pi * c / num_classes + 0.4;
    const float l = c % 2 ? 70.0f : 45.0f;
    out.push_back({l, static_cast<float>(45 * std::cos(hue)), static_cast<float>(45 * std::sin(hue))});
  }
  return out;
}

std::array<std::uint8_t, 3> lab_to_srgb(const std::array<float, 3>& lab) {
  const double fy = (lab[0] + 16.0) / 116.0;
  const double fx = fy + lab[1] / 500.0;
  const double fz = fy - lab[2] / 200.0;
  const double x = 0.95047 * lab_f_inv(fx);
  const double y = lab_f_inv(fy);
  const double z = 1.08883 * lab_f_inv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  auto enc = [](double c) { return to_byte(255.0 * linear_to_srgb(std::clamp(c, 0.0, 1.0))); };
  return {enc(r), enc(g), enc(b)};
}

std::vector<std::uint32_t> present_classes(const LabelMap& gt) {
  std::vector<std::uint32_t> out;
  for (auto v : gt.data) {
    if (v != gt.ignore_value) out.push_back(v);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Sample synth_image(const SyntheticSpec& spec, Rng& rng) {
  spec.validate();
  const auto palette = spec.colors.empty() ? default_palette(spec.num_classes) : spec.colors;
  Sample s;
  s.gt.width = spec.width;
  s.gt.height = spec.height;
  s.gt.data.assign(static_cast<std::size_t>(spec.width) * spec.height, 0);
  std::vector<int> region(s.gt.data.size(), 0);
  std::vector<RegionGeometry> geometry;
  std::vector<float> ramp;
  switch (spec.shape) {
    case ShapeKind::kQuadrants:
      paint_quadrants(s.gt, region, spec.num_classes);
      break;
    case ShapeKind::kStripes:
      paint_stripes(s.gt, region, spec.num_classes);
      break;
    case ShapeKind::kBlobs:
      paint_blobs(spec, rng, s.gt, region, geometry);
      break;
  }

  // One lightness offset per region so that instances of a class vary.
  const int regions = *std::max_element(region.begin(), region.end()) + 1;
  std::vector<float> shade(static_cast<std::size_t>(regions), 0.0f);
  if (spec.shade_jitter > 0) {
    for (auto& v : shade) v = static_cast<float>(rng.normal() * spec.shade_jitter);
  }
  if (spec.shade_gradient > 0) {
    // Non-blob regions ramp about the image center.
    const RegionGeometry whole{spec.width / 2.0, spec.height / 2.0,
                               std::min(spec.width, spec.height) / 2.0, 0.0};
    std::vector<RegionGeometry> ramps(static_cast<std::size_t>(regions), whole);
    for (auto& g : ramps) g.theta = rng.uniform(0, 2 * std::numbers::pi);
    if (spec.shape == ShapeKind::kBlobs) {
      for (std::size_t b = 0; b < geometry.size() && b + 1 < ramps.size(); ++b) ramps[b + 1] = geometry[b];
    }
    ramp.resize(s.gt.data.size());
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * spec.width + x;
        const auto& g = ramps[region[i]];
        const double t = ((x + 0.5 - g.cx) * std::cos(g.theta) + (y + 0.5 - g.cy) * std::sin(g.theta)) / g.radius;
        ramp[i] = static_cast<float>(spec.shade_gradient * std::clamp(t, -1.0, 1.0));
      }
    }
  }

  s.image = ImageRGB(spec.width, spec.height);
  for (std::size_t i = 0; i < s.gt.data.size(); ++i) {
    auto lab = palette[s.gt.data[i]];
    lab[0] = std::clamp(lab[0] + shade[region[i]] + (ramp.empty() ? 0.0f : ramp[i]), 0.0f, 100.0f);
    const auto rgb = lab_to_srgb(lab);
    for (int c = 0; c < 3; ++c) {
      double v = rgb[c];
      if (spec.noise_sigma > 0) v += rng.normal() * spec.noise_sigma;
      s.image.data[3 * i + c] = to_byte(v);
    }
  }
  s.tags = present_classes(s.gt);
  return s;
}

Dataset synth_generate(const SyntheticSpec& spec, int count, std::uint64_t seed) {
  spec.validate();
  require(count >= 0, "image count must be >= 0");
  Rng rng(seed);
  Dataset out;
  for (int i = 0; i < count; ++i) {
    out.push_back(synth_image(spec, rng));
    out.back().name = sample_name(i);
  }
  return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail_io("cannot create directory " + dir.string() + ": " + ec.message());
  nlohmann::json samples = nlohmann::json::array();
  for (const auto& s : data) {
    write_ppm(s.image, dir / (s.name + ".ppm"));
    write_pgm(s.gt, dir / (s.name + ".pgm"));
    samples.push_back({{"name", s.name},
                       {"image", s.name + ".ppm"},
                       {"gt", s.name + ".pgm"},
                       {"tags", s.tags}});
  }
  const std::string text = nlohmann::json{{"samples", samples}}.dump(2) + "\n";
  write_file(dir / "manifest.json",
             {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

Dataset load_dataset(const std::filesystem::path& dir) {
  const auto bytes = read_file(dir / "manifest.json");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    fail("malformed manifest in " + dir.string() + ": " + e.what());
  }
  require(manifest.is_object() && manifest.contains("samples") && manifest["samples"].is_array(),
          "manifest needs a 'samples' array");
  Dataset out;
  for (const auto& entry : manifest["samples"]) {
    require(entry.is_object() && entry.contains("image") && entry.contains("gt"),
            "manifest entries need 'image' and 'gt'");
    Sample s;
    try {
      s.name = entry.value("name", entry["image"].get<std::string>());
      s.image = read_ppm(dir / entry["image"].get<std::string>());
      s.gt = read_pgm(dir / entry["gt"].get<std::string>());
      if (entry.contains("tags")) {
        s.tags = entry["tags"].get<std::vector<std::uint32_t>>();
      } else {
        s.tags = present_classes(s.gt);
      }
    } catch (const nlohmann::json::exception& e) {
      fail("malformed manifest entry: " + std::string(e.what()));
    }
    require(s.image.width == s.gt.width && s.image.height == s.gt.height,
            "image and ground truth differ in shape: " + s.name);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace zok::cli
