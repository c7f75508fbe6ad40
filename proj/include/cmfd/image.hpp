// Copyright 2026 The cmfd Authors. All Rights Reserved.
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
#include <vector>

#include "cmfd/tensor.hpp"

namespace cmfd {

// 8-bit RGB raster, interleaved row-major (y, x, channel).
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(h * w * 3, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * 3 + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

// Single-channel 8-bit raster; used for label maps (tri-class and binary).
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0)
      : height(h), width(w), labels(h * w, fill) {}

  std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::size_t size() const { return labels.size(); }
  std::size_t count(std::uint8_t value) const;

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

Image read_png_rgb(const std::filesystem::path& path);
void write_png_rgb(const std::filesystem::path& path, const Image& image);
LabelMap read_png_gray(const std::filesystem::path& path);
void write_png_gray(const std::filesystem::path& path, const LabelMap& map);

// Reads PNG or JPEG by signature; grayscale and alpha inputs become RGB.
Image read_image(const std::filesystem::path& path);

// Baseline JPEG encode/decode with libjpeg, islow DCT, 4:2:0 chroma
// subsampling and no optimization passes, so output is a pure function of
// (image, quality) for a given libjpeg build.
std::vector<std::uint8_t> encode_jpeg(const Image& image, int quality);
Image decode_jpeg(const std::vector<std::uint8_t>& bytes);

// Half-pixel-centred bilinear resampling with edge clamping.
Image resize_bilinear(const Image& image, std::size_t height, std::size_t width);
LabelMap resize_nearest(const LabelMap& map, std::size_t height, std::size_t width);

// Round-half-up and clamp to [0, 255].
inline std::uint8_t round_to_u8(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 255.0) return 255;
  return static_cast<std::uint8_t>(v + 0.5);
}

// Per-channel normalization (x/255 - mean)/std into a 3 x H x W tensor.
inline constexpr double kNormMean = 0.5;
inline constexpr double kNormStd = 0.25;
Tensor image_to_tensor(const Image& image);

}  // namespace cmfd
