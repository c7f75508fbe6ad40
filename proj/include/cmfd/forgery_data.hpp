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
#include <vector>

#include "cmfd/error.hpp"
#include "cmfd/image.hpp"

namespace cmfd {

// Tri-class labels shared by masks, predictions and metrics.
enum Label : std::uint8_t { kPristine = 0, kSource = 1, kTarget = 2 };

inline constexpr std::size_t kDefaultSampleSize = 256;
inline constexpr double kMinSourceArea = 0.02;
inline constexpr double kMaxSourceArea = 0.15;
inline constexpr int kRegionDraws = 100;
inline constexpr int kPlacementDraws = 200;
inline constexpr int kRegenerations = 5;
inline constexpr std::uint64_t kRegenerationStride = 1'000'000;

// Raised by compose_forgery when no non-overlapping in-bounds offset exists
// within the draw budget.
class PlacementError : public GenerationError {
 public:
  using GenerationError::GenerationError;
};

struct ForgeryMeta {
  std::uint64_t seed = 0;          // requested seed
  std::uint64_t attempt_seed = 0;  // seed + k * 10^6 for the accepted attempt k
  double scale = 1.0;
  double rotation_deg = 0.0;
  bool flip = false;
  std::size_t offset_y = 0;
  std::size_t offset_x = 0;
};

struct ForgerySample {
  Image image;
  LabelMap tri_mask;
  ForgeryMeta meta;
};

// A bounding-box crop: real-valued RGB pixels plus a 0/1 membership mask.
struct Patch {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;  // (y, x, c) interleaved
  LabelMap mask;

  double& at(std::size_t y, std::size_t x, std::size_t c) { return pixels[(y * width + x) * 3 + c]; }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
};

Image generate_base_image(std::uint64_t seed, std::size_t size = kDefaultSampleSize);

// Single 8-connected blob with area in [2%, 15%] of height*width.
LabelMap sample_source_region(std::uint64_t seed, std::size_t height, std::size_t width);

Patch extract_patch(const Image& image, const LabelMap& region);

// Flip (horizontal, applied first), counter-clockwise rotation and isotropic
// scaling about the patch centre. Masks use nearest-neighbour lookup, pixels
// bilinear; the result is cropped to the bounds of the transformed mask.
Patch apply_affine(const Patch& patch, double scale, double rotation_deg, bool flip);

ForgerySample compose_forgery(const Image& base, const LabelMap& src_mask, double scale,
                              double rotation_deg, bool flip, std::uint64_t seed);

// Full generation pipeline for one sample; retries with seed + k * 10^6 when
// placement fails, up to kRegenerations times.
ForgerySample generate_sample(std::uint64_t seed, std::size_t size = kDefaultSampleSize);

// Ground-truth detection mask: 1 wherever the tri-class label is non-zero.
LabelMap binary_mask(const LabelMap& tri_mask);

void validate_tri_mask(const LabelMap& tri_mask);

}  // namespace cmfd
