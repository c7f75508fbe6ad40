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

#include "cmfd/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmfd/error.hpp"
#include "cmfd/random.hpp"

namespace cmfd {

namespace fs = std::filesystem;

namespace {

struct CategoryName {
  AttackCategory category;
  std::string_view code;
  int max_level;
};

constexpr CategoryName kCategories[] = {
    {AttackCategory::kBase, "BASE", 0},          {AttackCategory::kBrightness, "BC", 3},
    {AttackCategory::kContrast, "CA", 3},        {AttackCategory::kColorReduction, "CR", 3},
    {AttackCategory::kBlur, "IB", 3},            {AttackCategory::kNoise, "NA", 3},
    {AttackCategory::kJpeg, "JC", 9},
};

const CategoryName& lookup(AttackCategory category) {
  for (const CategoryName& c : kCategories)
    if (c.category == category) return c;
  throw AttackSpecError("unknown attack category");
}

std::string valid_tags() {
  std::string out;
  for (const AttackSpec& spec : all_attacks()) {
    if (!out.empty()) out += ", ";
    out += attack_tag(spec);
  }
  return out;
}

template <typename F>
Image map_pixels(const Image& image, F&& f) {
  Image out = image;
  for (std::uint8_t& v : out.pixels) v = f(v);
  return out;
}

Image mean_filter(const Image& image, int kernel) {
  const auto radius = static_cast<std::ptrdiff_t>(kernel / 2);
  const auto h = static_cast<std::ptrdiff_t>(image.height);
  const auto w = static_cast<std::ptrdiff_t>(image.width);
  const double norm = 1.0 / static_cast<double>(kernel * kernel);
  Image out(image.height, image.width);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        int sum = 0;
        for (std::ptrdiff_t dy = -radius; dy <= radius; ++dy)
          for (std::ptrdiff_t dx = -radius; dx <= radius; ++dx) {
            const auto sy = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(y + dy, 0, h - 1));
            const auto sx = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(x + dx, 0, w - 1));
            sum += image.at(sy, sx, c);
          }
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = round_to_u8(sum * norm);
      }
  return out;
}

}  // namespace

void validate(const AttackSpec& spec) {
  const CategoryName& c = lookup(spec.category);
  const int lo = c.max_level == 0 ? 0 : 1;
  if (spec.level < lo || spec.level > c.max_level)
    throw AttackSpecError("invalid level " + std::to_string(spec.level) + " for " + std::string(c.code) +
                          "; valid tags: " + valid_tags());
}

AttackSpec parse_attack_tag(std::string_view tag) {
  if (tag == "BASE") return {AttackCategory::kBase, 0};
  for (const CategoryName& c : kCategories) {
    if (c.max_level == 0 || !tag.starts_with(c.code)) continue;
    const std::string_view digits = tag.substr(c.code.size());
    if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '9') {
      AttackSpec spec{c.category, digits[0] - '0'};
      if (spec.level <= c.max_level) return spec;
    }
  }
  throw AttackSpecError("invalid attack tag '" + std::string(tag) + "'; valid tags: " + valid_tags());
}

std::string attack_tag(const AttackSpec& spec) {
  validate(spec);
  const CategoryName& c = lookup(spec.category);
  if (spec.category == AttackCategory::kBase) return std::string(c.code);
  return std::string(c.code) + std::to_string(spec.level);
}

std::vector<AttackSpec> all_attacks() {
  std::vector<AttackSpec> specs;
  for (const CategoryName& c : kCategories) {
    if (c.max_level == 0) specs.push_back({c.category, 0});
    for (int level = 1; level <= c.max_level; ++level) specs.push_back({c.category, level});
  }
  return specs;
}

Image apply_attack(const Image& image, const AttackSpec& spec, std::uint64_t seed) {
  validate(spec);
  const auto idx = static_cast<std::size_t>(spec.level - 1);
  switch (spec.category) {
    case AttackCategory::kBase:
      return image;
    case AttackCategory::kBrightness: {
      // [0, 255] -> [0, 255 u]
      const double u = AttackLevels::kBrightness[idx];
      return map_pixels(image, [u](std::uint8_t v) { return round_to_u8(v * u); });
    }
    case AttackCategory::kContrast: {
      const double f = AttackLevels::kContrast[idx];
      return map_pixels(image, [f](std::uint8_t v) { return round_to_u8(127.5 + (v - 127.5) * f); });
    }
    case AttackCategory::kColorReduction: {
      const int bin = 256 / AttackLevels::kColorLevels[idx];
      return map_pixels(image, [bin](std::uint8_t v) { return static_cast<std::uint8_t>(v / bin * bin); });
    }
    case AttackCategory::kBlur:
      return mean_filter(image, AttackLevels::kBlurKernel[idx]);
    case AttackCategory::kNoise: {
      const double sigma = AttackLevels::kNoiseStd[idx];
      Rng rng(mix_seed(seed, "noise_attack"));
      return map_pixels(image, [&](std::uint8_t v) { return round_to_u8(v + rng.normal(0.0, sigma)); });
    }
    case AttackCategory::kJpeg:
      return decode_jpeg(encode_jpeg(image, AttackLevels::kJpegQuality[idx]));
  }
  throw AttackSpecError("unhandled attack category");
}

DatasetManifest attack_dataset(const Dataset& input, const AttackSpec& spec, std::uint64_t root_seed,
                               const fs::path& out_root) {
  const std::string tag = attack_tag(spec);
  fs::create_directories(out_root / "images");
  fs::create_directories(out_root / "masks");
  DatasetManifest manifest = input.manifest();
  for (std::size_t i = 0; i < input.size(); ++i) {
    ManifestEntry& entry = manifest.entries[i];
    const std::string id = std::to_string(entry.sample_id);
    try {
      const LabeledImage sample = input.load(i);
      const Image attacked = apply_attack(sample.image, spec, root_seed + entry.sample_id);
      entry.image_path = image_relpath(entry.sample_id);
      entry.mask_path = mask_relpath(entry.sample_id);
      entry.attack_tag = tag;
      write_png_rgb(out_root / entry.image_path, attacked);
      fs::copy_file(input.root() / input.entry(i).mask_path, out_root / entry.mask_path,
                    fs::copy_options::overwrite_existing);
    } catch (const DatasetError&) {
      throw;
    } catch (const std::exception& err) {
      throw DatasetError("sample " + id + ": " + err.what());
    }
  }
  write_manifest(out_root, manifest);
  return manifest;
}

}  // namespace cmfd
