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

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cmfd/dataset.hpp"
#include "cmfd/image.hpp"

namespace cmfd {

enum class AttackCategory { kBase, kBrightness, kContrast, kColorReduction, kBlur, kNoise, kJpeg };

// Post-processing attack: category plus severity level (0 for BASE, 1-3 for
// BC/CA/CR/IB/NA, 1-9 for JC). Tags read as "<CAT><level>", e.g. "JC5".
struct AttackSpec {
  AttackCategory category = AttackCategory::kBase;
  int level = 0;

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

// Per-level severity parameters; one table for every category.
struct AttackLevels {
  static constexpr double kBrightness[3] = {0.95, 0.90, 0.80};
  static constexpr double kContrast[3] = {0.95, 0.90, 0.80};
  static constexpr int kColorLevels[3] = {128, 64, 32};
  static constexpr int kBlurKernel[3] = {3, 5, 7};
  static constexpr double kNoiseStd[3] = {2.0, 5.0, 10.0};
  static constexpr int kJpegQuality[9] = {20, 30, 40, 50, 60, 70, 80, 90, 100};
};

void validate(const AttackSpec& spec);
AttackSpec parse_attack_tag(std::string_view tag);
std::string attack_tag(const AttackSpec& spec);

// All 25 valid tags, in table order: BASE, BC1..3, CA1..3, CR1..3, IB1..3,
// NA1..3, JC1..9.
std::vector<AttackSpec> all_attacks();

// Geometry-preserving photometric or compression attack. The seed is only
// consumed by noise addition.
Image apply_attack(const Image& image, const AttackSpec& spec, std::uint64_t seed);

// Writes an attacked copy of a dataset: images transformed, mask files copied
// byte-for-byte, attack_tag set on every entry. Per-sample seed is
// root_seed + sample_id.
DatasetManifest attack_dataset(const Dataset& input, const AttackSpec& spec, std::uint64_t root_seed,
                               const std::filesystem::path& out_root);

}  // namespace cmfd
