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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmfd/image.hpp"

namespace cmfd {

inline constexpr std::string_view kDatasetVersion = "cmfd-dataset v1";

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split split);
Split parse_split(std::string_view name);

struct ManifestEntry {
  std::uint64_t sample_id = 0;
  std::string image_path;  // relative to the dataset root
  std::string mask_path;
  std::string attack_tag = "BASE";

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct DatasetManifest {
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  std::string version{kDatasetVersion};
  std::vector<ManifestEntry> entries;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

// One stored record: the image, its tri-class mask and its attack tag.
struct LabeledImage {
  std::uint64_t sample_id = 0;
  Image image;
  LabelMap tri_mask;
  std::string attack_tag = "BASE";
};

// Layout: <root>/manifest.txt, <root>/images/<id>.png (RGB),
// <root>/masks/<id>.png (8-bit gray holding raw labels 0/1/2).
// Manifest lines after the '#' header: id \t image \t mask \t attack_tag.
DatasetManifest write_dataset(const std::filesystem::path& root, Split split, std::uint64_t seed,
                              std::span<const LabeledImage> samples);

void write_manifest(const std::filesystem::path& root, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& root);

struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

// round(n * f) for train and val, the remainder for test. Fractions must be
// non-negative and sum to 1 within 1e-9.
SplitSizes split_sizes(std::size_t n, double train, double val, double test);

// Generates n samples (ids 0..n-1, per-sample seed mix_seed(seed, "sample<id>"))
// and writes them as <root>/train, <root>/val and <root>/test in id order.
SplitSizes generate_splits(const std::filesystem::path& root, std::size_t n, std::uint64_t seed, double train,
                           double val, double test, std::size_t image_size = 256);

std::string image_relpath(std::uint64_t sample_id);
std::string mask_relpath(std::uint64_t sample_id);

// Read-only view of a dataset on disk; samples are decoded on demand.
class Dataset {
 public:
  static Dataset open(const std::filesystem::path& root);

  const std::filesystem::path& root() const { return root_; }
  const DatasetManifest& manifest() const { return manifest_; }
  std::size_t size() const { return manifest_.entries.size(); }
  const ManifestEntry& entry(std::size_t index) const { return manifest_.entries.at(index); }

  LabeledImage load(std::size_t index) const;

 private:
  Dataset(std::filesystem::path root, DatasetManifest manifest)
      : root_(std::move(root)), manifest_(std::move(manifest)) {}

  std::filesystem::path root_;
  DatasetManifest manifest_;
};

}  // namespace cmfd
