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

#include "cmfd/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "cmfd/error.hpp"
#include "cmfd/forgery_data.hpp"
#include "cmfd/random.hpp"

namespace cmfd {

namespace fs = std::filesystem;

namespace {

std::string id_stem(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06llu", static_cast<unsigned long long>(id));
  return buf;
}

std::uint64_t parse_u64(std::string_view text, const std::string& context) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    throw DatasetError("bad integer '" + std::string(text) + "' in " + context);
  return value;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw DatasetError("unknown split '" + std::string(name) + "'");
}

std::string image_relpath(std::uint64_t sample_id) { return "images/" + id_stem(sample_id) + ".png"; }
std::string mask_relpath(std::uint64_t sample_id) { return "masks/" + id_stem(sample_id) + ".png"; }

void write_manifest(const fs::path& root, const DatasetManifest& manifest) {
  fs::create_directories(root);
  std::ofstream out(root / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write manifest in " + root.string());
  out << "# " << manifest.version << "\n";
  out << "# split=" << split_name(manifest.split) << "\n";
  out << "# seed=" << manifest.seed << "\n";
  for (const ManifestEntry& e : manifest.entries)
    out << e.sample_id << '\t' << e.image_path << '\t' << e.mask_path << '\t' << e.attack_tag << '\n';
  if (!out) throw IoError("failed writing manifest in " + root.string());
}

DatasetManifest read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.txt";
  if (!fs::exists(path)) throw DatasetError("empty dataset: no manifest.txt in " + root.string());
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());

  DatasetManifest manifest;
  std::string line;
  if (!std::getline(in, line) || line != "# " + std::string(kDatasetVersion))
    throw DatasetError("dataset version mismatch in " + path.string() + ": expected '" +
                       std::string(kDatasetVersion) + "'");
  bool have_split = false;
  std::set<std::uint64_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (line.starts_with("# split=")) {
      manifest.split = parse_split(line.substr(8));
      have_split = true;
      continue;
    }
    if (line.starts_with("# seed=")) {
      manifest.seed = parse_u64(line.substr(7), where);
      continue;
    }
    if (line.starts_with("#")) continue;
    const std::vector<std::string> fields = split_tabs(line);
    if (fields.size() != 4) throw DatasetError("malformed manifest line " + where);
    ManifestEntry entry{parse_u64(fields[0], where), fields[1], fields[2], fields[3]};
    if (!seen.insert(entry.sample_id).second)
      throw DatasetError("duplicate sample_id " + fields[0] + " at " + where);
    if (!manifest.entries.empty() && entry.sample_id <= manifest.entries.back().sample_id)
      throw DatasetError("sample_id " + fields[0] + " not strictly increasing at " + where);
    manifest.entries.push_back(std::move(entry));
  }
  if (!have_split) throw DatasetError("manifest missing split header in " + path.string());
  if (manifest.entries.empty()) throw DatasetError("empty dataset: manifest has no entries in " + root.string());
  return manifest;
}

DatasetManifest write_dataset(const fs::path& root, Split split, std::uint64_t seed,
                              std::span<const LabeledImage> samples) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  DatasetManifest manifest;
  manifest.split = split;
  manifest.seed = seed;
  for (const LabeledImage& s : samples) {
    if (!manifest.entries.empty() && s.sample_id <= manifest.entries.back().sample_id)
      throw DatasetError("sample_id " + std::to_string(s.sample_id) + " not strictly increasing");
    validate_tri_mask(s.tri_mask);
    ManifestEntry entry{s.sample_id, image_relpath(s.sample_id), mask_relpath(s.sample_id), s.attack_tag};
    write_png_rgb(root / entry.image_path, s.image);
    write_png_gray(root / entry.mask_path, s.tri_mask);
    manifest.entries.push_back(std::move(entry));
  }
  write_manifest(root, manifest);
  return manifest;
}

Dataset Dataset::open(const fs::path& root) {
  DatasetManifest manifest = read_manifest(root);
  for (const ManifestEntry& e : manifest.entries) {
    if (!fs::exists(root / e.image_path))
      throw DatasetError("sample " + std::to_string(e.sample_id) + ": missing image " + e.image_path);
    if (!fs::exists(root / e.mask_path))
      throw DatasetError("sample " + std::to_string(e.sample_id) + ": missing mask " + e.mask_path);
  }
  return Dataset(root, std::move(manifest));
}

LabeledImage Dataset::load(std::size_t index) const {
  const ManifestEntry& e = entry(index);
  const std::string id = std::to_string(e.sample_id);
  LabeledImage out;
  out.sample_id = e.sample_id;
  out.attack_tag = e.attack_tag;
  try {
    out.image = read_png_rgb(root_ / e.image_path);
    out.tri_mask = read_png_gray(root_ / e.mask_path);
  } catch (const IoError& err) {
    throw DatasetError("sample " + id + ": " + err.what());
  }
  if (out.image.height != out.tri_mask.height || out.image.width != out.tri_mask.width)
    throw DatasetError("sample " + id + ": image and mask sizes differ");
  try {
    validate_tri_mask(out.tri_mask);
  } catch (const ValidationError& err) {
    throw DatasetError("sample " + id + ": corrupt mask: " + err.what());
  }
  return out;
}

SplitSizes split_sizes(std::size_t n, double train, double val, double test) {
  if (!(train >= 0.0 && val >= 0.0 && test >= 0.0)) throw ConfigError("split fractions must be non-negative");
  if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train));
  s.val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val));
  if (s.train + s.val > n) s.val = n - s.train;
  s.test = n - s.train - s.val;
  return s;
}

SplitSizes generate_splits(const fs::path& root, std::size_t n, std::uint64_t seed, double train, double val,
                           double test, std::size_t image_size) {
  if (n == 0) throw ConfigError("sample count must be positive");
  const SplitSizes sizes = split_sizes(n, train, val, test);
  std::uint64_t next_id = 0;
  for (const auto& [split, count] : {std::pair{Split::kTrain, sizes.train}, std::pair{Split::kVal, sizes.val},
                                      std::pair{Split::kTest, sizes.test}}) {
    std::vector<LabeledImage> samples;
    for (std::size_t i = 0; i < count; ++i, ++next_id) {
      ForgerySample f = generate_sample(mix_seed(seed, "sample" + std::to_string(next_id)), image_size);
      samples.push_back({next_id, std::move(f.image), std::move(f.tri_mask), "BASE"});
    }
    write_dataset(root / std::string(split_name(split)), split, seed, samples);
  }
  return sizes;
}

}  // namespace cmfd
