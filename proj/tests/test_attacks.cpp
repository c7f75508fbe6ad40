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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>

#include "cmfd/attacks.hpp"
#include "cmfd/dataset.hpp"
#include "cmfd/error.hpp"
#include "cmfd/forgery_data.hpp"
#include "cmfd/random.hpp"
#include "doctest.h"

using namespace cmfd;
namespace fs = std::filesystem;

namespace {

Image random_image(std::size_t side, std::uint64_t seed) {
  Image img(side, side);
  Rng rng(seed);
  for (auto& v : img.pixels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
  return img;
}

double mean_value(const Image& img) {
  double s = 0.0;
  for (auto v : img.pixels) s += v;
  return s / double(img.pixels.size());
}

double mean_abs_diff(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) s += std::abs(double(a.pixels[i]) - double(b.pixels[i]));
  return s / double(a.pixels.size());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("tag parsing covers exactly the 25 table tags") {
  const auto all = all_attacks();
  CHECK(all.size() == 25);
  for (const AttackSpec& s : all) CHECK(parse_attack_tag(attack_tag(s)) == s);
  CHECK(attack_tag(all.front()) == "BASE");
  CHECK(attack_tag(all.back()) == "JC9");
  for (const char* bad : {"JC0", "JC10", "BC4", "XX1", "base", "", "CA"}) CHECK_THROWS_AS(parse_attack_tag(bad), AttackSpecError);
  try {
    parse_attack_tag("NA7");
  } catch (const AttackSpecError& e) {
    CHECK(std::string(e.what()).find("JC9") != std::string::npos);
  }
  CHECK_THROWS_AS(validate({AttackCategory::kBlur, 4}), AttackSpecError);
}

TEST_CASE("BASE is the identity and every attack is deterministic") {
  const Image img = generate_base_image(1, 64);
  CHECK(apply_attack(img, {}, 5).pixels == img.pixels);
  for (const AttackSpec& s : all_attacks()) {
    const Image a = apply_attack(img, s, 77);
    const Image b = apply_attack(img, s, 77);
    CHECK(a.pixels == b.pixels);
    CHECK(a.height == img.height);
    CHECK(a.width == img.width);
  }
}

TEST_CASE("photometric closed forms") {
  Image flat(8, 8);
  for (auto& v : flat.pixels) v = 128;
  // 32 levels: bin width 8, 128 sits at the start of its bin
  for (auto v : apply_attack(flat, {AttackCategory::kColorReduction, 3}, 0).pixels) CHECK(v == 128);
  for (auto& v : flat.pixels) v = 131;
  for (auto v : apply_attack(flat, {AttackCategory::kColorReduction, 3}, 0).pixels) CHECK(v == 128);

  for (auto& v : flat.pixels) v = 200;
  // brightness 0.8: 200 -> 160
  for (auto v : apply_attack(flat, {AttackCategory::kBrightness, 3}, 0).pixels) CHECK(v == 160);
  // contrast 0.8 about 127.5: 127.5 + 72.5 * 0.8 = 185.5 -> 186
  for (auto v : apply_attack(flat, {AttackCategory::kContrast, 3}, 0).pixels) CHECK(v == 186);
  // a mean filter leaves a constant image unchanged, including at edges
  for (auto v : apply_attack(flat, {AttackCategory::kBlur, 3}, 0).pixels) CHECK(v == 200);

  Image ramp(1, 3);
  const std::uint8_t vals[3] = {0, 30, 90};
  for (std::size_t x = 0; x < 3; ++x)
    for (std::size_t c = 0; c < 3; ++c) ramp.at(0, x, c) = vals[x];
  // 3x3 mean with replicated edges on a 1x3 row: middle = (0 + 30 + 90) / 3
  const Image blurred = apply_attack(ramp, {AttackCategory::kBlur, 1}, 0);
  CHECK(blurred.at(0, 1, 0) == 40);
  // left edge replicates column 0: (0 + 0 + 30) / 3
  CHECK(blurred.at(0, 0, 0) == 10);
}

TEST_CASE("noise is zero-mean, seed-determined and clamped") {
  const Image img = random_image(512, 3);
  const Image noisy = apply_attack(img, {AttackCategory::kNoise, 2}, 9);
  CHECK(std::abs(mean_value(noisy) - mean_value(img)) < 0.5);
  CHECK(noisy.pixels != img.pixels);
  CHECK(apply_attack(img, {AttackCategory::kNoise, 2}, 10).pixels != noisy.pixels);
}

TEST_CASE("JPEG error shrinks as quality rises") {
  const Image img = generate_base_image(21, 128);
  double last = 1e9;
  for (int level = 1; level <= 9; ++level) {
    const double err = mean_abs_diff(apply_attack(img, {AttackCategory::kJpeg, level}, 0), img);
    CHECK(err <= last);
    last = err;
  }
  CHECK(last < 5.0);
}

TEST_CASE("attack_dataset copies masks byte for byte and tags entries") {
  const fs::path root = fs::temp_directory_path() / "cmfd_attack_test";
  fs::remove_all(root);
  std::vector<LabeledImage> samples;
  for (std::uint64_t id = 0; id < 3; ++id) {
    ForgerySample f = generate_sample(id + 40, 64);
    samples.push_back({id, f.image, f.tri_mask, "BASE"});
  }
  write_dataset(root / "in", Split::kTest, 4, samples);
  const Dataset in = Dataset::open(root / "in");
  for (const char* tag : {"BASE", "JC5", "NA3", "IB2"}) {
    const fs::path out = root / tag;
    const DatasetManifest m = attack_dataset(in, parse_attack_tag(tag), 4, out);
    REQUIRE(m.entries.size() == in.size());
    const Dataset attacked = Dataset::open(out);
    for (std::size_t i = 0; i < in.size(); ++i) {
      CHECK(attacked.entry(i).attack_tag == tag);
      CHECK(slurp(out / attacked.entry(i).mask_path) == slurp(root / "in" / in.entry(i).mask_path));
      if (std::string(tag) == "BASE") CHECK(attacked.load(i).image.pixels == in.load(i).image.pixels);
    }
  }
  fs::remove_all(root);
}
