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
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace cmfd {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Digest of a directory: every regular file's relative path and SHA-256, in
// sorted path order.
std::string sha256_tree(const std::filesystem::path& root);

struct ArtifactRecord {
  std::string path;  // as written by the command
  std::string sha256;
  bool directory = false;
};

// One per command invocation. Wall-clock fields are the only ones allowed to
// differ between two runs with the same seed and config.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::string started_at;
  std::string finished_at;
  std::vector<ArtifactRecord> outputs;

  // Hashes a file or directory and appends it to outputs.
  void add_output(const std::filesystem::path& path);

  std::string to_json() const;
  static RunManifest from_json(std::string_view text);

  void write(const std::filesystem::path& path) const;
  static RunManifest read(const std::filesystem::path& path);

  // Paths whose current hash differs from the recorded one (or that vanished).
  std::vector<std::string> verify() const;
};

std::string utc_timestamp();

}  // namespace cmfd
