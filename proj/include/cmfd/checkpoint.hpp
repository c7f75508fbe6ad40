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
#include <map>
#include <string>

#include "cmfd/network.hpp"

namespace cmfd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Everything needed to rebuild a trained model and audit where it came from.
struct CheckpointRecord {
  NetworkConfig network;
  ParameterSet params;
  std::size_t epoch = 0;            // 1-based epoch the weights were taken after
  double selection_score = 0.0;     // validation score at that epoch
  std::string val_data;             // validation split root used for selection
  std::map<std::string, std::string> train_config;  // flat key = value snapshot
  double norm_mean = 0.5;
  double norm_std = 0.25;
};

// Layout: "CMFDCKPT", u32 header length, JSON header, then each tensor's
// doubles (little endian) in header order.
void save_checkpoint(const std::filesystem::path& path, const CheckpointRecord& record);

// Throws CheckpointError when the stored tensors do not match the schema
// implied by the stored NetworkConfig, or when the file is truncated.
CheckpointRecord load_checkpoint(const std::filesystem::path& path);

// Loads the parameters into a model built with the same NetworkConfig.
void restore_model(Model& model, const CheckpointRecord& record);

}  // namespace cmfd
