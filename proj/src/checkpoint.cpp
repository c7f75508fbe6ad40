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

#include "cmfd/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "cmfd/error.hpp"
#include "cmfd/image.hpp"
#include "json.hpp"

namespace cmfd {

namespace fs = std::filesystem;
using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'C', 'M', 'F', 'D', 'C', 'K', 'P', 'T'};

json config_to_json(const NetworkConfig& c) {
  return {{"input_size", c.input_size},           {"embed_channels", c.embed_channels},
          {"encoder_depth", c.encoder_depth},     {"num_heads", c.num_heads},
          {"window", c.window},                   {"decoder_channels", c.decoder_channels},
          {"mlp_ratio", c.mlp_ratio},             {"use_transformer", c.use_transformer}};
}

NetworkConfig config_from_json(const json& j) {
  NetworkConfig c;
  c.input_size = j.at("input_size").get<std::size_t>();
  c.embed_channels = j.at("embed_channels").get<std::size_t>();
  c.encoder_depth = j.at("encoder_depth").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.window = j.at("window").get<std::size_t>();
  c.decoder_channels = j.at("decoder_channels").get<std::vector<std::size_t>>();
  c.mlp_ratio = j.at("mlp_ratio").get<std::size_t>();
  c.use_transformer = j.at("use_transformer").get<bool>();
  return c;
}

}  // namespace

void save_checkpoint(const fs::path& path, const CheckpointRecord& record) {
  json tensors = json::array();
  for (const NamedTensor& t : record.params) tensors.push_back({{"name", t.name}, {"shape", t.value.shape()}});
  const json header = {
      {"format_version", kCheckpointVersion},
      {"network", config_to_json(record.network)},
      {"normalization", {{"mean", record.norm_mean}, {"std", record.norm_std}}},
      {"provenance",
       {{"epoch", record.epoch},
        {"selection_score", record.selection_score},
        {"val_data", record.val_data},
        {"train_config", record.train_config}}},
      {"tensors", tensors},
  };
  const std::string text = header.dump();

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const auto length = static_cast<std::uint32_t>(text.size());
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&length), sizeof(length));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const NamedTensor& t : record.params)
    out.write(reinterpret_cast<const char*>(t.value.data()),
              static_cast<std::streamsize>(t.value.size() * sizeof(double)));
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

CheckpointRecord load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  std::uint32_t length = 0;
  in.read(magic, sizeof(magic));
  in.read(reinterpret_cast<char*>(&length), sizeof(length));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw CheckpointError(path.string() + ": not a cmfd checkpoint");
  std::string text(length, '\0');
  in.read(text.data(), length);
  if (!in) throw CheckpointError(path.string() + ": truncated header");

  CheckpointRecord record;
  std::vector<TensorSpec> stored;
  try {
    const json header = json::parse(text);
    const auto version = header.at("format_version").get<std::uint32_t>();
    if (version != kCheckpointVersion)
      throw CheckpointError(path.string() + ": unsupported format version " + std::to_string(version));
    record.network = config_from_json(header.at("network"));
    record.norm_mean = header.at("normalization").at("mean").get<double>();
    record.norm_std = header.at("normalization").at("std").get<double>();
    const json& prov = header.at("provenance");
    record.epoch = prov.at("epoch").get<std::size_t>();
    record.selection_score = prov.at("selection_score").get<double>();
    record.val_data = prov.at("val_data").get<std::string>();
    record.train_config = prov.at("train_config").get<std::map<std::string, std::string>>();
    for (const json& t : header.at("tensors"))
      stored.push_back({t.at("name").get<std::string>(), t.at("shape").get<Shape>()});
  } catch (const json::exception& e) {
    throw CheckpointError(path.string() + ": malformed header: " + e.what());
  }

  if (record.norm_mean != kNormMean || record.norm_std != kNormStd)
    throw CheckpointError(path.string() + ": normalization constants differ from this build");
  try {
    record.network.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": invalid network config: " + e.what());
  }
  const ParameterSchema expected = parameter_schema(record.network);
  if (stored != expected) {
    std::string detail = std::to_string(stored.size()) + " stored vs " + std::to_string(expected.size()) + " expected";
    for (std::size_t i = 0; i < std::min(stored.size(), expected.size()); ++i)
      if (!(stored[i] == expected[i])) {
        detail = "first difference at " + expected[i].name + shape_string(expected[i].shape) + " vs " +
                 stored[i].name + shape_string(stored[i].shape);
        break;
      }
    throw CheckpointError(path.string() + ": parameter schema mismatch (" + detail + ")");
  }

  for (const TensorSpec& spec : stored) {
    Tensor value(spec.shape);
    in.read(reinterpret_cast<char*>(value.data()), static_cast<std::streamsize>(value.size() * sizeof(double)));
    if (!in) throw CheckpointError(path.string() + ": truncated tensor data at " + spec.name);
    record.params.push_back({spec.name, std::move(value)});
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(path.string() + ": trailing bytes");
  return record;
}

void restore_model(Model& model, const CheckpointRecord& record) {
  if (!(model.config() == record.network)) throw CheckpointError("model config differs from checkpoint config");
  model.load_parameters(record.params);
}

}  // namespace cmfd
