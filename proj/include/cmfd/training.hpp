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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cmfd/checkpoint.hpp"
#include "cmfd/dataset.hpp"
#include "cmfd/evaluation.hpp"
#include "cmfd/network.hpp"
#include "cmfd/objective.hpp"

namespace cmfd {

using ConfigMap = std::map<std::string, std::string>;

struct TrainConfig {
  double lr0 = 0.001;
  double weight_decay = 0.0005;
  double power = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  double gamma = kDefaultGamma;
  std::uint64_t seed = 0;
  NetworkConfig network;         // encoder_depth and use_transformer live here
  std::string backbone_weights;  // optional checkpoint supplying backbone.* tensors

  void validate() const;
  ConfigMap to_map() const;
};

// Keys accepted in config files and overrides.
const std::vector<std::string>& train_config_keys();

// Flat "key = value" lines; '#' starts a comment. Duplicate keys are errors.
ConfigMap read_config_file(const std::filesystem::path& path);

// Builds a config from defaults plus the given values. "seed" is required;
// unknown keys and malformed values throw ConfigError naming the key.
TrainConfig parse_train_config(const ConfigMap& values);

// lr0 * (1 - iter/maxiter)^power; ScheduleError outside 0 <= iter <= maxiter.
double poly_lr(std::size_t iter, std::size_t maxiter, double lr0, double power);

struct AdamState {
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  static AdamState for_model(const Model& model);
};

struct TrainingExample {
  std::uint64_t sample_id = 0;
  Tensor input;  // normalised 3 x S x S
  LabelMap y_f;
  LabelMap y_d;
};

// Resizes to the network input when needed (bilinear image, nearest mask).
TrainingExample make_example(const LabeledImage& sample, std::size_t input_size);

// Forward + backward over the batch (losses averaged over samples), then one
// Adam update at learning rate lr. Throws TrainingError on a non-finite loss.
LossBreakdown train_step(Model& model, std::span<const TrainingExample> batch, AdamState& state,
                         const TrainConfig& config, double lr, std::size_t iter = 0);

struct LossRow {
  std::size_t iter = 0;
  LossBreakdown loss;
  double lr = 0.0;
};

// CSV: iter,ce_f,ce_d,mse,gamma,total,lr
void write_loss_csv(const std::filesystem::path& path, std::span<const LossRow> rows);

double selection_score(Model& model, const Dataset& val);

struct FitHooks {
  std::function<void(const LossRow&)> on_step;
  std::function<void(std::size_t epoch, double score)> on_epoch;
};

struct FitResult {
  CheckpointRecord best;
  std::vector<double> epoch_scores;  // index e holds the score after epoch e+1
  std::vector<LossRow> losses;
  ParameterSet final_params;  // weights after the last step
  std::size_t maxiter = 0;
};

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size);

FitResult fit(const Dataset& train, const Dataset& val, const TrainConfig& config, const FitHooks& hooks = {});

// Copies backbone.* tensors from a checkpoint into the model.
void load_backbone_weights(Model& model, const std::filesystem::path& checkpoint);

// Wide result table: label columns followed by precision/recall/f1 for the
// five metric classes (detection forged, detection pristine, source, target,
// pristine).
struct TableRow {
  std::vector<std::string> labels;
  std::array<Prf, kMetricClasses> metrics{};
};

struct TableReport {
  std::vector<std::string> label_columns;
  std::vector<TableRow> rows;
};

std::vector<std::string> table_header(const TableReport& report);
void write_table_csv(const std::filesystem::path& path, const TableReport& report);
TableReport read_table_csv(const std::filesystem::path& path);

// Called after each arm is trained, with the arm's labels and fit result.
using ArmHook = std::function<void(const std::vector<std::string>& labels, const FitResult& result)>;

// Arms in order (-mse,-transformer), (+mse,-transformer), (-mse,+transformer),
// (+mse,+transformer). "+mse" keeps the base gamma; "-mse" sets gamma = 0.
TableReport run_ablation(const Dataset& train, const Dataset& val, const Dataset& test, const TrainConfig& base,
                         const ArmHook& hook = {});

enum class SweepAxis { kGamma, kDepth };
SweepAxis parse_sweep_axis(std::string_view name);

// One trained run per value, every run with the base seed.
TableReport run_sweep(SweepAxis axis, std::span<const std::string> values, const Dataset& train, const Dataset& val,
                      const Dataset& test, const TrainConfig& base, const ArmHook& hook = {});

}  // namespace cmfd
