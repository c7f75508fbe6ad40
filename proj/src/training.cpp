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

#include "cmfd/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cmfd/error.hpp"
#include "cmfd/forgery_data.hpp"
#include "cmfd/random.hpp"

namespace cmfd {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError("config key '" + key + "': expected a number, got '" + text + "'");
  return v;
}

std::uint64_t parse_uint(const std::string& key, const std::string& text) {
  std::uint64_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + text + "'");
}

std::vector<std::size_t> parse_uint_list(const std::string& key, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_uint(key, trim(item)));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("lr0 must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(power >= 0.0)) throw ConfigError("power must be non-negative");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  network.validate();
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> keys = {
      "lr0",       "weight_decay",   "power",     "epochs",          "batch_size",
      "gamma",     "seed",           "encoder_depth", "use_transformer", "input_size",
      "embed_channels", "num_heads", "window",    "decoder_channels", "mlp_ratio",
      "backbone_weights"};
  return keys;
}

ConfigMap TrainConfig::to_map() const {
  std::string channels;
  for (std::size_t i = 0; i < network.decoder_channels.size(); ++i)
    channels += (i ? "," : "") + std::to_string(network.decoder_channels[i]);
  return {{"lr0", format_real(lr0)},
          {"weight_decay", format_real(weight_decay)},
          {"power", format_real(power)},
          {"epochs", std::to_string(epochs)},
          {"batch_size", std::to_string(batch_size)},
          {"gamma", format_real(gamma)},
          {"seed", std::to_string(seed)},
          {"encoder_depth", std::to_string(network.encoder_depth)},
          {"use_transformer", network.use_transformer ? "true" : "false"},
          {"input_size", std::to_string(network.input_size)},
          {"embed_channels", std::to_string(network.embed_channels)},
          {"num_heads", std::to_string(network.num_heads)},
          {"window", std::to_string(network.window)},
          {"decoder_channels", channels},
          {"mlp_ratio", std::to_string(network.mlp_ratio)},
          {"backbone_weights", backbone_weights}};
}

ConfigMap read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  ConfigMap out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": empty key");
    if (!out.emplace(key, value).second)
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return out;
}

TrainConfig parse_train_config(const ConfigMap& values) {
  const auto& keys = train_config_keys();
  for (const auto& [key, value] : values)
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError("unknown config key '" + key + "'");
  if (!values.contains("seed")) throw ConfigError("missing required config key 'seed'");

  TrainConfig c;
  for (const auto& [key, value] : values) {
    if (key == "lr0")
      c.lr0 = parse_real(key, value);
    else if (key == "weight_decay")
      c.weight_decay = parse_real(key, value);
    else if (key == "power")
      c.power = parse_real(key, value);
    else if (key == "epochs")
      c.epochs = parse_uint(key, value);
    else if (key == "batch_size")
      c.batch_size = parse_uint(key, value);
    else if (key == "gamma")
      c.gamma = parse_real(key, value);
    else if (key == "seed")
      c.seed = parse_uint(key, value);
    else if (key == "encoder_depth")
      c.network.encoder_depth = parse_uint(key, value);
    else if (key == "use_transformer")
      c.network.use_transformer = parse_bool(key, value);
    else if (key == "input_size")
      c.network.input_size = parse_uint(key, value);
    else if (key == "embed_channels")
      c.network.embed_channels = parse_uint(key, value);
    else if (key == "num_heads")
      c.network.num_heads = parse_uint(key, value);
    else if (key == "window")
      c.network.window = parse_uint(key, value);
    else if (key == "decoder_channels")
      c.network.decoder_channels = parse_uint_list(key, value);
    else if (key == "mlp_ratio")
      c.network.mlp_ratio = parse_uint(key, value);
    else if (key == "backbone_weights")
      c.backbone_weights = value;
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Optimisation

double poly_lr(std::size_t iter, std::size_t maxiter, double lr0, double power) {
  if (maxiter < 1) throw ScheduleError("maxiter must be at least 1");
  if (iter > maxiter)
    throw ScheduleError("iteration " + std::to_string(iter) + " beyond maxiter " + std::to_string(maxiter));
  // integer numerator keeps the base exact near the end of the schedule
  return lr0 * std::pow(static_cast<double>(maxiter - iter) / static_cast<double>(maxiter), power);
}

AdamState AdamState::for_model(const Model& model) {
  AdamState s;
  for (const Param& p : model.store().params()) {
    s.m.emplace_back(p.value.shape());
    s.v.emplace_back(p.value.shape());
  }
  return s;
}

TrainingExample make_example(const LabeledImage& sample, std::size_t input_size) {
  TrainingExample ex;
  ex.sample_id = sample.sample_id;
  const bool resize = sample.image.height != input_size || sample.image.width != input_size;
  ex.input = image_to_tensor(resize ? resize_bilinear(sample.image, input_size, input_size) : sample.image);
  ex.y_d = resize ? resize_nearest(sample.tri_mask, input_size, input_size) : sample.tri_mask;
  ex.y_f = binary_mask(ex.y_d);
  return ex;
}

LossBreakdown train_step(Model& model, std::span<const TrainingExample> batch, AdamState& state,
                         const TrainConfig& config, double lr, std::size_t iter) {
  if (batch.empty()) throw TrainingError("empty batch");
  auto& params = model.store().params();
  if (state.m.size() != params.size()) throw TrainingError("optimizer state does not match the model");

  model.store().zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  LossBreakdown mean;
  mean.gamma = config.gamma;
  for (const TrainingExample& ex : batch) {
    const PredictionPair pred = model.forward(ex.input);
    LogitGradients g;
    const LossBreakdown l =
        total_loss_and_gradients(pred.det_logits, pred.dist_logits, ex.y_f, ex.y_d, config.gamma, g);
    mean.ce_f += l.ce_f;
    mean.ce_d += l.ce_d;
    mean.mse += l.mse;
    for (double& v : g.det.values()) v *= inv;
    for (double& v : g.dist.values()) v *= inv;
    model.backward(g.det, g.dist);
  }
  mean.ce_f *= inv;
  mean.ce_d *= inv;
  mean.mse *= inv;
  mean.total = combine_terms(mean.ce_f, mean.ce_d, mean.mse, mean.gamma);
  if (!std::isfinite(mean.total)) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "non-finite loss at iter %zu (lr=%.6g): ce_f=%g ce_d=%g mse=%g gamma=%g total=%g",
                  iter, lr, mean.ce_f, mean.ce_d, mean.mse, mean.gamma, mean.total);
    throw TrainingError(buf);
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(AdamState::kBeta1, t);
  const double c2 = 1.0 - std::pow(AdamState::kBeta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Param& p = params[k];
    double* w = p.value.data();
    const double* gr = p.grad.data();
    double* m = state.m[k].data();
    double* v = state.v[k].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = gr[i] + config.weight_decay * w[i];
      m[i] = AdamState::kBeta1 * m[i] + (1.0 - AdamState::kBeta1) * g;
      v[i] = AdamState::kBeta2 * v[i] + (1.0 - AdamState::kBeta2) * g * g;
      const double step = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + AdamState::kEps);
      if (step != 0.0) w[i] -= step;
    }
  }
  return mean;
}

void write_loss_csv(const fs::path& path, std::span<const LossRow> rows) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iter,ce_f,ce_d,mse,gamma,total,lr\n";
  char buf[256];
  for (const LossRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.loss.ce_f, r.loss.ce_d,
                  r.loss.mse, r.loss.gamma, r.loss.total, r.lr);
    out << buf;
  }
  if (!out) throw IoError("failed writing " + path.string());
}

double selection_score(Model& model, const Dataset& val) {
  const auto metrics = evaluate_images(model_predictor(model), val);
  return selection_score(metrics);
}

std::size_t steps_per_epoch(std::size_t n, std::size_t batch_size) {
  return (n + batch_size - 1) / batch_size;
}

void load_backbone_weights(Model& model, const fs::path& checkpoint) {
  const CheckpointRecord record = load_checkpoint(checkpoint);
  std::size_t copied = 0;
  for (const NamedTensor& t : record.params) {
    if (!t.name.starts_with("backbone.")) continue;
    Param* target = nullptr;
    try {
      target = &model.store().find(t.name);
    } catch (const Error&) {
      throw CheckpointError("backbone tensor " + t.name + " not present in this model");
    }
    if (target->value.shape() != t.value.shape())
      throw CheckpointError("backbone tensor " + t.name + " has shape " + shape_string(t.value.shape()) +
                            ", model expects " + shape_string(target->value.shape()));
    target->value = t.value;
    ++copied;
  }
  if (copied == 0) throw CheckpointError(checkpoint.string() + " holds no backbone tensors");
}

FitResult fit(const Dataset& train, const Dataset& val, const TrainConfig& config, const FitHooks& hooks) {
  config.validate();
  if (train.size() == 0) throw DatasetError("training split is empty");
  if (val.size() == 0) throw DatasetError("validation split is empty");

  Model model(config.network, config.seed);
  if (!config.backbone_weights.empty()) load_backbone_weights(model, config.backbone_weights);
  AdamState state = AdamState::for_model(model);

  const std::size_t n = train.size();
  const std::size_t spe = steps_per_epoch(n, config.batch_size);
  FitResult result;
  result.maxiter = config.epochs * spe;
  result.best.network = config.network;
  result.best.val_data = val.root().string();
  result.best.train_config = config.to_map();

  std::size_t iter = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(config.seed, "epoch" + std::to_string(epoch)));
    for (std::size_t i = n; i-- > 1;)
      std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);

    for (std::size_t s = 0; s < spe; ++s) {
      std::vector<TrainingExample> batch;
      for (std::size_t i = s * config.batch_size; i < std::min(n, (s + 1) * config.batch_size); ++i)
        batch.push_back(make_example(train.load(order[i]), config.network.input_size));
      const double lr = poly_lr(iter, result.maxiter, config.lr0, config.power);
      const LossRow row{iter, train_step(model, batch, state, config, lr, iter), lr};
      result.losses.push_back(row);
      if (hooks.on_step) hooks.on_step(row);
      ++iter;
    }

    const double score = selection_score(model, val);
    result.epoch_scores.push_back(score);
    if (hooks.on_epoch) hooks.on_epoch(epoch, score);
    if (epoch == 1 || score > result.best.selection_score) {
      result.best.epoch = epoch;
      result.best.selection_score = score;
      result.best.params = model.parameters();
    }
  }
  result.final_params = model.parameters();
  return result;
}

// ---------------------------------------------------------------------------
// Result tables

std::vector<std::string> table_header(const TableReport& report) {
  std::vector<std::string> header = report.label_columns;
  static const char* const kPrefixes[kMetricClasses] = {"det_forged", "det_pristine", "dist_source", "dist_target",
                                                        "dist_pristine"};
  for (const char* prefix : kPrefixes)
    for (const char* stat : {"precision", "recall", "f1"}) header.push_back(std::string(prefix) + "_" + stat);
  return header;
}

void write_table_csv(const fs::path& path, const TableReport& report) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto header = table_header(report);
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const TableRow& row : report.rows) {
    if (row.labels.size() != report.label_columns.size()) throw ValidationError("row label count mismatch");
    for (std::size_t i = 0; i < row.labels.size(); ++i) out << (i ? "," : "") << row.labels[i];
    for (const Prf& p : row.metrics)
      out << ',' << format_real(p.precision) << ',' << format_real(p.recall) << ',' << format_real(p.f1);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

TableReport read_table_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  const auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + ": empty report");
  const auto header = split(line);
  const std::size_t metric_cols = 3 * kMetricClasses;
  if (header.size() < metric_cols) throw ValidationError(path.string() + ": too few columns");
  TableReport report;
  report.label_columns.assign(header.begin(), header.end() - metric_cols);
  if (table_header(report) != header) throw ValidationError(path.string() + ": unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw ValidationError(path.string() + ": ragged row");
    TableRow row;
    const std::size_t nl = report.label_columns.size();
    row.labels.assign(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(nl));
    for (std::size_t k = 0; k < kMetricClasses; ++k) {
      row.metrics[k].precision = parse_real(header[nl + 3 * k], cells[nl + 3 * k]);
      row.metrics[k].recall = parse_real(header[nl + 3 * k + 1], cells[nl + 3 * k + 1]);
      row.metrics[k].f1 = parse_real(header[nl + 3 * k + 2], cells[nl + 3 * k + 2]);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

TableRow train_and_test(const std::vector<std::string>& labels, const TrainConfig& config, const Dataset& train,
                        const Dataset& val, const Dataset& test, const ArmHook& hook) {
  const FitResult result = fit(train, val, config);
  if (hook) hook(labels, result);
  Model model(config.network, config.seed);
  restore_model(model, result.best);
  TableRow row;
  row.labels = labels;
  row.metrics = mean_metrics(evaluate_images(model_predictor(model), test));
  return row;
}

}  // namespace

TableReport run_ablation(const Dataset& train, const Dataset& val, const Dataset& test, const TrainConfig& base,
                         const ArmHook& hook) {
  TableReport report;
  report.label_columns = {"mse_loss", "transformer"};
  for (const bool transformer : {false, true})
    for (const bool mse : {false, true}) {
      TrainConfig c = base;
      c.gamma = mse ? base.gamma : 0.0;
      c.network.use_transformer = transformer;
      report.rows.push_back(
          train_and_test({mse ? "yes" : "no", transformer ? "yes" : "no"}, c, train, val, test, hook));
    }
  return report;
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "gamma") return SweepAxis::kGamma;
  if (name == "depth") return SweepAxis::kDepth;
  throw ConfigError("sweep axis must be 'gamma' or 'depth', got '" + std::string(name) + "'");
}

TableReport run_sweep(SweepAxis axis, std::span<const std::string> values, const Dataset& train, const Dataset& val,
                      const Dataset& test, const TrainConfig& base, const ArmHook& hook) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  const std::string key = axis == SweepAxis::kGamma ? "gamma" : "depth";
  // Parse everything up front so a typo fails before any training.
  std::vector<TrainConfig> configs;
  for (const std::string& value : values) {
    TrainConfig c = base;
    if (axis == SweepAxis::kGamma) {
      c.gamma = parse_real(key, value);
    } else {
      c.network.encoder_depth = parse_uint(key, value);
      if (c.network.encoder_depth < 1) throw ConfigError("depth values must be at least 1");
    }
    c.validate();
    configs.push_back(std::move(c));
  }
  TableReport report;
  report.label_columns = {key};
  for (std::size_t i = 0; i < values.size(); ++i)
    report.rows.push_back(train_and_test({values[i]}, configs[i], train, val, test, hook));
  return report;
}

}  // namespace cmfd
