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

#include "cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "cmfd/attacks.hpp"
#include "cmfd/checkpoint.hpp"
#include "cmfd/dataset.hpp"
#include "cmfd/error.hpp"
#include "cmfd/evaluation.hpp"
#include "cmfd/run_manifest.hpp"
#include "cmfd/training.hpp"

namespace cmfd::cli {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestName = "run_manifest.json";

// Relative output paths land under $CMFD_OUTPUT_ROOT when it is set.
fs::path output_path(const std::string& given) {
  const fs::path p(given);
  const char* root = std::getenv("CMFD_OUTPUT_ROOT");
  if (p.is_absolute() || root == nullptr || *root == '\0') return p;
  return fs::path(root) / p;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' ');
    const auto e = item.find_last_not_of(' ');
    if (b == std::string::npos) throw ConfigError("empty entry in list '" + text + "'");
    out.push_back(item.substr(b, e - b + 1));
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Finishes a run: records outputs, writes the manifest, then re-hashes every
// output. A mismatch turns the run into a failure.
int finish(RunManifest& manifest, const fs::path& dir, const std::vector<fs::path>& outputs) {
  for (const fs::path& p : outputs) manifest.add_output(p);
  manifest.finished_at = utc_timestamp();
  manifest.write(dir / kManifestName);
  const auto bad = manifest.verify();
  for (const std::string& p : bad) std::cerr << "cmfd: output failed verification: " << p << "\n";
  return bad.empty() ? kExitOk : kExitFailure;
}

RunManifest start(const std::string& command, const std::vector<std::string>& args) {
  RunManifest m;
  m.command = command;
  m.argv = args;
  m.started_at = utc_timestamp();
  return m;
}

// Training configuration with precedence flag > config file > default.
struct TrainFlags {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> gamma;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Flat key = value training config");
    app->add_option("--set", sets, "Override a config key (key=value), repeatable");
    app->add_option("--seed", seed, "Overrides the config seed");
    app->add_option("--epochs", epochs, "Overrides the config epochs");
    app->add_option("--batch-size", batch_size, "Overrides the config batch_size");
    app->add_option("--gamma", gamma, "Overrides the config gamma");
  }

  TrainConfig resolve() const {
    ConfigMap values;
    if (!config.empty()) values = read_config_file(config);
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      values[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    if (seed) values["seed"] = std::to_string(*seed);
    if (epochs) values["epochs"] = std::to_string(*epochs);
    if (batch_size) values["batch_size"] = std::to_string(*batch_size);
    if (gamma) values["gamma"] = fmt(*gamma);
    return parse_train_config(values);
  }
};

int cmd_gen(const std::vector<std::string>& args, std::size_t n, std::uint64_t seed, const std::string& out,
            const std::string& fractions, std::size_t size) {
  const auto parts = split_list(fractions);
  if (parts.size() != 3) throw ConfigError("--split-fractions needs three values: train,val,test");
  double f[3];
  for (int i = 0; i < 3; ++i) f[i] = std::stod(parts[static_cast<std::size_t>(i)]);
  split_sizes(n, f[0], f[1], f[2]);  // fail before touching the disk

  const fs::path root = output_path(out);
  RunManifest manifest = start("gen", args);
  manifest.seed = seed;
  manifest.config = {{"n", std::to_string(n)}, {"split_fractions", fractions}, {"size", std::to_string(size)}};
  const SplitSizes s = generate_splits(root, n, seed, f[0], f[1], f[2], size);
  std::cout << "generated " << s.train << " train, " << s.val << " val, " << s.test << " test samples in " << root
            << "\n";
  return finish(manifest, root, {root / "train", root / "val", root / "test"});
}

int cmd_attack(const std::vector<std::string>& args, const std::string& in, const std::string& spec_text,
               std::uint64_t seed, const std::string& out) {
  const AttackSpec spec = parse_attack_tag(spec_text);
  const Dataset input = Dataset::open(in);
  const fs::path root = output_path(out);
  RunManifest manifest = start("attack", args);
  manifest.seed = seed;
  manifest.config = {{"input", in}, {"spec", attack_tag(spec)}};
  attack_dataset(input, spec, seed, root);
  std::cout << "wrote " << input.size() << " " << attack_tag(spec) << " samples to " << root << "\n";
  return finish(manifest, root, {root / "manifest.txt", root / "images", root / "masks"});
}

int cmd_train(const std::vector<std::string>& args, const TrainFlags& flags, const std::string& data,
              const std::string& out) {
  const TrainConfig config = flags.resolve();
  const Dataset train = Dataset::open(fs::path(data) / "train");
  const Dataset val = Dataset::open(fs::path(data) / "val");
  const fs::path dir = output_path(out);
  fs::create_directories(dir);

  RunManifest manifest = start("train", args);
  manifest.seed = config.seed;
  manifest.config = config.to_map();
  FitHooks hooks;
  hooks.on_epoch = [](std::size_t epoch, double score) {
    std::cout << "epoch " << epoch << " selection_score " << fmt(score) << std::endl;
  };
  const FitResult result = fit(train, val, config, hooks);

  save_checkpoint(dir / "checkpoint.bin", result.best);
  write_loss_csv(dir / "loss_log.csv", result.losses);
  {
    std::ofstream scores(dir / "epoch_scores.csv", std::ios::binary | std::ios::trunc);
    scores << "epoch,selection_score\n";
    for (std::size_t e = 0; e < result.epoch_scores.size(); ++e)
      scores << e + 1 << ',' << fmt(result.epoch_scores[e]) << '\n';
  }
  std::cout << "best epoch " << result.best.epoch << " selection_score " << fmt(result.best.selection_score)
            << "\n";
  return finish(manifest, dir, {dir / "checkpoint.bin", dir / "loss_log.csv", dir / "epoch_scores.csv"});
}

void write_prf_csv(const fs::path& path, const std::string& task, const std::vector<std::pair<std::string, Prf>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "task,class,precision,recall,f1\n";
  for (const auto& [name, p] : rows)
    out << task << ',' << name << ',' << fmt(p.precision) << ',' << fmt(p.recall) << ',' << fmt(p.f1) << '\n';
}

int cmd_eval(const std::vector<std::string>& args, const std::string& checkpoint, const std::string& data,
             const std::string& report, bool maps) {
  const CheckpointRecord record = load_checkpoint(checkpoint);
  Model model(record.network);
  restore_model(model, record);
  const Dataset dataset = Dataset::open(data);
  const fs::path dir = output_path(report);
  fs::create_directories(dir);

  RunManifest manifest = start("eval", args);
  manifest.config = {{"checkpoint", checkpoint}, {"data", data}, {"export_maps", maps ? "true" : "false"}};
  manifest.config["checkpoint_sha256"] = sha256_file(checkpoint);

  const MaskPredictor predictor = model_predictor(model);
  const std::vector<ImageMetrics> per_image = evaluate_images(predictor, dataset);
  const auto mean = mean_metrics(per_image);
  write_prf_csv(dir / "detection.csv", "detection", {{"forged", mean[0]}, {"pristine", mean[1]}});
  write_prf_csv(dir / "distinguishment.csv", "distinguishment",
                {{"source", mean[2]}, {"target", mean[3]}, {"pristine", mean[4]}});
  const auto categories = correct_detection_count(per_image);
  write_category_csv(dir / "categories.csv", categories);
  const double score = selection_score(per_image);
  {
    std::ofstream s(dir / "summary.csv", std::ios::binary | std::ios::trunc);
    s << "metric,value\nn_images," << per_image.size() << "\nselection_score," << fmt(score) << '\n';
  }
  std::vector<fs::path> outputs = {dir / "detection.csv", dir / "distinguishment.csv", dir / "categories.csv",
                                   dir / "summary.csv"};
  if (maps) {
    export_maps(predictor, dataset, dir / "maps");
    outputs.push_back(dir / "maps");
  }
  std::cout << "detection forged F1 " << fmt(mean[0].f1) << ", selection_score " << fmt(score) << "\n";
  return finish(manifest, dir, outputs);
}

struct Splits {
  Dataset train, val, test;
};

Splits open_splits(const std::string& data) {
  const fs::path root(data);
  return {Dataset::open(root / "train"), Dataset::open(root / "val"), Dataset::open(root / "test")};
}

ArmHook arm_saver(const fs::path& dir, std::vector<fs::path>& outputs) {
  return [&outputs, dir](const std::vector<std::string>& labels, const FitResult& result) {
    std::string name;
    for (const std::string& l : labels) name += (name.empty() ? "" : "_") + l;
    const fs::path arm = dir / "arms" / name;
    save_checkpoint(arm / "checkpoint.bin", result.best);
    write_loss_csv(arm / "loss_log.csv", result.losses);
    outputs.push_back(arm / "checkpoint.bin");
    outputs.push_back(arm / "loss_log.csv");
    std::cout << "arm " << name << ": best epoch " << result.best.epoch << " selection_score "
              << fmt(result.best.selection_score) << std::endl;
  };
}

int cmd_sweep(const std::vector<std::string>& args, const TrainFlags& flags, const std::string& axis_name,
              const std::string& values_text, const std::string& data, const std::string& out) {
  const SweepAxis axis = parse_sweep_axis(axis_name);
  const std::vector<std::string> values = split_list(values_text);
  const TrainConfig base = flags.resolve();
  const Splits s = open_splits(data);
  const fs::path dir = output_path(out);
  fs::create_directories(dir);
  RunManifest manifest = start("sweep", args);
  manifest.seed = base.seed;
  manifest.config = base.to_map();
  manifest.config["sweep_axis"] = axis_name;
  manifest.config["sweep_values"] = values_text;
  std::vector<fs::path> outputs;
  const TableReport report = run_sweep(axis, values, s.train, s.val, s.test, base, arm_saver(dir, outputs));
  const fs::path csv = dir / ("sweep_" + axis_name + ".csv");
  write_table_csv(csv, report);
  outputs.push_back(csv);
  return finish(manifest, dir, outputs);
}

int cmd_ablate(const std::vector<std::string>& args, const TrainFlags& flags, const std::string& data,
               const std::string& out) {
  const TrainConfig base = flags.resolve();
  const Splits s = open_splits(data);
  const fs::path dir = output_path(out);
  fs::create_directories(dir);
  RunManifest manifest = start("ablate", args);
  manifest.seed = base.seed;
  manifest.config = base.to_map();
  std::vector<fs::path> outputs;
  const TableReport report = run_ablation(s.train, s.val, s.test, base, arm_saver(dir, outputs));
  write_table_csv(dir / "ablation.csv", report);
  outputs.push_back(dir / "ablation.csv");
  return finish(manifest, dir, outputs);
}

int cmd_infer(const std::vector<std::string>& args, const std::string& checkpoint, const std::string& image_path,
              const std::string& out) {
  const CheckpointRecord record = load_checkpoint(checkpoint);
  Model model(record.network);
  restore_model(model, record);
  const Image image = read_image(image_path);
  const fs::path dir = output_path(out);
  fs::create_directories(dir);
  RunManifest manifest = start("infer", args);
  manifest.config = {{"checkpoint", checkpoint}, {"image", image_path}};

  const PredictedMasks masks = predict_masks(model, image);
  const std::string stem = fs::path(image_path).stem().string();
  const fs::path binary = dir / (stem + "_binary.png");
  const fs::path tri = dir / (stem + "_tri.png");
  write_png_rgb(binary, render_binary_map(masks.binary));
  write_png_rgb(tri, render_tri_map(masks.tri));
  std::cout << "wrote " << binary << " and " << tri << "\n";
  return finish(manifest, dir, {binary, tri});
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Copy-move forgery detection and source/target distinguishment"};
  app.name("cmfd");
  app.require_subcommand(1);

  std::size_t n = 0, size = 256;
  std::uint64_t seed = 0;
  std::string out, in, spec, fractions = "0.8,0.1,0.1", data, checkpoint, report, axis, values, image;
  bool maps = false, resume = false;
  TrainFlags flags;

  CLI::App* gen = app.add_subcommand("gen", "Generate a synthetic copy-move dataset with train/val/test splits");
  gen->add_option("--n", n, "Number of samples")->required();
  gen->add_option("--seed", seed, "Root seed")->required();
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--split-fractions", fractions, "train,val,test fractions summing to 1")->capture_default_str();
  gen->add_option("--size", size, "Image side in pixels (>= 64)")->capture_default_str();

  CLI::App* attack = app.add_subcommand("attack", "Apply one post-processing attack to a dataset split");
  attack->add_option("--in", in, "Input dataset split")->required();
  attack->add_option("--spec", spec, "Attack tag, e.g. BASE, BC2, JC5")->required();
  attack->add_option("--seed", seed, "Root seed (noise attacks)")->required();
  attack->add_option("--out", out, "Output directory")->required();

  CLI::App* train = app.add_subcommand("train", "Train a model and keep the best validation checkpoint");
  flags.attach(train);
  train->add_option("--data", data, "Dataset root holding train/ and val/")->required();
  train->add_option("--out", out, "Run directory")->required();
  train->add_flag("--resume", resume, "Not supported; rejected with an error");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data, "Dataset split directory")->required();
  eval->add_option("--report", report, "Report directory")->required();
  eval->add_flag("--export-maps", maps, "Also write binary and tri-class map images");

  CLI::App* sweep = app.add_subcommand("sweep", "Train one run per gamma or depth value and tabulate test metrics");
  flags.attach(sweep);
  sweep->add_option("--axis", axis, "gamma or depth")->required();
  sweep->add_option("--values", values, "Comma-separated values, e.g. 0.01,0.1,1,10,100,1000")->required();
  sweep->add_option("--data", data, "Dataset root holding train/, val/ and test/")->required();
  sweep->add_option("--out", out, "Output directory")->required();

  CLI::App* ablate = app.add_subcommand("ablate", "Train the four MSE-loss/transformer arms and tabulate");
  flags.attach(ablate);
  ablate->add_option("--data", data, "Dataset root holding train/, val/ and test/")->required();
  ablate->add_option("--out", out, "Output directory")->required();

  CLI::App* infer = app.add_subcommand("infer", "Predict detection and distinguishment maps for one image");
  infer->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  infer->add_option("--image", image, "PNG or JPEG image")->required();
  infer->add_option("--out", out, "Output directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (gen->parsed()) return cmd_gen(args, n, seed, out, fractions, size);
    if (attack->parsed()) return cmd_attack(args, in, spec, seed, out);
    if (train->parsed()) {
      if (resume) {
        std::cerr << "cmfd train: --resume is not supported; training always starts from a fresh "
                     "initialisation (use backbone_weights to reuse backbone tensors)\n";
        return kExitUsage;
      }
      return cmd_train(args, flags, data, out);
    }
    if (eval->parsed()) return cmd_eval(args, checkpoint, data, report, maps);
    if (sweep->parsed()) return cmd_sweep(args, flags, axis, values, data, out);
    if (ablate->parsed()) return cmd_ablate(args, flags, data, out);
    if (infer->parsed()) return cmd_infer(args, checkpoint, image, out);
  } catch (const ConfigError& e) {
    std::cerr << "cmfd: configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const AttackSpecError& e) {
    std::cerr << "cmfd: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "cmfd: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace cmfd::cli
