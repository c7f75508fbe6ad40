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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "cmfd/attacks.hpp"
#include "cmfd/checkpoint.hpp"
#include "cmfd/dataset.hpp"
#include "cmfd/evaluation.hpp"
#include "cmfd/forgery_data.hpp"
#include "cmfd/network.hpp"
#include "cmfd/objective.hpp"
#include "cmfd/random.hpp"
#include "cmfd/run_manifest.hpp"
#include "cmfd/training.hpp"

using namespace cmfd;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

fs::path work_root() {
  static const fs::path root = [] {
    ::unsetenv("CMFD_OUTPUT_ROOT");
    fs::path r = fs::temp_directory_path() / "cmfd_acceptance";
    fs::remove_all(r);
    fs::create_directories(r);
    return r;
  }();
  return root;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Reduced-width network used by the optimisation criteria.
NetworkConfig small_network() {
  NetworkConfig c;
  c.input_size = 64;
  c.embed_channels = 32;
  c.num_heads = 4;
  c.decoder_channels = {32, 16, 16, 8};
  return c;
}

// ---------------------------------------------------------------- 1

Outcome gradient_check() {
  Model model(small_network(), 7);
  Rng jitter(70);
  // move off the zero-initialised branch scales and biases
  for (Param& p : model.store().params())
    for (double& v : p.value.values()) v += jitter.uniform(-0.05, 0.05);
  const ForgerySample s = generate_sample(71, 64);
  const Tensor x = image_to_tensor(s.image);
  const LabelMap yf = binary_mask(s.tri_mask);
  const auto loss = [&] {
    const PredictionPair p = model.forward(x);
    return total_loss(p.det_logits, p.dist_logits, yf, s.tri_mask, 1000.0).total;
  };
  model.store().zero_grad();
  const PredictionPair p = model.forward(x);
  LogitGradients g;
  total_loss_and_gradients(p.det_logits, p.dist_logits, yf, s.tri_mask, 1000.0, g);
  model.backward(g.det, g.dist);

  auto& params = model.store().params();
  Rng pick(72);
  std::size_t checked = 0, bad = 0;
  double worst = 0.0;
  std::string worst_name;
  const std::size_t samples = 40;
  for (std::size_t k = 0; k < samples; ++k) {
    Param& prm = params[static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(params.size()) - 1))];
    const auto i = static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(prm.value.size()) - 1));
    const double orig = prm.value[i], h = 1e-6;
    prm.value[i] = orig + h;
    const double lp = loss();
    prm.value[i] = orig - h;
    const double lm = loss();
    prm.value[i] = orig;
    const double fd = (lp - lm) / (2 * h), an = prm.grad[i];
    const double scale = std::max(std::abs(fd), std::abs(an));
    const double err = std::abs(fd - an);
    if (err > 1e-3 * scale + 1e-6) ++bad;
    if (scale > 1e-4 && err / scale > worst) {
      worst = err / scale;
      worst_name = prm.name;
    }
    ++checked;
  }
  return {bad == 0 && checked >= 20,
          fmt("%zu parameters, %zu outside tolerance, worst relative error %.2e (%s)", checked, bad, worst,
              worst_name.c_str())};
}

// ---------------------------------------------------------------- 2 and 3

struct OverfitRun {
  double forged_f1 = 0.0;
  double pristine_f1 = 0.0;
  double disagreement = 0.0;  // mean pixel |p_f - p_d| on the training images, final weights
  std::size_t iterations = 0;
};

const Dataset& overfit_set() {
  static const Dataset ds = [] {
    const fs::path root = work_root() / "overfit";
    std::vector<LabeledImage> samples;
    for (std::uint64_t id = 0; id < 16; ++id) {
      const ForgerySample s = generate_sample(mix_seed(2024, "overfit" + std::to_string(id)), 64);
      samples.push_back({id, s.image, s.tri_mask, "BASE"});
    }
    write_dataset(root, Split::kTrain, 2024, samples);
    return Dataset::open(root);
  }();
  return ds;
}

OverfitRun overfit(std::uint64_t seed, double gamma) {
  TrainConfig c;
  c.seed = seed;
  c.gamma = gamma;
  c.batch_size = 8;
  c.epochs = 300;  // 2 steps per epoch, 600 iterations
  c.network = small_network();
  const Dataset& ds = overfit_set();
  const FitResult r = fit(ds, ds, c);
  Model model(c.network, 0);
  restore_model(model, r.best);
  Model last(c.network, 0);
  last.load_parameters(r.final_params);

  OverfitRun out;
  out.iterations = r.maxiter;
  const auto metrics = mean_metrics(evaluate_images(model_predictor(model), ds));
  out.forged_f1 = metrics[0].f1;
  out.pristine_f1 = metrics[1].f1;
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const PredictionPair p = last.forward(image_to_tensor(ds.load(i).image));
    const Tensor pf = softmax_channels(p.det_logits);
    const Tensor pd = softmax_channels(p.dist_logits);
    const std::size_t hw = pf.dim(1) * pf.dim(2);
    for (std::size_t j = 0; j < hw; ++j) sum += std::abs(pf[hw + j] - (1.0 - pd[j]));
    count += hw;
  }
  out.disagreement = sum / static_cast<double>(count);
  return out;
}

std::vector<OverfitRun>& gamma_runs(double gamma) {
  static std::vector<OverfitRun> with, without;
  auto& runs = gamma == 0.0 ? without : with;
  if (runs.empty())
    for (std::uint64_t seed : {1, 2, 3}) runs.push_back(overfit(seed, gamma));
  return runs;
}

Outcome overfit_sanity() {
  const OverfitRun& r = gamma_runs(kDefaultGamma).front();
  return {r.iterations <= 600 && r.forged_f1 >= 0.90 && r.pristine_f1 >= 0.95,
          fmt("gamma %g, %zu iterations: forged F1 %.4f (>= 0.90), pristine F1 %.4f (>= 0.95)", kDefaultGamma,
              r.iterations, r.forged_f1, r.pristine_f1)};
}

Outcome consistency_direction() {
  double with = 0.0, without = 0.0;
  for (const OverfitRun& r : gamma_runs(kDefaultGamma)) with += r.disagreement / 3.0;
  for (const OverfitRun& r : gamma_runs(0.0)) without += r.disagreement / 3.0;
  return {with < without, fmt("mean |p_f - p_d| over 3 seeds: gamma 1000 %.6f, gamma 0 %.6f", with, without)};
}

// ---------------------------------------------------------------- 4

Outcome loss_closed_forms() {
  const std::size_t side = 16;
  Rng rng(40);
  LabelMap yd(side, side);
  for (auto& v : yd.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
  const LabelMap yf = binary_mask(yd);

  const double cf = ce_binary(Tensor({2, side, side}), yf);
  const double cd = ce_three(Tensor({3, side, side}), yd);

  Tensor dist({3, side, side}), det({2, side, side});
  const std::size_t hw = side * side;
  for (double& v : dist.values()) v = rng.uniform(-4.0, 4.0);
  const Tensor q = softmax_channels(dist);
  for (std::size_t j = 0; j < hw; ++j) det[hw + j] = std::log((1.0 - q[j]) / q[j]);
  const double agree = mse_consistency(det, dist);

  bool identity = true;
  for (int k = 0; k < 20; ++k) {
    for (double& v : det.values()) v = rng.uniform(-5.0, 5.0);
    for (double& v : dist.values()) v = rng.uniform(-5.0, 5.0);
    const double gamma = rng.uniform(0.0, 2000.0);
    const LossBreakdown l = total_loss(det, dist, yf, yd, gamma);
    identity &= l.total == l.ce_f + l.ce_d + gamma * l.mse;
  }
  const bool pass = std::abs(cf - std::log(2.0)) <= 1e-6 && std::abs(cd - std::log(3.0)) <= 1e-6 &&
                    std::abs(agree) <= 1e-10 && identity;
  return {pass, fmt("ce_binary %.9f, ce_three %.9f, agreeing mse %.1e, total identity %s", cf, cd, agree,
                    identity ? "exact" : "broken")};
}

// ---------------------------------------------------------------- 5

ConfusionCounts brute_counts(const LabelMap& pred, const LabelMap& truth, std::uint8_t label) {
  std::uint64_t t[2][2] = {{0, 0}, {0, 0}};
  for (std::size_t i = 0; i < truth.size(); ++i) t[pred.labels[i] == label][truth.labels[i] == label] += 1;
  return {t[1][1], t[1][0], t[0][1], t[0][0]};
}

bool prf_agrees(const ConfusionCounts& c, const Prf& got) {
  double p, r, f;
  if (c.tp + c.fp + c.fn == 0) {
    p = r = f = 1.0;
  } else {
    p = c.tp + c.fp ? double(c.tp) / double(c.tp + c.fp) : 0.0;
    r = c.tp + c.fn ? double(c.tp) / double(c.tp + c.fn) : 0.0;
    f = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
  return std::abs(p - got.precision) <= 1e-12 && std::abs(r - got.recall) <= 1e-12 && std::abs(f - got.f1) <= 1e-12;
}

Outcome metric_oracle() {
  std::size_t pairs = 0, mismatches = 0;
  LabelMap a(3, 3), b(3, 3);
  for (unsigned pa = 0; pa < 512; ++pa) {
    for (std::size_t i = 0; i < 9; ++i) a.labels[i] = (pa >> i) & 1u;
    for (unsigned pb = 0; pb < 512; ++pb) {
      for (std::size_t i = 0; i < 9; ++i) b.labels[i] = (pb >> i) & 1u;
      for (std::uint8_t label : {0, 1}) {
        const ConfusionCounts want = brute_counts(a, b, label);
        const ConfusionCounts got = confusion(a, b, label);
        if (!(got == want) || !prf_agrees(want, prf(got))) ++mismatches;
      }
      ++pairs;
    }
  }
  Rng rng(55);
  LabelMap x(64, 64), y(64, 64);
  for (int k = 0; k < 100; ++k) {
    for (auto& v : x.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    for (auto& v : y.labels) v = static_cast<std::uint8_t>(rng.uniform_int(0, 2));
    for (std::uint8_t label : {0, 1, 2}) {
      const ConfusionCounts want = brute_counts(x, y, label);
      const ConfusionCounts got = confusion(x, y, label);
      if (!(got == want) || !prf_agrees(want, prf(got))) ++mismatches;
    }
    ++pairs;
  }
  return {mismatches == 0, fmt("%zu mask pairs, %zu mismatches", pairs, mismatches)};
}

// ---------------------------------------------------------------- 6

Outcome schedule_exactness() {
  const std::size_t maxiter = 200000;
  const double lr0 = 0.001;
  Rng rng(66);
  std::vector<std::size_t> iters{0, maxiter};
  while (iters.size() < 1000) iters.push_back(static_cast<std::size_t>(rng.uniform_int(1, maxiter - 1)));
  double worst = 0.0;
  bool endpoints = poly_lr(0, maxiter, lr0, 0.9) == lr0 && poly_lr(maxiter, maxiter, lr0, 0.9) == 0.0;
  for (std::size_t it : iters) {
    const long double frac = 1.0L - static_cast<long double>(it) / static_cast<long double>(maxiter);
    const long double want = frac == 0.0L ? 0.0L : static_cast<long double>(lr0) * expl(0.9L * logl(frac));
    const double got = poly_lr(it, maxiter, lr0, 0.9);
    if (want == 0.0L) {
      endpoints &= got == 0.0;
      continue;
    }
    worst = std::max(worst, static_cast<double>(fabsl(static_cast<long double>(got) - want) / want));
  }
  return {endpoints && worst <= 1e-12, fmt("1000 iterations, worst relative error %.2e, endpoints %s", worst,
                                           endpoints ? "exact" : "wrong")};
}

// ---------------------------------------------------------------- 7

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

Outcome architecture() {
  std::vector<std::string> failed;
  const NetworkConfig c;
  {
    Model model(c, 1);
    const PredictionPair out = model.forward(image_to_tensor(generate_base_image(4, 256)));
    if (out.det_logits.shape() != Shape{2, 256, 256} || out.dist_logits.shape() != Shape{3, 256, 256})
      failed.push_back("shapes");
  }
  const std::size_t side = c.feature_side(), ch = c.embed_channels;
  double worst_row = 0.0;
  const auto rows_ok = [&](const std::vector<Mat>& weights) {
    for (const Mat& w : weights)
      for (Eigen::Index r = 0; r < w.rows(); ++r) worst_row = std::max(worst_row, std::abs(w.row(r).sum() - 1.0));
  };
  {
    ParamStore store;
    LocalAttention attn(store, "local", c);
    store.initialize(3);
    const Tensor x = random_tensor({ch, side, side}, 5);
    const Tensor base = attn.forward(x);
    rows_ok(attn.attention_weights());
    Tensor poked = x;
    for (std::size_t k = 0; k < ch; ++k) poked.at(k, 5, 6) += k % 2 ? 1.0 : -1.0;  // window (1, 1)
    const Tensor out = attn.forward(poked);
    bool leak = false;
    for (std::size_t k = 0; k < ch; ++k)
      for (std::size_t y = 0; y < side; ++y)
        for (std::size_t x2 = 0; x2 < side; ++x2) {
          const bool inside = y / c.window == 1 && x2 / c.window == 1;
          if (!inside && out.at(k, y, x2) != base.at(k, y, x2)) leak = true;
        }
    if (leak) failed.push_back("local window leak");
  }
  double reached = 0.0;
  {
    ParamStore store;
    GlobalAttention attn(store, "global", c);
    store.initialize(4);
    const Tensor x = random_tensor({ch, side, side}, 6);
    const Tensor base = attn.forward(x);
    rows_ok(attn.attention_weights());
    Tensor poked = x;
    for (std::size_t k = 0; k < ch; ++k) poked.at(k, 0, 0) += k % 2 ? 1.0 : -1.0;
    const Tensor out = attn.forward(poked);
    std::size_t changed = 0;
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x2 = 0; x2 < side; ++x2) {
        bool any = false;
        for (std::size_t k = 0; k < ch; ++k) any |= out.at(k, y, x2) != base.at(k, y, x2);
        changed += any;
      }
    reached = static_cast<double>(changed) / static_cast<double>(side * side);
    if (reached <= 0.99) failed.push_back("global reach");
  }
  {
    const Tensor p = softmax_channels(random_tensor({3, 32, 32}, 7));
    for (std::size_t j = 0; j < 32 * 32; ++j)
      worst_row = std::max(worst_row, std::abs(p[j] + p[1024 + j] + p[2048 + j] - 1.0));
  }
  if (worst_row > 1e-5) failed.push_back("softmax rows");
  {
    ParamStore store;
    ResidualRefine refine(store, "refine", ch);
    store.initialize(1);
    for (Param& p : store.params()) p.value.zero();
    const Tensor x = random_tensor({ch, side, side}, 2);
    if (!(refine.forward(x) == x)) failed.push_back("refine identity");
  }
  std::string detail = fmt("global reach %.4f, worst softmax row error %.1e", reached, worst_row);
  for (const std::string& f : failed) detail += ", failed: " + f;
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------- 8

Outcome attack_suite() {
  std::vector<std::string> failed;
  const Image img = generate_base_image(81, 128);
  if (apply_attack(img, {}, 9).pixels != img.pixels) failed.push_back("BASE");
  for (const AttackSpec& s : all_attacks())
    if (apply_attack(img, s, 9).pixels != apply_attack(img, s, 9).pixels) failed.push_back(attack_tag(s));
  double last = 1e300;
  std::string errors;
  for (int level = 1; level <= 9; ++level) {
    const Image out = apply_attack(img, {AttackCategory::kJpeg, level}, 0);
    double err = 0.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) err += std::abs(double(out.pixels[i]) - double(img.pixels[i]));
    err /= static_cast<double>(img.pixels.size());
    if (err > last) failed.push_back("JC monotone at JC" + std::to_string(level));
    last = err;
    errors += fmt(level == 1 ? "%.2f" : "/%.2f", err);
  }

  const fs::path root = work_root() / "attacks";
  std::vector<LabeledImage> samples;
  for (std::uint64_t id = 0; id < 3; ++id) {
    const ForgerySample f = generate_sample(90 + id, 64);
    samples.push_back({id, f.image, f.tri_mask, "BASE"});
  }
  write_dataset(root / "in", Split::kTest, 1, samples);
  const Dataset in = Dataset::open(root / "in");
  for (const AttackSpec& s : all_attacks()) {
    const fs::path out = root / attack_tag(s);
    attack_dataset(in, s, 1, out);
    const Dataset attacked = Dataset::open(out);
    for (std::size_t i = 0; i < in.size(); ++i)
      if (slurp(out / attacked.entry(i).mask_path) != slurp(root / "in" / in.entry(i).mask_path) ||
          attacked.load(i).tri_mask.labels != in.load(i).tri_mask.labels) {
        failed.push_back("mask changed by " + attack_tag(s));
        break;
      }
  }
  std::string detail = "JC mean abs error by quality " + errors;
  for (const std::string& f : failed) detail += ", failed: " + f;
  return {failed.empty(), detail};
}

// ---------------------------------------------------------------- 9 and 10

int cli_run(std::vector<std::string> args) { return cli::run(args); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

void write_small_config(const fs::path& path, std::size_t epochs) {
  std::ofstream cfg(path);
  cfg << "seed = 9\nepochs = " << epochs
      << "\nbatch_size = 8\ninput_size = 32\nembed_channels = 16\nnum_heads = 2\nwindow = 1\n"
         "decoder_channels = 8,4,4,4\n";
}

Outcome table_structure() {
  const fs::path root = work_root() / "tables";
  write_small_config(root.parent_path() / "tables.cfg", 1);
  const std::string cfg = (root.parent_path() / "tables.cfg").string();
  std::vector<std::string> failed;
  if (cli_run({"gen", "--n", "40", "--seed", "3", "--out", (root / "data").string(), "--size", "64"}) != 0)
    return {false, "gen failed"};
  const std::string data = (root / "data").string();

  const auto check = [&](const fs::path& csv, const std::vector<std::vector<std::string>>& labels) {
    const auto rows = read_csv(csv);
    if (rows.size() != labels.size() + 1) {
      failed.push_back(csv.filename().string() + " row count");
      return;
    }
    for (std::size_t r = 0; r < labels.size(); ++r) {
      const auto& row = rows[r + 1];
      if (row.size() != labels[r].size() + 15 || !std::equal(labels[r].begin(), labels[r].end(), row.begin()))
        failed.push_back(csv.filename().string() + " row " + std::to_string(r + 1));
    }
  };
  if (cli_run({"ablate", "--config", cfg, "--data", data, "--out", (root / "ablate").string()}) != 0)
    failed.push_back("ablate run");
  else
    check(root / "ablate/ablation.csv", {{"no", "no"}, {"yes", "no"}, {"no", "yes"}, {"yes", "yes"}});
  if (cli_run({"sweep", "--axis", "gamma", "--values", "0.01,0.1,1,10,100,1000", "--config", cfg, "--data", data,
               "--out", (root / "gamma").string()}) != 0)
    failed.push_back("gamma sweep run");
  else
    check(root / "gamma/sweep_gamma.csv", {{"0.01"}, {"0.1"}, {"1"}, {"10"}, {"100"}, {"1000"}});
  if (cli_run({"sweep", "--axis", "depth", "--values", "1,2,3,4", "--config", cfg, "--data", data, "--out",
               (root / "depth").string()}) != 0)
    failed.push_back("depth sweep run");
  else
    check(root / "depth/sweep_depth.csv", {{"1"}, {"2"}, {"3"}, {"4"}});
  std::string detail = "ablation 4 rows, gamma sweep 6 rows, depth sweep 4 rows";
  for (const std::string& f : failed) detail += ", failed: " + f;
  return {failed.empty(), detail};
}

double summary_value(const fs::path& csv, const std::string& key) {
  for (const auto& row : read_csv(csv))
    if (row.size() == 2 && row[0] == key) return std::stod(row[1]);
  return std::nan("");
}

Outcome determinism() {
  write_small_config(work_root() / "pipeline.cfg", 2);
  const std::string cfg = (work_root() / "pipeline.cfg").string();
  const auto pipeline = [&](const fs::path& root) {
    return cli_run({"gen", "--n", "20", "--seed", "17", "--out", (root / "data").string(), "--size", "64"}) == 0 &&
           cli_run({"train", "--config", cfg, "--data", (root / "data").string(), "--out",
                    (root / "run").string()}) == 0 &&
           cli_run({"eval", "--checkpoint", (root / "run/checkpoint.bin").string(), "--data",
                    (root / "data/test").string(), "--report", (root / "report").string(), "--export-maps"}) == 0;
  };
  const fs::path a = work_root() / "pipeline_a", b = work_root() / "pipeline_b";
  if (!pipeline(a) || !pipeline(b)) return {false, "pipeline command failed"};
  std::vector<std::string> differing;
  for (const char* split : {"data/train", "data/val", "data/test", "report/maps"})
    if (sha256_tree(a / split) != sha256_tree(b / split)) differing.push_back(split);
  // checkpoint headers record their own data paths, so compare the payload
  const CheckpointRecord ca = load_checkpoint(a / "run/checkpoint.bin");
  const CheckpointRecord cb = load_checkpoint(b / "run/checkpoint.bin");
  bool same_weights = ca.params.size() == cb.params.size() && ca.epoch == cb.epoch &&
                      ca.selection_score == cb.selection_score && ca.train_config == cb.train_config;
  for (std::size_t i = 0; same_weights && i < ca.params.size(); ++i)
    same_weights = ca.params[i].name == cb.params[i].name && ca.params[i].value == cb.params[i].value;
  if (!same_weights) differing.push_back("checkpoint weights");
  for (const char* file : {"run/loss_log.csv", "run/epoch_scores.csv", "report/detection.csv",
                           "report/distinguishment.csv", "report/categories.csv", "report/summary.csv"})
    if (sha256_file(a / file) != sha256_file(b / file)) differing.push_back(file);
  const double sa = summary_value(a / "report/summary.csv", "selection_score");
  const double sb = summary_value(b / "report/summary.csv", "selection_score");
  std::string detail = fmt("selection_score %.10f vs %.10f", sa, sb);
  for (const std::string& d : differing) detail += ", differs: " + d;
  return {differing.empty() && std::abs(sa - sb) <= 1e-6, detail};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_check},
      {"overfit sanity", overfit_sanity},
      {"consistency regularizer direction", consistency_direction},
      {"loss closed forms", loss_closed_forms},
      {"metric oracle equivalence", metric_oracle},
      {"schedule exactness", schedule_exactness},
      {"architecture invariants", architecture},
      {"attack suite", attack_suite},
      {"table reproduction structure", table_structure},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("ACCEPTANCE %zu %s %s (%.1fs): %s\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first, secs,
                o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
