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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "cli.hpp"
#include "cmfd/checkpoint.hpp"
#include "cmfd/dataset.hpp"
#include "cmfd/image.hpp"
#include "cmfd/run_manifest.hpp"
#include "doctest.h"

using namespace cmfd;
namespace fs = std::filesystem;

namespace {

const fs::path& work() {
  static const fs::path root = [] {
    ::unsetenv("CMFD_OUTPUT_ROOT");
    fs::path r = fs::temp_directory_path() / "cmfd_cli_test";
    fs::remove_all(r);
    fs::create_directories(r);
    std::ofstream cfg(r / "tiny.cfg");
    cfg << "seed = 2\nepochs = 1\nbatch_size = 4\ninput_size = 32\nembed_channels = 16\nnum_heads = 2\n"
           "window = 1\ndecoder_channels = 8,4,4,4\n";
    return r;
  }();
  return root;
}

int run(std::vector<std::string> args) { return cli::run(args); }

std::string p(const fs::path& rel) { return (work() / rel).string(); }

std::vector<std::string> lines(const fs::path& file) {
  std::ifstream in(file);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

// gen + train once; later cases reuse the artifacts
void ensure_trained() {
  static const bool done = [] {
    REQUIRE(run({"gen", "--n", "10", "--seed", "5", "--out", p("data"), "--size", "64"}) == cli::kExitOk);
    REQUIRE(run({"train", "--config", p("tiny.cfg"), "--data", p("data"), "--out", p("run")}) == cli::kExitOk);
    return true;
  }();
  (void)done;
}

}  // namespace

TEST_CASE("gen writes 80/10/10 splits with a verified manifest") {
  ensure_trained();
  CHECK(Dataset::open(work() / "data/train").size() == 8);
  CHECK(Dataset::open(work() / "data/val").size() == 1);
  CHECK(Dataset::open(work() / "data/test").size() == 1);
  CHECK(Dataset::open(work() / "data/test").entry(0).sample_id == 9);
  const RunManifest m = RunManifest::read(work() / "data/run_manifest.json");
  CHECK(m.command == "gen");
  CHECK(m.seed == 5);
  CHECK(m.verify().empty());
}

TEST_CASE("gen rejects fractions that do not sum to one") {
  CHECK(run({"gen", "--n", "10", "--seed", "1", "--out", p("bad"), "--split-fractions", "0.5,0.2,0.2"}) ==
        cli::kExitUsage);
  CHECK(run({"gen", "--n", "10", "--seed", "1", "--out", p("bad"), "--split-fractions", "0.5,0.5"}) ==
        cli::kExitUsage);
}

TEST_CASE("attack tags entries and rejects unknown specs") {
  ensure_trained();
  CHECK(run({"attack", "--in", p("data/test"), "--spec", "JC5", "--seed", "1", "--out", p("jc5")}) == cli::kExitOk);
  const Dataset jc = Dataset::open(work() / "jc5");
  REQUIRE(jc.size() == 1);
  CHECK(jc.entry(0).attack_tag == "JC5");
  CHECK(run({"attack", "--in", p("data/test"), "--spec", "JC11", "--seed", "1", "--out", p("jc11")}) ==
        cli::kExitUsage);
  CHECK_FALSE(fs::exists(work() / "jc11/manifest.txt"));
}

TEST_CASE("train outputs and configuration errors") {
  ensure_trained();
  for (const char* f : {"checkpoint.bin", "loss_log.csv", "epoch_scores.csv", "run_manifest.json"})
    CHECK(fs::exists(work() / "run" / f));
  const auto loss = lines(work() / "run/loss_log.csv");
  CHECK(loss.front() == "iter,ce_f,ce_d,mse,gamma,total,lr");
  CHECK(loss.size() == 1 + 2);
  const CheckpointRecord rec = load_checkpoint(work() / "run/checkpoint.bin");
  CHECK(rec.epoch == 1);
  CHECK(rec.train_config.at("seed") == "2");
  CHECK(RunManifest::read(work() / "run/run_manifest.json").verify().empty());

  // flags win over the config file
  CHECK(run({"train", "--config", p("tiny.cfg"), "--set", "gamma=5", "--gamma", "7", "--data", p("data"), "--out",
             p("run_flags")}) == cli::kExitOk);
  CHECK(load_checkpoint(work() / "run_flags/checkpoint.bin").train_config.at("gamma") == "7");

  {
    std::ofstream cfg(work() / "noseed.cfg");
    cfg << "epochs = 1\n";
  }
  CHECK(run({"train", "--config", p("noseed.cfg"), "--data", p("data"), "--out", p("r2")}) == cli::kExitUsage);
  CHECK(run({"train", "--config", p("tiny.cfg"), "--set", "colour=1", "--data", p("data"), "--out", p("r3")}) ==
        cli::kExitUsage);
  CHECK(run({"train", "--config", p("tiny.cfg"), "--data", p("data"), "--out", p("r4"), "--resume"}) ==
        cli::kExitUsage);
  CHECK_FALSE(fs::exists(work() / "r4/checkpoint.bin"));
}

TEST_CASE("eval reports, maps and checkpoint errors") {
  ensure_trained();
  CHECK(run({"eval", "--checkpoint", p("run/checkpoint.bin"), "--data", p("data/test"), "--report", p("rep"),
             "--export-maps"}) == cli::kExitOk);
  for (const char* f : {"detection.csv", "distinguishment.csv", "categories.csv", "summary.csv"})
    CHECK(fs::exists(work() / "rep" / f));
  CHECK(lines(work() / "rep/detection.csv").size() == 3);
  CHECK(lines(work() / "rep/distinguishment.csv").size() == 4);
  CHECK(lines(work() / "rep/categories.csv").front() == "attack_tag,n_images,n_correct,class,precision,recall,f1");
  CHECK(fs::exists(work() / "rep/maps/000009_binary.png"));
  CHECK(fs::exists(work() / "rep/maps/000009_tri.png"));
  CHECK(RunManifest::read(work() / "rep/run_manifest.json").verify().empty());

  // same inputs, same report bytes
  CHECK(run({"eval", "--checkpoint", p("run/checkpoint.bin"), "--data", p("data/test"), "--report", p("rep2")}) ==
        cli::kExitOk);
  CHECK(sha256_file(work() / "rep/summary.csv") == sha256_file(work() / "rep2/summary.csv"));

  // a checkpoint whose tensors do not fit its config
  CheckpointRecord rec = load_checkpoint(work() / "run/checkpoint.bin");
  rec.params.pop_back();
  save_checkpoint(work() / "broken.bin", rec);
  CHECK(run({"eval", "--checkpoint", p("broken.bin"), "--data", p("data/test"), "--report", p("rep3")}) ==
        cli::kExitFailure);
  CHECK(run({"eval", "--checkpoint", p("missing.bin"), "--data", p("data/test"), "--report", p("rep4")}) ==
        cli::kExitFailure);
}

TEST_CASE("infer writes both maps at the input size") {
  ensure_trained();
  const LabeledImage s = Dataset::open(work() / "data/test").load(0);
  write_png_rgb(work() / "probe.png", s.image);
  CHECK(run({"infer", "--checkpoint", p("run/checkpoint.bin"), "--image", p("probe.png"), "--out", p("inf")}) ==
        cli::kExitOk);
  const Image bin = read_image(work() / "inf/probe_binary.png");
  CHECK(bin.height == 64);
  CHECK(bin.width == 64);
  CHECK(fs::exists(work() / "inf/probe_tri.png"));
  CHECK(run({"infer", "--checkpoint", p("run/checkpoint.bin"), "--image", p("nope.png"), "--out", p("inf2")}) ==
        cli::kExitFailure);
}

TEST_CASE("usage errors") {
  CHECK(run({}) == cli::kExitUsage);
  CHECK(run({"fly"}) == cli::kExitUsage);
  CHECK(run({"gen", "--seed", "1"}) == cli::kExitUsage);
}
