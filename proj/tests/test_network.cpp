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

#include "cmfd/checkpoint.hpp"
#include "cmfd/error.hpp"
#include "cmfd/forgery_data.hpp"
#include "cmfd/image.hpp"
#include "cmfd/network.hpp"
#include "cmfd/objective.hpp"
#include "cmfd/random.hpp"
#include "doctest.h"

using namespace cmfd;
namespace fs = std::filesystem;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.input_size = 32;
  c.embed_channels = 16;
  c.num_heads = 2;
  c.window = 1;
  c.decoder_channels = {8, 4, 4, 4};
  return c;
}

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  Tensor t(std::move(shape));
  Rng rng(seed);
  for (double& v : t.values()) v = rng.uniform(-scale, scale);
  return t;
}

void perturb_all(Model& m, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (Param& p : m.store().params())
    for (double& v : p.value.values()) v += rng.uniform(-scale, scale);
}

}  // namespace

TEST_CASE("config validation") {
  NetworkConfig c;
  CHECK_NOTHROW(c.validate());
  c.input_size = 250;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.window = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.decoder_channels = {8, 8};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = NetworkConfig{};
  c.embed_channels = 36;  // not divisible by 8 heads
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("default network maps 3x256x256 to 2- and 3-channel full-resolution logits") {
  Model model(NetworkConfig{}, 1);
  const Tensor x = image_to_tensor(generate_base_image(4, 256));
  const Tensor features = model.backbone().forward(x);
  CHECK(features.shape() == Shape{256, 16, 16});
  const PredictionPair out = model.forward(x);
  CHECK(out.det_logits.shape() == Shape{2, 256, 256});
  CHECK(out.dist_logits.shape() == Shape{3, 256, 256});
  CHECK(model.decoder_f().stage_sides() == std::vector<std::size_t>{32, 64, 128, 256});
  CHECK(out.det_logits.all_finite());
  CHECK_THROWS_AS(model.forward(Tensor({3, 128, 128})), ShapeError);
}

TEST_CASE("decoder rejects unsupported class counts") {
  ParamStore store;
  CHECK_THROWS_AS(Decoder(store, "d", NetworkConfig{}, 4), ConfigError);
}

TEST_CASE("local attention has no cross-window influence") {
  NetworkConfig c;
  c.embed_channels = 16;
  c.num_heads = 2;
  c.window = 4;
  ParamStore store;
  LocalAttention attn(store, "local", c);
  store.initialize(3);
  Rng rng(8);
  for (Param& p : store.params())
    for (double& v : p.value.values()) v += rng.uniform(-0.2, 0.2);

  const Tensor x = random_tensor({16, 8, 8}, 5);
  const Tensor base = attn.forward(x);
  // attention rows are distributions
  for (const Mat& w : attn.attention_weights()) {
    CHECK(w.rows() == 16);
    for (Eigen::Index r = 0; r < w.rows(); ++r) CHECK(std::abs(w.row(r).sum() - 1.0) < 1e-5);
  }
  Tensor poked = x;
  for (std::size_t ch = 0; ch < 16; ++ch) poked.at(ch, 1, 2) += ch % 2 ? 1.5 : -0.5;  // window (0, 0)
  const Tensor out = attn.forward(poked);
  bool inside_changed = false;
  for (std::size_t ch = 0; ch < 16; ++ch)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t xx = 0; xx < 8; ++xx) {
        const bool same_window = y < 4 && xx < 4;
        if (same_window)
          inside_changed |= out.at(ch, y, xx) != base.at(ch, y, xx);
        else
          REQUIRE(out.at(ch, y, xx) == base.at(ch, y, xx));
      }
  CHECK(inside_changed);
}

TEST_CASE("global attention reaches every position") {
  NetworkConfig c;
  c.embed_channels = 16;
  c.num_heads = 2;
  ParamStore store;
  GlobalAttention attn(store, "global", c);
  store.initialize(4);
  const Tensor x = random_tensor({16, 8, 8}, 6);
  const Tensor base = attn.forward(x);
  for (const Mat& w : attn.attention_weights())
    for (Eigen::Index r = 0; r < w.rows(); ++r) CHECK(std::abs(w.row(r).sum() - 1.0) < 1e-5);
  Tensor poked = x;
  // a uniform shift would vanish under layer norm
  for (std::size_t ch = 0; ch < 16; ++ch) poked.at(ch, 0, 0) += ch % 2 ? 1.0 : -1.0;
  const Tensor out = attn.forward(poked);
  std::size_t changed = 0;
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t xx = 0; xx < 8; ++xx) {
      bool any = false;
      for (std::size_t ch = 0; ch < 16; ++ch) any |= out.at(ch, y, xx) != base.at(ch, y, xx);
      changed += any;
    }
  CHECK(static_cast<double>(changed) / 64.0 > 0.99);
}

TEST_CASE("residual refinement is the identity under zero weights") {
  ParamStore store;
  ResidualRefine refine(store, "refine", 8);
  store.initialize(1);
  for (Param& p : store.params()) p.value.zero();
  const Tensor x = random_tensor({8, 4, 4}, 2);
  CHECK(refine.forward(x) == x);
}

TEST_CASE("initialisation is seed-determined and per-name") {
  const NetworkConfig c = tiny_config();
  Model a(c, 5), b(c, 5), other(c, 6);
  const ParameterSet pa = a.parameters(), pb = b.parameters(), po = other.parameters();
  REQUIRE(pa.size() == pb.size());
  bool differs = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i].value == pb[i].value);
    differs |= !(pa[i].value == po[i].value);
  }
  CHECK(differs);
  // residual branch scales and biases start at zero, layer-norm gains at one
  for (const NamedTensor& t : pa) {
    if (t.name.ends_with("branch_scale") || t.name.ends_with(".bias"))
      for (double v : t.value.values()) CHECK(v == 0.0);
    if (t.name.ends_with("norm1.weight"))
      for (double v : t.value.values()) CHECK(v == 1.0);
  }
}

TEST_CASE("positional embedding exists only with an active transformer") {
  NetworkConfig c = tiny_config();
  const auto has_position = [](const NetworkConfig& cfg) {
    for (const TensorSpec& s : parameter_schema(cfg))
      if (s.name == "encoder.position") return true;
    return false;
  };
  CHECK(has_position(c));
  c.use_transformer = false;
  CHECK_FALSE(has_position(c));
  c.use_transformer = true;
  c.encoder_depth = 0;
  CHECK_FALSE(has_position(c));
  c.encoder_depth = 3;
  std::size_t blocks = 0;
  for (const TensorSpec& s : parameter_schema(c))
    if (s.name.ends_with(".local.norm1.weight")) ++blocks;
  CHECK(blocks == 3);
}

TEST_CASE("softmax_channels rows sum to one") {
  const Tensor logits = random_tensor({3, 4, 5}, 9, 30.0);
  const Tensor p = softmax_channels(logits);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::abs(p[i] + p[20 + i] + p[40 + i] - 1.0) < 1e-12);
}

TEST_CASE("full-graph gradients match central differences on a tiny network") {
  Model model(tiny_config(), 2);
  perturb_all(model, 3, 0.1);
  const ForgerySample s = generate_sample(12, 64);
  const Tensor x = image_to_tensor(resize_bilinear(s.image, 32, 32));
  const LabelMap yd = resize_nearest(s.tri_mask, 32, 32);
  const LabelMap yf = binary_mask(yd);
  const auto loss = [&] {
    const PredictionPair p = model.forward(x);
    return total_loss(p.det_logits, p.dist_logits, yf, yd, 1000.0).total;
  };
  model.store().zero_grad();
  const PredictionPair p = model.forward(x);
  LogitGradients g;
  total_loss_and_gradients(p.det_logits, p.dist_logits, yf, yd, 1000.0, g);
  model.backward(g.det, g.dist);

  Rng rng(17);
  std::size_t checked = 0;
  for (Param& prm : model.store().params()) {
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(prm.value.size()) - 1));
    const double orig = prm.value[i], h = 1e-6;
    prm.value[i] = orig + h;
    const double lp = loss();
    prm.value[i] = orig - h;
    const double lm = loss();
    prm.value[i] = orig;
    const double fd = (lp - lm) / (2 * h);
    const double an = prm.grad[i];
    INFO(prm.name, " analytic ", an, " numeric ", fd);
    CHECK(std::abs(fd - an) <= 1e-3 * std::max(std::abs(fd), std::abs(an)) + 1e-6);
    ++checked;
  }
  CHECK(checked >= 20);
}

TEST_CASE("checkpoint round trip and schema mismatch") {
  const fs::path dir = fs::temp_directory_path() / "cmfd_ckpt_test";
  fs::remove_all(dir);
  const NetworkConfig c = tiny_config();
  Model model(c, 9);
  perturb_all(model, 1, 0.05);
  CheckpointRecord rec;
  rec.network = c;
  rec.params = model.parameters();
  rec.epoch = 3;
  rec.selection_score = 0.625;
  rec.val_data = "data/val";
  rec.train_config = {{"seed", "9"}};
  save_checkpoint(dir / "a.bin", rec);

  const CheckpointRecord back = load_checkpoint(dir / "a.bin");
  CHECK(back.network == c);
  CHECK(back.epoch == 3);
  CHECK(back.selection_score == 0.625);
  CHECK(back.val_data == "data/val");
  CHECK(back.train_config == rec.train_config);
  REQUIRE(back.params.size() == rec.params.size());
  for (std::size_t i = 0; i < rec.params.size(); ++i) {
    CHECK(back.params[i].name == rec.params[i].name);
    CHECK(back.params[i].value == rec.params[i].value);
  }
  Model restored(c, 0);
  restore_model(restored, back);
  const Tensor x = image_to_tensor(generate_base_image(2, 32));
  CHECK(restored.forward(x).det_logits == model.forward(x).det_logits);

  // tensors from one width stored under a header claiming another
  CheckpointRecord wrong = rec;
  wrong.network.embed_channels = 32;
  save_checkpoint(dir / "b.bin", wrong);
  CHECK_THROWS_AS(load_checkpoint(dir / "b.bin"), CheckpointError);

  NetworkConfig wide = tiny_config();
  wide.decoder_channels = {8, 8, 4, 4};
  Model wider(wide, 0);
  CHECK_THROWS_AS(wider.load_parameters(rec.params), CheckpointError);

  // truncated file
  fs::resize_file(dir / "a.bin", fs::file_size(dir / "a.bin") - 8);
  CHECK_THROWS_AS(load_checkpoint(dir / "a.bin"), CheckpointError);
  std::ofstream(dir / "c.bin") << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(dir / "c.bin"), CheckpointError);
  fs::remove_all(dir);
}
