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

#include "cmfd/network.hpp"

#include <cmath>

namespace cmfd {

void NetworkConfig::validate() const {
  if (input_size == 0 || input_size % 16 != 0)
    throw ConfigError("input_size must be a positive multiple of 16");
  if (embed_channels == 0 || embed_channels % 4 != 0)
    throw ConfigError("embed_channels must be a positive multiple of 4");
  if (num_heads == 0 || embed_channels % num_heads != 0)
    throw ConfigError("embed_channels must be divisible by num_heads");
  if (window == 0 || feature_side() % window != 0)
    throw ConfigError("feature side " + std::to_string(feature_side()) + " not divisible by window " +
                      std::to_string(window));
  if (decoder_channels.size() != 4) throw ConfigError("decoder_channels needs exactly four entries");
  for (const std::size_t c : decoder_channels)
    if (c == 0) throw ConfigError("decoder_channels entries must be positive");
  if (mlp_ratio == 0) throw ConfigError("mlp_ratio must be positive");
}

Tensor softmax_channels(const Tensor& logits) {
  const std::size_t c = logits.dim(0), hw = logits.dim(1) * logits.dim(2);
  Tensor p(logits.shape());
  for (std::size_t i = 0; i < hw; ++i) {
    double peak = logits[i];
    for (std::size_t k = 1; k < c; ++k) peak = std::max(peak, logits[k * hw + i]);
    double sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) sum += (p[k * hw + i] = std::exp(logits[k * hw + i] - peak));
    for (std::size_t k = 0; k < c; ++k) p[k * hw + i] /= sum;
  }
  return p;
}

// ---------------------------------------------------------------------------

BasicBlock::BasicBlock(ParamStore& store, const std::string& name, std::size_t in, std::size_t out,
                       std::size_t stride)
    : conv1_(store, name + ".conv1", in, out, 3, stride, 1), conv2_(store, name + ".conv2", out, out, 3, 1, 1) {
  if (stride != 1 || in != out)
    shortcut_ = std::make_unique<Conv2d>(store, name + ".shortcut", in, out, 1, stride, 0);
  branch_scale_ = &store.add(name + ".branch_scale", {1}, Init::kZeros);
}

Tensor BasicBlock::forward(const Tensor& x) {
  branch_ = conv2_.forward(relu1_.forward(conv1_.forward(x)));
  Tensor sum = shortcut_ ? shortcut_->forward(x) : x;
  const double scale = branch_scale_->value[0];
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += scale * branch_[i];
  return relu_out_.forward(sum);
}

Tensor BasicBlock::backward(const Tensor& grad_out) {
  const Tensor g = relu_out_.backward(grad_out);
  const double scale = branch_scale_->value[0];
  double d_scale = 0.0;
  Tensor g_branch(g.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    d_scale += g[i] * branch_[i];
    g_branch[i] = scale * g[i];
  }
  branch_scale_->grad[0] += d_scale;
  Tensor gx = conv1_.backward(relu1_.backward(conv2_.backward(g_branch)));
  gx += shortcut_ ? shortcut_->backward(g) : g;
  return gx;
}

Backbone::Backbone(ParamStore& store, const NetworkConfig& config)
    : input_size_(config.input_size), stem_(store, "backbone.stem", 3, config.base_width(), 7, 2, 3) {
  const std::size_t w = config.base_width();
  const std::size_t widths[3] = {w, 2 * w, 4 * w};
  std::size_t in = w;
  blocks_.reserve(6);
  for (std::size_t stage = 0; stage < 3; ++stage) {
    for (std::size_t b = 0; b < 2; ++b) {
      const std::size_t stride = (stage > 0 && b == 0) ? 2 : 1;
      blocks_.emplace_back(store, "backbone.layer" + std::to_string(stage + 1) + "." + std::to_string(b), in,
                           widths[stage], stride);
      in = widths[stage];
    }
  }
}

Tensor Backbone::forward(const Tensor& image) {
  require_shape(image, {3, input_size_, input_size_}, "backbone input");
  Tensor x = pool_.forward(stem_relu_.forward(stem_.forward(image)));
  for (BasicBlock& block : blocks_) x = block.forward(x);
  return x;
}

Tensor Backbone::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
  return stem_.backward(stem_relu_.backward(pool_.backward(g)));
}

// ---------------------------------------------------------------------------

LocalAttention::LocalAttention(ParamStore& store, const std::string& name, const NetworkConfig& config)
    : block_(store, name, config.embed_channels, config.num_heads, config.mlp_ratio), window_(config.window) {}

Tensor LocalAttention::forward(const Tensor& fm) {
  const std::size_t c = fm.dim(0), h = fm.dim(1), w = fm.dim(2);
  if (h % window_ != 0 || w % window_ != 0)
    throw ConfigError("feature map " + shape_string(fm.shape()) + " not divisible by window " +
                      std::to_string(window_));
  shape_ = fm.shape();
  const std::size_t rows = h / window_, cols = w / window_, n = window_ * window_;
  caches_.assign(rows * cols, {});
  Tensor out(fm.shape());
  Mat tokens(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  for (std::size_t wy = 0; wy < rows; ++wy)
    for (std::size_t wx = 0; wx < cols; ++wx) {
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t ch = 0; ch < c; ++ch)
          tokens(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ch)) =
              fm.at(ch, wy * window_ + t / window_, wx * window_ + t % window_);
      const Mat y = block_.forward(tokens, caches_[wy * cols + wx]);
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t ch = 0; ch < c; ++ch)
          out.at(ch, wy * window_ + t / window_, wx * window_ + t % window_) =
              y(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ch));
    }
  return out;
}

Tensor LocalAttention::backward(const Tensor& grad_out) {
  const std::size_t c = shape_[0], h = shape_[1], w = shape_[2];
  const std::size_t rows = h / window_, cols = w / window_, n = window_ * window_;
  Tensor grad_in(shape_);
  Mat g(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
  for (std::size_t wy = 0; wy < rows; ++wy)
    for (std::size_t wx = 0; wx < cols; ++wx) {
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t ch = 0; ch < c; ++ch)
          g(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ch)) =
              grad_out.at(ch, wy * window_ + t / window_, wx * window_ + t % window_);
      const Mat gx = block_.backward(g, caches_[wy * cols + wx]);
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t ch = 0; ch < c; ++ch)
          grad_in.at(ch, wy * window_ + t / window_, wx * window_ + t % window_) =
              gx(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(ch));
    }
  return grad_in;
}

std::vector<Mat> LocalAttention::attention_weights() const {
  std::vector<Mat> all;
  for (const auto& cache : caches_)
    for (const Mat& a : cache.attention.weights) all.push_back(a);
  return all;
}

GlobalAttention::GlobalAttention(ParamStore& store, const std::string& name, const NetworkConfig& config)
    : block_(store, name, config.embed_channels, config.num_heads, config.mlp_ratio) {}

Tensor GlobalAttention::forward(const Tensor& fm) {
  shape_ = fm.shape();
  return from_tokens(block_.forward(to_tokens(fm), cache_), fm.dim(1), fm.dim(2));
}

Tensor GlobalAttention::backward(const Tensor& grad_out) {
  return from_tokens(block_.backward(to_tokens(grad_out), cache_), shape_[1], shape_[2]);
}

ResidualRefine::ResidualRefine(ParamStore& store, const std::string& name, std::size_t channels) {
  convs_.reserve(3);
  for (std::size_t i = 0; i < 3; ++i)
    convs_.emplace_back(store, name + ".conv" + std::to_string(i + 1), channels, channels, 3, 1, 1);
  relus_.resize(3);
  activations_.resize(3);
}

Tensor ResidualRefine::forward(const Tensor& fm) {
  Tensor x = fm;
  for (std::size_t i = 0; i < 3; ++i) {
    x = relus_[i].forward(convs_[i].forward(x));
    activations_[i] = x;
  }
  x += fm;
  return x;
}

Tensor ResidualRefine::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  for (std::size_t i = 3; i-- > 0;) g = convs_[i].backward(relus_[i].backward(g));
  g += grad_out;
  return g;
}

Encoder::Encoder(ParamStore& store, const NetworkConfig& config)
    : refine_(store, "encoder.refine", config.embed_channels) {
  if (!config.transformer_active()) return;
  const std::size_t side = config.feature_side();
  position_ = &store.add("encoder.position", {config.embed_channels, side, side}, Init::kPositional);
  for (std::size_t i = 0; i < config.encoder_depth; ++i) {
    const std::string prefix = "encoder.block" + std::to_string(i);
    locals_.push_back(std::make_unique<LocalAttention>(store, prefix + ".local", config));
    globals_.push_back(std::make_unique<GlobalAttention>(store, prefix + ".global", config));
  }
}

Tensor Encoder::forward(const Tensor& fm) {
  Tensor x = fm;
  if (position_) {
    x += position_->value;
    for (std::size_t i = 0; i < locals_.size(); ++i) x = globals_[i]->forward(locals_[i]->forward(x));
  }
  return refine_.forward(x);
}

Tensor Encoder::backward(const Tensor& grad_out) {
  Tensor g = refine_.backward(grad_out);
  if (position_) {
    for (std::size_t i = locals_.size(); i-- > 0;) g = locals_[i]->backward(globals_[i]->backward(g));
    position_->grad += g;
  }
  return g;
}

namespace {

std::size_t checked_classes(std::size_t num_classes) {
  if (num_classes != 2 && num_classes != 3)
    throw ConfigError("decoder supports 2 or 3 classes, got " + std::to_string(num_classes));
  return num_classes;
}

}  // namespace

Decoder::Decoder(ParamStore& store, const std::string& name, const NetworkConfig& config, std::size_t num_classes)
    : head_(store, name + ".head", config.decoder_channels.back(), checked_classes(num_classes), 1, 1, 0) {
  std::size_t in = config.embed_channels;
  convs_.reserve(4);
  for (std::size_t i = 0; i < 4; ++i) {
    convs_.emplace_back(store, name + ".stage" + std::to_string(i), in, config.decoder_channels[i], 3, 1, 1);
    in = config.decoder_channels[i];
  }
  relus_.resize(4);
  ups_.resize(4);
}

Tensor Decoder::forward(const Tensor& fm) {
  Tensor x = fm;
  stage_sides_.clear();
  for (std::size_t i = 0; i < 4; ++i) {
    x = ups_[i].forward(relus_[i].forward(convs_[i].forward(x)));
    stage_sides_.push_back(x.dim(1));
  }
  return head_.forward(x);
}

Tensor Decoder::backward(const Tensor& grad_out) {
  Tensor g = head_.backward(grad_out);
  for (std::size_t i = 4; i-- > 0;) g = convs_[i].backward(relus_[i].backward(ups_[i].backward(g)));
  return g;
}

// ---------------------------------------------------------------------------

namespace {

const NetworkConfig& validated(const NetworkConfig& config) {
  config.validate();
  return config;
}

}  // namespace

Model::Model(const NetworkConfig& config, std::uint64_t seed)
    : config_(validated(config)),
      backbone_(store_, config_),
      encoder_(store_, config_),
      decoder_f_(store_, "decoder_f", config_, 2),
      decoder_d_(store_, "decoder_d", config_, 3) {
  store_.initialize(seed);
}

PredictionPair Model::forward(const Tensor& image) {
  const Tensor features = encoder_.forward(backbone_.forward(image));
  return {decoder_f_.forward(features), decoder_d_.forward(features)};
}

void Model::backward(const Tensor& grad_det, const Tensor& grad_dist) {
  Tensor g = decoder_f_.backward(grad_det);
  g += decoder_d_.backward(grad_dist);
  backbone_.backward(encoder_.backward(g));
}

ParameterSchema Model::schema() const {
  ParameterSchema schema;
  for (const Param& p : store_.params()) schema.push_back({p.name, p.value.shape()});
  return schema;
}

ParameterSet Model::parameters() const {
  ParameterSet set;
  for (const Param& p : store_.params()) set.push_back({p.name, p.value});
  return set;
}

void Model::load_parameters(const ParameterSet& params) {
  auto& mine = store_.params();
  if (params.size() != mine.size())
    throw CheckpointError("parameter schema mismatch: expected " + std::to_string(mine.size()) + " tensors, got " +
                          std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != mine[i].name || params[i].value.shape() != mine[i].value.shape())
      throw CheckpointError("parameter schema mismatch at " + mine[i].name + shape_string(mine[i].value.shape()) +
                            " vs " + params[i].name + shape_string(params[i].value.shape()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) mine[i].value = params[i].value;
}

ParameterSchema parameter_schema(const NetworkConfig& config) { return Model(config).schema(); }

}  // namespace cmfd
