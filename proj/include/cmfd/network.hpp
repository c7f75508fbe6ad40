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
#include <memory>
#include <string>
#include <vector>

#include "cmfd/layers.hpp"
#include "cmfd/tensor.hpp"

namespace cmfd {

struct NetworkConfig {
  std::size_t input_size = 256;
  std::size_t embed_channels = 256;  // backbone stage-3 width; base width is embed/4
  std::size_t encoder_depth = 1;     // number of (local, global) attention pairs
  std::size_t num_heads = 8;
  std::size_t window = 4;            // local-attention window side, in feature cells
  std::vector<std::size_t> decoder_channels{128, 64, 32, 16};
  std::size_t mlp_ratio = 4;
  bool use_transformer = true;

  std::size_t feature_side() const { return input_size / 16; }
  std::size_t base_width() const { return embed_channels / 4; }
  bool transformer_active() const { return use_transformer && encoder_depth > 0; }

  void validate() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct PredictionPair {
  Tensor det_logits;   // 2 x H x W
  Tensor dist_logits;  // 3 x H x W
};

struct TensorSpec {
  std::string name;
  Shape shape;

  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};
using ParameterSchema = std::vector<TensorSpec>;

struct NamedTensor {
  std::string name;
  Tensor value;
};
using ParameterSet = std::vector<NamedTensor>;

// ResNet-18 basic block without batch statistics: the residual branch is
// scaled by a learned scalar initialised to zero.
class BasicBlock {
 public:
  BasicBlock(ParamStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t stride);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

 private:
  Conv2d conv1_, conv2_;
  Relu relu1_, relu_out_;
  std::unique_ptr<Conv2d> shortcut_;
  Param* branch_scale_;
  Tensor branch_;
};

// ResNet-18 topology truncated after the stride-16 stage.
class Backbone {
 public:
  Backbone(ParamStore& store, const NetworkConfig& config);
  Tensor forward(const Tensor& image);
  Tensor backward(const Tensor& grad_out);

 private:
  std::size_t input_size_;
  Conv2d stem_;
  Relu stem_relu_;
  MaxPool pool_;
  std::vector<BasicBlock> blocks_;
};

class LocalAttention {
 public:
  LocalAttention(ParamStore& store, const std::string& name, const NetworkConfig& config);
  Tensor forward(const Tensor& fm);
  Tensor backward(const Tensor& grad_out);

  // Attention weights of the last forward pass, one entry per (window, head).
  std::vector<Mat> attention_weights() const;

 private:
  TransformerBlock block_;
  std::size_t window_;
  std::vector<TransformerBlock::Cache> caches_;
  Shape shape_;
};

class GlobalAttention {
 public:
  GlobalAttention(ParamStore& store, const std::string& name, const NetworkConfig& config);
  Tensor forward(const Tensor& fm);
  Tensor backward(const Tensor& grad_out);
  std::vector<Mat> attention_weights() const { return cache_.attention.weights; }

 private:
  TransformerBlock block_;
  TransformerBlock::Cache cache_;
  Shape shape_;
};

// Three channel-preserving 3x3 convolutions, each followed by ReLU, plus an
// identity skip.
class ResidualRefine {
 public:
  ResidualRefine(ParamStore& store, const std::string& name, std::size_t channels);
  Tensor forward(const Tensor& fm);
  Tensor backward(const Tensor& grad_out);

  const Tensor& activation(std::size_t i) const { return activations_.at(i); }

 private:
  std::vector<Conv2d> convs_;
  std::vector<Relu> relus_;
  std::vector<Tensor> activations_;
};

class Encoder {
 public:
  Encoder(ParamStore& store, const NetworkConfig& config);
  Tensor forward(const Tensor& fm);
  Tensor backward(const Tensor& grad_out);

  LocalAttention& local(std::size_t i) { return *locals_.at(i); }
  GlobalAttention& global(std::size_t i) { return *globals_.at(i); }
  ResidualRefine& refine() { return refine_; }

 private:
  Param* position_ = nullptr;
  std::vector<std::unique_ptr<LocalAttention>> locals_;
  std::vector<std::unique_ptr<GlobalAttention>> globals_;
  ResidualRefine refine_;
};

// Four [3x3 conv, ReLU, 2x bilinear upsample] stages and a 1x1 classifier.
class Decoder {
 public:
  Decoder(ParamStore& store, const std::string& name, const NetworkConfig& config, std::size_t num_classes);
  Tensor forward(const Tensor& fm);
  Tensor backward(const Tensor& grad_out);

  // Spatial side after each upsampling stage of the last forward pass.
  const std::vector<std::size_t>& stage_sides() const { return stage_sides_; }

 private:
  std::vector<Conv2d> convs_;
  std::vector<Relu> relus_;
  std::vector<Upsample2x> ups_;
  Conv2d head_;
  std::vector<std::size_t> stage_sides_;
};

// Full network. Owns its parameters; layers keep pointers into the store, so
// a Model is neither copyable nor movable.
class Model {
 public:
  explicit Model(const NetworkConfig& config, std::uint64_t seed = 0);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const NetworkConfig& config() const { return config_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }

  PredictionPair forward(const Tensor& image);
  // Accumulates parameter gradients for the last forward pass.
  void backward(const Tensor& grad_det, const Tensor& grad_dist);

  Backbone& backbone() { return backbone_; }
  Encoder& encoder() { return encoder_; }
  Decoder& decoder_f() { return decoder_f_; }
  Decoder& decoder_d() { return decoder_d_; }

  ParameterSchema schema() const;
  ParameterSet parameters() const;
  // Fails on any name or shape difference.
  void load_parameters(const ParameterSet& params);

 private:
  NetworkConfig config_;
  ParamStore store_;
  Backbone backbone_;
  Encoder encoder_;
  Decoder decoder_f_;
  Decoder decoder_d_;
};

ParameterSchema parameter_schema(const NetworkConfig& config);

// Channel softmax of a C x H x W logit tensor.
Tensor softmax_channels(const Tensor& logits);

}  // namespace cmfd
