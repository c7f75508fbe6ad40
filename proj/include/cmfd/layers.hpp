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

#include <Eigen/Core>

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <vector>

#include "cmfd/tensor.hpp"

namespace cmfd {

// Row-major dense matrix used for token sequences (tokens x channels) and
// GEMM views over tensor buffers.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;
using Vec = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor>;

enum class Init { kZeros, kOnes, kKaimingUniform, kSmallUniform, kPositional };

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
  Init init = Init::kZeros;
  std::size_t fan_in = 1;
};

// Owns every learnable tensor in registration order. Addresses are stable for
// the lifetime of the store.
class ParamStore {
 public:
  Param& add(std::string name, Shape shape, Init init, std::size_t fan_in = 1);

  std::deque<Param>& params() { return params_; }
  const std::deque<Param>& params() const { return params_; }
  Param& find(const std::string& name);
  const Param& find(const std::string& name) const;

  // Each tensor draws from its own stream seeded by (seed, name), so values do
  // not depend on registration order.
  void initialize(std::uint64_t seed);
  void zero_grad();
  std::size_t scalar_count() const;

 private:
  std::deque<Param> params_;
};

class Conv2d {
 public:
  Conv2d(ParamStore& store, const std::string& name, std::size_t in_channels, std::size_t out_channels,
         std::size_t kernel, std::size_t stride, std::size_t padding);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);

  std::size_t out_channels() const { return out_; }

 private:
  Mat im2col(const Tensor& x, std::size_t out_h, std::size_t out_w) const;
  void col2im(const Mat& col, Tensor& grad_in) const;

  Param* weight_;
  Param* bias_;
  std::size_t in_, out_, kernel_, stride_, padding_;
  Tensor input_;
};

class Relu {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<bool> active_;
  Shape shape_;
};

// 3x3 stride-2 max pooling with padding 1.
class MaxPool {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  std::vector<std::size_t> argmax_;
  Shape in_shape_;
};

// 2x bilinear upsampling with half-pixel centres (align_corners = false).
class Upsample2x {
 public:
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out) const;

 private:
  Shape in_shape_;
};

// Token-level pieces of a transformer block. They take explicit caches because
// one block runs once per attention window.
struct Linear {
  Param* weight = nullptr;  // out x in
  Param* bias = nullptr;

  Linear() = default;
  Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out);
  Mat forward(const Mat& x) const;
  Mat backward(const Mat& x, const Mat& grad_out) const;
};

struct LayerNorm {
  Param* gamma = nullptr;
  Param* beta = nullptr;
  static constexpr double kEps = 1e-5;

  struct Cache {
    Mat normalized;
    Eigen::VectorXd inv_std;
  };

  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, std::size_t channels);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& grad_out, const Cache& cache) const;
};

struct MultiHeadAttention {
  Linear q, k, v, proj;
  std::size_t heads = 1;

  struct Cache {
    Mat input, queries, keys, values, merged;
    std::vector<Mat> weights;  // per head, tokens x tokens, rows sum to 1
  };

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, std::size_t channels, std::size_t heads);
  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& grad_out, const Cache& cache) const;
};

// Pre-norm block: x + MHSA(LN(x)), then + FFN(LN(.)) with a GELU hidden layer.
class TransformerBlock {
 public:
  struct Cache {
    LayerNorm::Cache norm1, norm2;
    MultiHeadAttention::Cache attention;
    Mat mid, hidden_in, hidden, ffn_in;
  };

  TransformerBlock(ParamStore& store, const std::string& name, std::size_t channels, std::size_t heads,
                   std::size_t mlp_ratio);

  Mat forward(const Mat& x, Cache& cache) const;
  Mat backward(const Mat& grad_out, const Cache& cache) const;

 private:
  LayerNorm norm1_, norm2_;
  MultiHeadAttention attention_;
  Linear fc1_, fc2_;
};

// C x h x w <-> (h*w) x C, token index y*w + x.
Mat to_tokens(const Tensor& fm);
Tensor from_tokens(const Mat& tokens, std::size_t height, std::size_t width);

}  // namespace cmfd
