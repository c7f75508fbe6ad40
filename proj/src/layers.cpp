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

#include "cmfd/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cmfd/random.hpp"

namespace cmfd {

namespace {

MatMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
  return MatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
  return ConstMatMap(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

Eigen::Map<Vec> as_row(Tensor& t) { return Eigen::Map<Vec>(t.data(), static_cast<Eigen::Index>(t.size())); }

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

}  // namespace

Param& ParamStore::add(std::string name, Shape shape, Init init, std::size_t fan_in) {
  for (const Param& p : params_)
    if (p.name == name) throw ConfigError("duplicate parameter name " + name);
  Param& p = params_.emplace_back();
  p.name = std::move(name);
  p.value = Tensor(shape);
  p.grad = Tensor(std::move(shape));
  p.init = init;
  p.fan_in = std::max<std::size_t>(fan_in, 1);
  return p;
}

Param& ParamStore::find(const std::string& name) {
  for (Param& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named " + name);
}

const Param& ParamStore::find(const std::string& name) const {
  for (const Param& p : params_)
    if (p.name == name) return p;
  throw ConfigError("no parameter named " + name);
}

void ParamStore::initialize(std::uint64_t seed) {
  for (Param& p : params_) {
    Rng rng(mix_seed(seed, p.name));
    const auto fan = static_cast<double>(p.fan_in);
    for (double& v : p.value.values()) {
      switch (p.init) {
        case Init::kZeros:
          v = 0.0;
          break;
        case Init::kOnes:
          v = 1.0;
          break;
        case Init::kKaimingUniform: {
          const double bound = std::sqrt(6.0 / fan);
          v = rng.uniform(-bound, bound);
          break;
        }
        case Init::kSmallUniform: {
          const double bound = 1.0 / std::sqrt(fan);
          v = rng.uniform(-bound, bound);
          break;
        }
        case Init::kPositional:
          v = rng.uniform(-0.02, 0.02);
          break;
      }
    }
  }
  zero_grad();
}

void ParamStore::zero_grad() {
  for (Param& p : params_) p.grad.zero();
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const Param& p : params_) n += p.value.size();
  return n;
}

// ---------------------------------------------------------------------------

Conv2d::Conv2d(ParamStore& store, const std::string& name, std::size_t in_channels,
               std::size_t out_channels, std::size_t kernel, std::size_t stride, std::size_t padding)
    : in_(in_channels), out_(out_channels), kernel_(kernel), stride_(stride), padding_(padding) {
  const std::size_t fan_in = in_channels * kernel * kernel;
  weight_ = &store.add(name + ".weight", {out_channels, in_channels, kernel, kernel}, Init::kKaimingUniform, fan_in);
  bias_ = &store.add(name + ".bias", {out_channels}, Init::kZeros);
}

Mat Conv2d::im2col(const Tensor& x, std::size_t out_h, std::size_t out_w) const {
  const std::size_t h = x.dim(1), w = x.dim(2);
  Mat col(static_cast<Eigen::Index>(in_ * kernel_ * kernel_), static_cast<Eigen::Index>(out_h * out_w));
  for (std::size_t c = 0; c < in_; ++c)
    for (std::size_t ky = 0; ky < kernel_; ++ky)
      for (std::size_t kx = 0; kx < kernel_; ++kx) {
        double* row = col.row(static_cast<Eigen::Index>((c * kernel_ + ky) * kernel_ + kx)).data();
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(padding_);
          double* dst = row + oy * out_w;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = x.data() + (c * h + static_cast<std::size_t>(iy)) * w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(padding_);
            dst[ox] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[ix];
          }
        }
      }
  return col;
}

void Conv2d::col2im(const Mat& col, Tensor& grad_in) const {
  const std::size_t h = grad_in.dim(1), w = grad_in.dim(2);
  const std::size_t out_h = (h + 2 * padding_ - kernel_) / stride_ + 1;
  const std::size_t out_w = (w + 2 * padding_ - kernel_) / stride_ + 1;
  for (std::size_t c = 0; c < in_; ++c)
    for (std::size_t ky = 0; ky < kernel_; ++ky)
      for (std::size_t kx = 0; kx < kernel_; ++kx) {
        const double* row = col.row(static_cast<Eigen::Index>((c * kernel_ + ky) * kernel_ + kx)).data();
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * stride_ + ky) - static_cast<std::ptrdiff_t>(padding_);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = grad_in.data() + (c * h + static_cast<std::size_t>(iy)) * w;
          const double* src = row + oy * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * stride_ + kx) - static_cast<std::ptrdiff_t>(padding_);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
          }
        }
      }
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.rank() != 3 || x.dim(0) != in_)
    throw ShapeError(weight_->name + ": expected " + std::to_string(in_) + " input channels, got " +
                     shape_string(x.shape()));
  const std::size_t h = x.dim(1), w = x.dim(2);
  const std::size_t out_h = (h + 2 * padding_ - kernel_) / stride_ + 1;
  const std::size_t out_w = (w + 2 * padding_ - kernel_) / stride_ + 1;
  input_ = x;
  Tensor y({out_, out_h, out_w});
  auto ym = as_matrix(y, out_, out_h * out_w);
  const auto wm = as_matrix(weight_->value, out_, in_ * kernel_ * kernel_);
  if (kernel_ == 1 && stride_ == 1 && padding_ == 0)
    ym.noalias() = wm * as_matrix(x, in_, h * w);
  else
    ym.noalias() = wm * im2col(x, out_h, out_w);
  ym.colwise() += Eigen::Map<const Eigen::VectorXd>(bias_->value.data(), static_cast<Eigen::Index>(out_));
  return y;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const std::size_t h = input_.dim(1), w = input_.dim(2);
  const std::size_t out_h = grad_out.dim(1), out_w = grad_out.dim(2);
  const std::size_t k = in_ * kernel_ * kernel_;
  const auto dy = as_matrix(grad_out, out_, out_h * out_w);
  auto dw = as_matrix(weight_->grad, out_, k);
  const auto wm = as_matrix(weight_->value, out_, k);
  Eigen::Map<Eigen::VectorXd>(bias_->grad.data(), static_cast<Eigen::Index>(out_)) += dy.rowwise().sum();
  Tensor grad_in({in_, h, w});
  if (kernel_ == 1 && stride_ == 1 && padding_ == 0) {
    const auto xm = as_matrix(input_, in_, h * w);
    dw.noalias() += dy * xm.transpose();
    as_matrix(grad_in, in_, h * w).noalias() = wm.transpose() * dy;
  } else {
    const Mat col = im2col(input_, out_h, out_w);
    dw.noalias() += dy * col.transpose();
    const Mat dcol = wm.transpose() * dy;
    col2im(dcol, grad_in);
  }
  return grad_in;
}

// ---------------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  shape_ = x.shape();
  active_.assign(x.size(), false);
  Tensor y = x;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] > 0.0)
      active_[i] = true;
    else
      y[i] = 0.0;
  }
  return y;
}

Tensor Relu::backward(const Tensor& grad_out) const {
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!active_[i]) g[i] = 0.0;
  return g;
}

Tensor MaxPool::forward(const Tensor& x) {
  in_shape_ = x.shape();
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::size_t out_h = (h + 2 - 3) / 2 + 1, out_w = (w + 2 - 3) / 2 + 1;
  Tensor y({c, out_h, out_w});
  argmax_.assign(y.size(), 0);
  std::size_t o = 0;
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t oy = 0; oy < out_h; ++oy)
      for (std::size_t ox = 0; ox < out_w; ++ox, ++o) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          const auto iy = static_cast<std::ptrdiff_t>(oy * 2 + ky) - 1;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const auto ix = static_cast<std::ptrdiff_t>(ox * 2 + kx) - 1;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            const std::size_t idx = (ch * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix);
            if (x[idx] > best) {
              best = x[idx];
              best_idx = idx;
            }
          }
        }
        y[o] = best;
        argmax_[o] = best_idx;
      }
  return y;
}

Tensor MaxPool::backward(const Tensor& grad_out) const {
  Tensor g(in_shape_);
  for (std::size_t o = 0; o < grad_out.size(); ++o) g[argmax_[o]] += grad_out[o];
  return g;
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double w_hi;
};

// Source taps for output index o of a 2x half-pixel-centred upsampling.
Tap upsample_tap(std::size_t o, std::size_t n) {
  const double src = std::max((static_cast<double>(o) + 0.5) / 2.0 - 0.5, 0.0);
  const auto lo = static_cast<std::size_t>(src);
  return {lo, std::min(lo + 1, n - 1), src - static_cast<double>(lo)};
}

}  // namespace

Tensor Upsample2x::forward(const Tensor& x) {
  in_shape_ = x.shape();
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  Tensor y({c, 2 * h, 2 * w});
  for (std::size_t oy = 0; oy < 2 * h; ++oy) {
    const Tap ty = upsample_tap(oy, h);
    for (std::size_t ox = 0; ox < 2 * w; ++ox) {
      const Tap tx = upsample_tap(ox, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double top = (1 - tx.w_hi) * x.at(ch, ty.lo, tx.lo) + tx.w_hi * x.at(ch, ty.lo, tx.hi);
        const double bottom = (1 - tx.w_hi) * x.at(ch, ty.hi, tx.lo) + tx.w_hi * x.at(ch, ty.hi, tx.hi);
        y.at(ch, oy, ox) = (1 - ty.w_hi) * top + ty.w_hi * bottom;
      }
    }
  }
  return y;
}

Tensor Upsample2x::backward(const Tensor& grad_out) const {
  Tensor g(in_shape_);
  const std::size_t c = in_shape_[0], h = in_shape_[1], w = in_shape_[2];
  for (std::size_t oy = 0; oy < 2 * h; ++oy) {
    const Tap ty = upsample_tap(oy, h);
    for (std::size_t ox = 0; ox < 2 * w; ++ox) {
      const Tap tx = upsample_tap(ox, w);
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double d = grad_out.at(ch, oy, ox);
        g.at(ch, ty.lo, tx.lo) += (1 - ty.w_hi) * (1 - tx.w_hi) * d;
        g.at(ch, ty.lo, tx.hi) += (1 - ty.w_hi) * tx.w_hi * d;
        g.at(ch, ty.hi, tx.lo) += ty.w_hi * (1 - tx.w_hi) * d;
        g.at(ch, ty.hi, tx.hi) += ty.w_hi * tx.w_hi * d;
      }
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

Linear::Linear(ParamStore& store, const std::string& name, std::size_t in, std::size_t out) {
  weight = &store.add(name + ".weight", {out, in}, Init::kSmallUniform, in);
  bias = &store.add(name + ".bias", {out}, Init::kZeros);
}

Mat Linear::forward(const Mat& x) const {
  const std::size_t out = weight->value.dim(0), in = weight->value.dim(1);
  Mat y = x * as_matrix(weight->value, out, in).transpose();
  y.rowwise() += as_row(bias->value);
  return y;
}

Mat Linear::backward(const Mat& x, const Mat& grad_out) const {
  const std::size_t out = weight->value.dim(0), in = weight->value.dim(1);
  as_matrix(weight->grad, out, in).noalias() += grad_out.transpose() * x;
  as_row(bias->grad) += grad_out.colwise().sum();
  return grad_out * as_matrix(weight->value, out, in);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, std::size_t channels) {
  gamma = &store.add(name + ".weight", {channels}, Init::kOnes);
  beta = &store.add(name + ".bias", {channels}, Init::kZeros);
}

Mat LayerNorm::forward(const Mat& x, Cache& cache) const {
  const auto n = x.rows();
  const auto c = static_cast<double>(x.cols());
  cache.normalized.resize(n, x.cols());
  cache.inv_std.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double mean = x.row(i).sum() / c;
    const double var = (x.row(i).array() - mean).square().sum() / c;
    const double inv = 1.0 / std::sqrt(var + kEps);
    cache.inv_std(i) = inv;
    cache.normalized.row(i) = (x.row(i).array() - mean) * inv;
  }
  Mat y = cache.normalized.array().rowwise() * as_row(gamma->value).array();
  y.rowwise() += as_row(beta->value);
  return y;
}

Mat LayerNorm::backward(const Mat& grad_out, const Cache& cache) const {
  const auto c = static_cast<double>(grad_out.cols());
  as_row(gamma->grad) += (grad_out.array() * cache.normalized.array()).colwise().sum().matrix();
  as_row(beta->grad) += grad_out.colwise().sum();
  const Mat dxhat = grad_out.array().rowwise() * as_row(gamma->value).array();
  Mat dx(grad_out.rows(), grad_out.cols());
  for (Eigen::Index i = 0; i < grad_out.rows(); ++i) {
    const double mean_d = dxhat.row(i).sum() / c;
    const double mean_dx = dxhat.row(i).dot(cache.normalized.row(i)) / c;
    dx.row(i) = cache.inv_std(i) *
                (dxhat.row(i).array() - mean_d - cache.normalized.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name, std::size_t channels,
                                       std::size_t num_heads)
    : q(store, name + ".q", channels, channels),
      k(store, name + ".k", channels, channels),
      v(store, name + ".v", channels, channels),
      proj(store, name + ".proj", channels, channels),
      heads(num_heads) {
  if (channels % num_heads != 0) throw ConfigError(name + ": channels not divisible by heads");
}

Mat MultiHeadAttention::forward(const Mat& x, Cache& cache) const {
  cache.input = x;
  cache.queries = q.forward(x);
  cache.keys = k.forward(x);
  cache.values = v.forward(x);
  const Eigen::Index n = x.rows();
  const auto d = static_cast<Eigen::Index>(x.cols() / static_cast<Eigen::Index>(heads));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  cache.merged.resize(n, x.cols());
  cache.weights.resize(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * d;
    Mat scores = (cache.queries.middleCols(off, d) * cache.keys.middleCols(off, d).transpose()) * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double peak = scores.row(i).maxCoeff();
      scores.row(i) = (scores.row(i).array() - peak).exp();
      scores.row(i) /= scores.row(i).sum();
    }
    cache.merged.middleCols(off, d).noalias() = scores * cache.values.middleCols(off, d);
    cache.weights[h] = std::move(scores);
  }
  return proj.forward(cache.merged);
}

Mat MultiHeadAttention::backward(const Mat& grad_out, const Cache& cache) const {
  const Mat d_merged = proj.backward(cache.merged, grad_out);
  const Eigen::Index n = d_merged.rows();
  const auto d = static_cast<Eigen::Index>(d_merged.cols() / static_cast<Eigen::Index>(heads));
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Mat dq(n, d_merged.cols()), dk(n, d_merged.cols()), dv(n, d_merged.cols());
  for (std::size_t h = 0; h < heads; ++h) {
    const Eigen::Index off = static_cast<Eigen::Index>(h) * d;
    const Mat& a = cache.weights[h];
    const auto d_out = d_merged.middleCols(off, d);
    const Mat d_weights = d_out * cache.values.middleCols(off, d).transpose();
    dv.middleCols(off, d).noalias() = a.transpose() * d_out;
    const Eigen::VectorXd row_dot = (d_weights.array() * a.array()).rowwise().sum();
    const Mat d_scores = (a.array() * (d_weights.array().colwise() - row_dot.array())).matrix() * scale;
    dq.middleCols(off, d).noalias() = d_scores * cache.keys.middleCols(off, d);
    dk.middleCols(off, d).noalias() = d_scores.transpose() * cache.queries.middleCols(off, d);
  }
  Mat dx = q.backward(cache.input, dq);
  dx += k.backward(cache.input, dk);
  dx += v.backward(cache.input, dv);
  return dx;
}

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& name, std::size_t channels,
                                   std::size_t heads, std::size_t mlp_ratio)
    : norm1_(store, name + ".norm1", channels),
      norm2_(store, name + ".norm2", channels),
      attention_(store, name + ".attn", channels, heads),
      fc1_(store, name + ".fc1", channels, channels * mlp_ratio),
      fc2_(store, name + ".fc2", channels * mlp_ratio, channels) {}

Mat TransformerBlock::forward(const Mat& x, Cache& cache) const {
  cache.mid = x + attention_.forward(norm1_.forward(x, cache.norm1), cache.attention);
  cache.ffn_in = norm2_.forward(cache.mid, cache.norm2);
  cache.hidden_in = fc1_.forward(cache.ffn_in);
  cache.hidden = cache.hidden_in.unaryExpr([](double v) { return gelu(v); });
  return cache.mid + fc2_.forward(cache.hidden);
}

Mat TransformerBlock::backward(const Mat& grad_out, const Cache& cache) const {
  const Mat d_hidden = fc2_.backward(cache.hidden, grad_out);
  const Mat d_hidden_in =
      d_hidden.array() * cache.hidden_in.unaryExpr([](double v) { return gelu_grad(v); }).array();
  Mat d_mid = grad_out + norm2_.backward(fc1_.backward(cache.ffn_in, d_hidden_in), cache.norm2);
  return d_mid + norm1_.backward(attention_.backward(d_mid, cache.attention), cache.norm1);
}

Mat to_tokens(const Tensor& fm) {
  const std::size_t c = fm.dim(0), hw = fm.dim(1) * fm.dim(2);
  return as_matrix(fm, c, hw).transpose();
}

Tensor from_tokens(const Mat& tokens, std::size_t height, std::size_t width) {
  const auto c = static_cast<std::size_t>(tokens.cols());
  Tensor fm({c, height, width});
  as_matrix(fm, c, height * width) = tokens.transpose();
  return fm;
}

}  // namespace cmfd
